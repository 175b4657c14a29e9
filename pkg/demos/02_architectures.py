"""Build each classifier for one patch geometry and print a compact summary."""

import numpy as np

from lscipad.architectures import SPATIAL_SWEEP, TEMPORAL_SWEEP, ArchKind, build, describe, forward_scores, input_shape

h = w = 16
t = 20
rng = np.random.default_rng(1)
for kind in ArchKind:
    net = build(kind, h, w, t, seed=0)
    x = rng.random(input_shape(net, 4)).astype(np.float32)
    s = forward_scores(net, x)
    info = describe(net)
    print(f"{kind.value:6s} input {input_shape(net, 4)}  layers {len(info['layers']):3d}  "
          f"params {net.n_params:>9,}  scores {np.round(s, 3)}")

# the recurrent model reads 8x8 frames as 64-vectors
lstm = build("Lstm", 8, 8, 100)
print("\nLstm 8x8x100:")
for layer in describe(lstm)["layers"]:
    print("  ", layer)
print("total", f"{lstm.n_params:,}")

print("\nsweep grid:", len(SPATIAL_SWEEP), "spatial x", len(TEMPORAL_SWEEP), "temporal sizes:",
      SPATIAL_SWEEP, TEMPORAL_SWEEP)
