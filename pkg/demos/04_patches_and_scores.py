"""From one capture to one decision: ROI crop, patches, per-patch scores, mean."""

import numpy as np

from lscipad.architectures import build, forward_scores
from lscipad.data import preprocess, synth_sample
from lscipad.patching import PatchSpec, aggregate, patchify, view_for

sample = synth_sample("BonaFide", geometry=(64, 64, 30), seed=5)
clip = preprocess(sample, t=10)

for spec in (PatchSpec(8, 8, 10), PatchSpec(16, 16, 10, stride=8), PatchSpec(64, 64, 10)):
    batch = patchify(clip, spec, "demo")
    print(f"{spec.h}x{spec.w} stride {spec.strides}: {len(batch.provenance):3d} patches, "
          f"first at {batch.provenance[0][1:]}, last at {batch.provenance[-1][1:]}")

# an untrained network scores near 0.5; the point here is the plumbing
spec = PatchSpec(8, 8, 10)
batch = patchify(clip, spec, "demo")
for kind in ("BaseN", "Conv3", "Lstm"):
    net = build(kind, 8, 8, 10, seed=0)
    scores = forward_scores(net, view_for(kind, batch))
    score, label = aggregate(scores)
    print(f"{kind:6s} view {view_for(kind, batch).shape}  mean score {score:.4f} -> {label.value}")

# 0.5 exactly counts as an attack
print(aggregate(np.array([0.4, 0.6]))[1].value)
