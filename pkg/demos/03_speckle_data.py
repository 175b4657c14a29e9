"""Generate a few synthetic speckle captures and look at what separates the classes.

Live tissue decorrelates from frame to frame, overlays barely move.  The
temporal standard deviation per pixel is the simplest statistic that shows it.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from lscipad.data import Manifest, file_size, make_synth_dataset, preprocess, temporal_std

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="lsci_demo_"))
counts = {"BonaFide": 6, "DragonSkin": 3, "Transparency": 3}
make_synth_dataset(out, counts, subjects=4, seed=0, geometry=(64, 64, 60))
m = Manifest.load_file(out / "manifest.json")
print("wrote", len(m.sample_ids), "captures to", out)
print("each file is", file_size(64, 64, 60), "bytes")

by_class = {}
for sid in m.sample_ids:
    sample = m.load(sid)
    by_class.setdefault(sample.meta.class_name, []).append(temporal_std(sample))
for name, vals in sorted(by_class.items()):
    print(f"{name:14s} temporal std  mean {np.mean(vals):8.1f}  (n={len(vals)})")

# the network input: dark-corrected, scaled to [0, 1], time first
clip = preprocess(m.load(m.sample_ids[0]), t=20)
print("clip", clip.shape, clip.dtype, "range", float(clip.min()), float(clip.max()))
