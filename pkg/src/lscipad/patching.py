"""Patch extraction from preprocessed clips, per-architecture views, and score aggregation."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data.sample import Label
from .errors import ConfigError, DataError

DEFAULT_ROI = 32
DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class PatchSpec:
    """Spatial patch ``h x w``, temporal depth ``t``, stride and ROI size.

    ``stride=None`` means non-overlapping windows (stride = patch size).  A
    patch as large as the whole frame bypasses the ROI crop (full-frame mode).
    """

    h: int
    w: int
    t: int
    stride: Optional[int] = None
    roi: int = DEFAULT_ROI
    offset: int = 0  # first frame of the temporal window

    def __post_init__(self):
        if min(self.h, self.w, self.t) < 1:
            raise ConfigError(f"patch sizes must be positive: {self}")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.roi < 1:
            raise ConfigError("roi must be >= 1")

    @property
    def strides(self):
        return (self.h, self.w) if self.stride is None else (self.stride, self.stride)

    def full_frame(self, frame_shape):
        return (self.h, self.w) == tuple(frame_shape)

    def n_patches(self, frame_shape=(64, 64)):
        if self.full_frame(frame_shape):
            return 1
        sy, sx = self.strides
        return ((self.roi - self.h) // sy + 1) * ((self.roi - self.w) // sx + 1)


@dataclass
class PatchBatch:
    patches: np.ndarray                      # (N, t, h, w)
    provenance: list = field(default_factory=list)  # (sample_id, y, x) per patch

    def __post_init__(self):
        if self.patches.ndim != 4 or len(self.provenance) != self.patches.shape[0]:
            raise DataError("patch tensor and provenance disagree")

    def __len__(self):
        return self.patches.shape[0]


def roi_origin(frame_shape, roi):
    H, W = frame_shape
    return (H - roi) // 2, (W - roi) // 2


def extract_roi(clip, roi=DEFAULT_ROI):
    """Central ``roi x roi`` crop of a (t, H, W) clip; odd margins leave the extra pixel bottom/right."""
    t, H, W = clip.shape
    if roi > min(H, W):
        raise ConfigError(f"roi {roi} larger than frame {H}x{W}")
    y0, x0 = roi_origin((H, W), roi)
    return clip[:, y0:y0 + roi, x0:x0 + roi]


def extract_patches(clip, spec, sample_id="", origin=(0, 0)):
    """All fully-contained windows of ``clip`` in raster order."""
    t, H, W = clip.shape
    if spec.h > H or spec.w > W:
        raise ConfigError(f"patch {spec.h}x{spec.w} larger than region {H}x{W}")
    if spec.t > t:
        raise ConfigError(f"patch depth {spec.t} exceeds clip length {t}")
    sy, sx = spec.strides
    ys = range(0, H - spec.h + 1, sy)
    xs = range(0, W - spec.w + 1, sx)
    patches = np.empty((len(ys) * len(xs), spec.t, spec.h, spec.w), dtype=clip.dtype)
    prov = []
    for i, (y, x) in enumerate((y, x) for y in ys for x in xs):
        patches[i] = clip[:spec.t, y:y + spec.h, x:x + spec.w]
        prov.append((sample_id, origin[0] + y, origin[1] + x))
    return PatchBatch(patches, prov)


def patchify(clip, spec, sample_id=""):
    """ROI crop (unless full-frame) followed by :func:`extract_patches`; offsets are in frame coordinates."""
    if spec.full_frame(clip.shape[1:]):
        return extract_patches(clip, spec, sample_id)
    region = extract_roi(clip, spec.roi)
    return extract_patches(region, spec, sample_id, roi_origin(clip.shape[1:], spec.roi))


def concat_batches(batches):
    batches = list(batches)
    if not batches:
        raise DataError("no patch batches to concatenate")
    return PatchBatch(np.concatenate([b.patches for b in batches]),
                      [p for b in batches for p in b.provenance])


def to_2d_view(batch):
    """Time as channels: (N, t, h, w), the native layout."""
    return batch.patches


def to_3d_view(batch):
    """Single-channel volume: (N, 1, t, h, w)."""
    return batch.patches[:, None]


def to_sequence(batch):
    """Length-t sequence of (N, h*w) row-major frame vectors, stacked as (t, N, h*w)."""
    n, t, h, w = batch.patches.shape
    return np.ascontiguousarray(batch.patches.reshape(n, t, h * w).transpose(1, 0, 2))


def view_for(kind, batch):
    from .architectures import ArchKind

    view = ArchKind.parse(kind).view
    if view == "3d":
        return to_3d_view(batch)
    if view == "sequence":
        return to_sequence(batch)
    return to_2d_view(batch)


def aggregate(scores, threshold=DECISION_THRESHOLD):
    """Mean patch score and the sample decision (attack iff mean >= threshold)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise DataError("cannot aggregate an empty score list")
    if np.any((scores < 0) | (scores > 1)) or not np.all(np.isfinite(scores)):
        raise DataError("patch scores must lie in [0, 1]")
    # fsum is exactly rounded, so the mean does not depend on input order
    score = math.fsum(scores.tolist()) / scores.size
    return score, Label.ATTACK if score >= threshold else Label.BONA_FIDE
