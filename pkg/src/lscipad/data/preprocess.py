import numpy as np

from ..errors import DataError


def preprocess(sample, t, offset=0):
    """Dark-corrected clip of ``t`` frames scaled to [0, 1], shaped (t, H, W).

    Frames ``[offset, offset + t)`` have the dark-frame average subtracted,
    negatives clamp to 0 and the clip is min/max scaled as a whole.  A
    constant clip maps to zeros.
    """
    H, W, T = sample.cube.shape
    if t < 1 or offset < 0 or offset + t > T:
        raise DataError(f"cannot take {t} frames from offset {offset} of a {T}-frame capture")
    frames = sample.cube[:, :, offset:offset + t].astype(np.float32)
    frames -= sample.dark_avg[:, :, None]
    np.maximum(frames, 0, out=frames)
    lo, hi = frames.min(), frames.max()
    if hi > lo:
        frames = (frames - lo) / (hi - lo)
    else:
        frames = np.zeros_like(frames)
    return np.ascontiguousarray(frames.transpose(2, 0, 1))
