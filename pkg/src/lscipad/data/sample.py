"""LSCI capture records and the ``LSC1`` binary sample format.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"LSC1"
    4       2     format version (u16, currently 1)
    6       12    H, W, T (u32 each)
    18      26    reserved, zero
    44      4HW   dark-frame average, float32, row-major
    ...     2HWT  cube, u16, frame-major (frame 0 first, row-major inside a frame)

Sample metadata is not stored in the file; it travels in the manifest.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DataError, FormatError, TruncatedFileError

MAGIC = b"LSC1"
VERSION = 1
HEADER_SIZE = 44
_HEADER = struct.Struct("<4sHIII")


class Label(str, enum.Enum):
    BONA_FIDE = "BonaFide"
    ATTACK = "Attack"


class Species(str, enum.Enum):
    CONDUCTIVE_PAPER = "ConductivePaper"
    CONDUCTIVE_SILICONE = "ConductiveSilicone"
    TRANSPARENCY = "Transparency"
    SILICONE_I = "SiliconeI"
    SILICONE_II = "SiliconeII"
    DRAGON_SKIN = "DragonSkin"


class Finger(str, enum.Enum):
    LEFT_INDEX = "LeftIndex"
    LEFT_MIDDLE = "LeftMiddle"
    LEFT_RING = "LeftRing"
    RIGHT_INDEX = "RightIndex"
    RIGHT_MIDDLE = "RightMiddle"
    RIGHT_RING = "RightRing"


@dataclass(frozen=True)
class SampleMeta:
    sample_id: str
    subject_id: str
    finger: Finger
    label: Label
    species: Optional[Species] = None
    capture_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "finger", Finger(self.finger))
        object.__setattr__(self, "label", Label(self.label))
        if self.species is not None:
            object.__setattr__(self, "species", Species(self.species))
        if (self.species is not None) != (self.label is Label.ATTACK):
            raise DataError(f"{self.sample_id}: species must be set exactly for attack samples")

    @property
    def is_attack(self):
        return self.label is Label.ATTACK

    @property
    def class_name(self):
        """Species name for attacks, ``BonaFide`` otherwise."""
        return self.species.value if self.species is not None else Label.BONA_FIDE.value


@dataclass(eq=False)
class LsciSample:
    cube: np.ndarray      # (H, W, T) uint16
    dark_avg: np.ndarray  # (H, W) float32
    meta: Optional[SampleMeta] = None

    def __post_init__(self):
        if self.cube.ndim != 3 or min(self.cube.shape) < 1:
            raise DataError(f"cube must be H x W x T with positive sizes, got {self.cube.shape}")
        if self.cube.dtype != np.uint16:
            raise DataError(f"cube must be uint16, got {self.cube.dtype}")
        if self.dark_avg.shape != self.cube.shape[:2]:
            raise DataError(f"dark_avg {self.dark_avg.shape} does not match cube {self.cube.shape}")
        self.dark_avg = self.dark_avg.astype(np.float32, copy=False)

    @property
    def shape(self):
        return self.cube.shape


def file_size(h, w, t):
    return HEADER_SIZE + 4 * h * w + 2 * h * w * t


def to_bytes(sample):
    h, w, t = sample.cube.shape
    header = _HEADER.pack(MAGIC, VERSION, h, w, t).ljust(HEADER_SIZE, b"\0")
    dark = sample.dark_avg.astype("<f4").tobytes(order="C")
    # frame-major: (T, H, W)
    cube = np.ascontiguousarray(sample.cube.transpose(2, 0, 1)).astype("<u2").tobytes()
    return header + dark + cube


def from_bytes(buf, meta=None):
    if len(buf) < HEADER_SIZE:
        raise TruncatedFileError(f"header needs {HEADER_SIZE} bytes, got {len(buf)}")
    magic, version, h, w, t = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    if min(h, w, t) < 1:
        raise FormatError(f"bad shape {(h, w, t)}")
    expected = file_size(h, w, t)
    if len(buf) < expected:
        raise TruncatedFileError(f"expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after payload")
    dark = np.frombuffer(buf, "<f4", h * w, HEADER_SIZE).reshape(h, w).astype(np.float32)
    frames = np.frombuffer(buf, "<u2", h * w * t, HEADER_SIZE + 4 * h * w).reshape(t, h, w)
    cube = np.ascontiguousarray(frames.transpose(1, 2, 0)).astype(np.uint16)
    return LsciSample(cube, dark, meta)


def save_sample(sample, path):
    Path(path).write_bytes(to_bytes(sample))


def load_sample(path, meta=None):
    return from_bytes(Path(path).read_bytes(), meta)
