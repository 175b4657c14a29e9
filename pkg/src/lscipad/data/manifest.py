"""JSON manifest: one object per sample with its file path and metadata."""

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError, FormatError
from .sample import SampleMeta, load_sample

FIELDS = ("path", "sample_id", "subject_id", "finger", "label", "species", "capture_index")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    meta: SampleMeta

    def to_json(self):
        m = self.meta
        return {
            "path": self.path,
            "sample_id": m.sample_id,
            "subject_id": m.subject_id,
            "finger": m.finger.value,
            "label": m.label.value,
            "species": m.species.value if m.species is not None else None,
            "capture_index": m.capture_index,
        }

    @classmethod
    def from_json(cls, obj):
        missing = [k for k in FIELDS if k not in obj]
        if missing:
            raise FormatError(f"manifest entry missing {missing}")
        meta = SampleMeta(obj["sample_id"], obj["subject_id"], obj["finger"], obj["label"],
                          obj["species"], int(obj["capture_index"]))
        return cls(obj["path"], meta)


class Manifest:
    """Ordered sample list; relative paths resolve against ``root``."""

    def __init__(self, entries, root="."):
        self.entries = list(entries)
        self.root = Path(root)
        ids = [e.meta.sample_id for e in self.entries]
        dupes = [k for k, n in Counter(ids).items() if n > 1]
        if dupes:
            raise DataError(f"duplicate sample ids in manifest: {dupes[:5]}")
        self._by_id = {e.meta.sample_id: e for e in self.entries}

    @classmethod
    def from_metas(cls, metas, root="."):
        return cls([ManifestEntry(f"samples/{m.sample_id}.lsc", m) for m in metas], root)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def metas(self):
        return [e.meta for e in self.entries]

    @property
    def sample_ids(self):
        return [e.meta.sample_id for e in self.entries]

    def meta(self, sample_id):
        return self._by_id[sample_id].meta

    def path(self, sample_id):
        p = Path(self._by_id[sample_id].path)
        return p if p.is_absolute() else self.root / p

    def load(self, sample_id):
        path = self.path(sample_id)
        if not path.exists():
            raise DataError(f"sample file not found: {path}")
        return load_sample(path, self.meta(sample_id))

    def class_counts(self):
        return Counter(m.class_name for m in self.metas)

    def to_json(self):
        return [e.to_json() for e in self.entries]

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load_file(cls, path):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
        if not isinstance(raw, list):
            raise FormatError(f"{path}: manifest must be a JSON array")
        return cls([ManifestEntry.from_json(o) for o in raw], root=path.parent)
