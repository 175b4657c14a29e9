"""PAD error rates with attacks as the positive class.

APCER = FN / P (attacks accepted as bona fide), BPCER = FP / N (bona fide
flagged as attacks), ACER = their mean.  A sample is called an attack when
its score is >= the threshold.
"""

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import DataError

APCER_TARGET = 0.05
ROC_GRID = np.linspace(0.0, 1.0, 1001)
METRIC_NAMES = ("apcer", "bpcer", "acer", "bpcer20", "auc")


@dataclass
class ScoreSet:
    sample_ids: list
    labels: np.ndarray   # 1 = attack, 0 = bona fide
    scores: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not (len(self.sample_ids) == self.labels.size == self.scores.size):
            raise DataError("score set fields have different lengths")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 (bona fide) or 1 (attack)")
        if self.scores.size and (np.any(~np.isfinite(self.scores))
                                 or self.scores.min() < 0 or self.scores.max() > 1):
            raise DataError("scores must lie in [0, 1]")

    @classmethod
    def from_arrays(cls, labels, scores):
        return cls([f"x{i}" for i in range(len(labels))], labels, scores)

    def __len__(self):
        return self.scores.size

    @property
    def attack_scores(self):
        return self.scores[self.labels == 1]

    @property
    def bona_fide_scores(self):
        return self.scores[self.labels == 0]

    def to_json(self):
        return [{"sample_id": s, "label": int(l), "score": float(v)}
                for s, l, v in zip(self.sample_ids, self.labels, self.scores)]

    @classmethod
    def from_json(cls, rows):
        return cls([r["sample_id"] for r in rows], [r["label"] for r in rows], [r["score"] for r in rows])


@dataclass(frozen=True)
class PointMetrics:
    apcer: Optional[float]
    bpcer: Optional[float]
    acer: Optional[float]
    P: int
    N: int
    FP: int
    FN: int


def point_metrics(scores, threshold=0.5):
    if len(scores) == 0:
        raise DataError("empty score set")
    attack = scores.attack_scores
    bona = scores.bona_fide_scores
    P, N = attack.size, bona.size
    FN = int(np.sum(attack < threshold))
    FP = int(np.sum(bona >= threshold))
    apcer = FN / P if P else None
    bpcer = FP / N if N else None
    acer = 0.5 * (apcer + bpcer) if P and N else None
    return PointMetrics(apcer, bpcer, acer, P, N, FP, FN)


def _require_both(scores):
    if scores.attack_scores.size == 0 or scores.bona_fide_scores.size == 0:
        raise DataError("both attack and bona fide samples are required")


def roc(scores):
    """Operating points ``(threshold, apcer, bpcer)`` by increasing threshold.

    One point per distinct score plus the sentinels -inf (everything called an
    attack) and +inf (nothing called an attack).
    """
    _require_both(scores)
    attack = np.sort(scores.attack_scores)
    bona = np.sort(scores.bona_fide_scores)
    P, N = attack.size, bona.size
    thresholds = np.concatenate(([-math.inf], np.unique(scores.scores), [math.inf]))
    fn = np.searchsorted(attack, thresholds, side="left")
    fp = N - np.searchsorted(bona, thresholds, side="left")
    return [(float(t), int(a) / P, int(b) / N) for t, a, b in zip(thresholds, fn, fp)]


def bpcer_at_apcer(roc_points, target=APCER_TARGET):
    """Smallest BPCER among operating points with APCER <= target; 1.0 if none."""
    eligible = [b for _, a, b in roc_points if a <= target]
    return min(eligible) if eligible else 1.0


def tpr_at_bpcer(roc_points, max_bpcer):
    """Largest attack detection rate (1 - APCER) among points with BPCER <= ``max_bpcer``."""
    eligible = [1.0 - a for _, a, b in roc_points if b <= max_bpcer]
    return max(eligible) if eligible else 0.0


def auc(scores):
    """Probability that an attack outscores a bona fide sample, ties counting half."""
    _require_both(scores)
    attack = scores.attack_scores
    bona = np.sort(scores.bona_fide_scores)
    below = np.searchsorted(bona, attack, side="left")
    at_or_below = np.searchsorted(bona, attack, side="right")
    doubled = 2 * int(below.sum()) + int((at_or_below - below).sum())
    return doubled / (2 * attack.size * bona.size)


@dataclass
class MetricsReport:
    apcer: Optional[float]
    bpcer: Optional[float]
    acer: Optional[float]
    bpcer20: Optional[float]
    auc: Optional[float]
    threshold: float
    P: int
    N: int
    FP: int
    FN: int
    roc: list = field(default_factory=list)

    def to_json(self):
        d = asdict(self)
        d["roc"] = [[_finite_or_str(t), a, b] for t, a, b in self.roc]
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["roc"] = [(float(t), a, b) for t, a, b in d.get("roc", [])]
        return cls(**d)


def _finite_or_str(x):
    # JSON has no infinity literal
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def evaluate(scores, threshold=0.5):
    pm = point_metrics(scores, threshold)
    if pm.P and pm.N:
        points = roc(scores)
        b20, area = bpcer_at_apcer(points), auc(scores)
    else:
        points, b20, area = [], None, None
    return MetricsReport(pm.apcer, pm.bpcer, pm.acer, b20, area, threshold,
                         pm.P, pm.N, pm.FP, pm.FN, points)


def write_roc_csv(roc_points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "apcer", "bpcer"])
        for t, a, b in roc_points:
            writer.writerow([repr(float(t)), repr(a), repr(b)])


def read_roc_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(float(r["threshold"]), float(r["apcer"]), float(r["bpcer"])) for r in rows]


def roc_step(roc_points, grid=ROC_GRID):
    """BPCER reachable at each APCER grid value (step function, no interpolation)."""
    pts = np.array([(a, b) for _, a, b in roc_points])
    out = np.empty(len(grid))
    for i, g in enumerate(grid):
        ok = pts[:, 1][pts[:, 0] <= g + 1e-12]
        out[i] = ok.min() if ok.size else 1.0
    return out


def aggregate_folds(reports):
    """Population mean/std of each metric over folds plus a grid-averaged ROC.

    Undefined (None) values are left out of the mean and counted under
    ``excluded``.
    """
    if not reports:
        raise DataError("no fold reports to aggregate")
    summary = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports]
        used = [v for v in values if v is not None]
        summary[name] = {
            "mean": float(np.mean(used)) if used else None,
            "std": float(np.std(used)) if used else None,
            "n": len(used),
            "excluded": len(values) - len(used),
        }
    curves = [roc_step(r.roc) for r in reports if r.roc]
    summary["averaged_roc"] = {
        "apcer": ROC_GRID.tolist(),
        "bpcer": np.mean(curves, axis=0).tolist() if curves else None,
    }
    summary["n_folds"] = len(reports)
    return summary
