"""Fold planners: subject-disjoint k-fold and leave-one-attack-out."""

import enum
import json
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data.sample import Label, Species
from ..errors import ConfigError, FormatError

# bona fide (train, test, val) fractions observed in the reference LOAO table
LOAO_BONAFIDE_FRACS = (0.929, 0.021, 0.050)
LOAO_ATTACK_VAL_FRAC = 0.07


class Strategy(str, enum.Enum):
    THREE_FOLD = "ThreeFold"
    LOAO = "LOAO"

    @classmethod
    def parse(cls, value):
        v = str(value).lower().replace("-", "").replace("_", "")
        if v in ("threefold", "kfold", "3fold"):
            return cls.THREE_FOLD
        if v == "loao":
            return cls.LOAO
        raise ConfigError(f"unknown partition strategy {value!r}")


@dataclass
class Split:
    train: set
    val: set
    test: set
    held_out_species: Optional[Species] = None

    def to_json(self):
        return {
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
            "held_out_species": self.held_out_species.value if self.held_out_species else None,
        }

    @classmethod
    def from_json(cls, d):
        species = d.get("held_out_species")
        return cls(set(d["train"]), set(d["val"]), set(d["test"]), Species(species) if species else None)


@dataclass
class FoldPlan:
    strategy: Strategy
    seed: int
    folds: list = field(default_factory=list)

    def to_json(self):
        return {"strategy": self.strategy.value, "seed": self.seed,
                "folds": [f.to_json() for f in self.folds]}

    @classmethod
    def from_json(cls, d):
        try:
            return cls(Strategy(d["strategy"]), int(d["seed"]), [Split.from_json(f) for f in d["folds"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad fold plan: {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _metas(manifest):
    return manifest.metas if hasattr(manifest, "metas") else list(manifest)


def _class_order(metas):
    present = {m.class_name for m in metas}
    return [Label.BONA_FIDE.value] + [s.value for s in Species if s.value in present]


def greedy_bins(units, fracs):
    """Assign count vectors ``units`` to bins with target shares ``fracs``.

    Each unit goes to the bin with the smallest increase of
    ``sum_b sum_c load[b, c]**2 / (frac_b * total_c**2)``, whose minimiser
    over real-valued loads is ``load[b, c] = frac_b * total_c`` for every
    class.  Units are visited in the given order; ties go to the lowest bin.
    """
    units = np.asarray(units, dtype=np.float64)
    fracs = np.asarray(fracs, dtype=np.float64)
    totals = np.maximum(units.sum(axis=0), 1.0)
    load = np.zeros((len(fracs), units.shape[1]))
    out = []
    for u in units:
        cost = ((u * (2 * load + u)) / totals ** 2).sum(axis=1) / fracs
        b = int(np.argmin(cost))
        load[b] += u
        out.append(b)
    return out


def _subject_table(metas, classes):
    by_subject = defaultdict(list)
    for m in metas:
        by_subject[m.subject_id].append(m)
    col = {c: i for i, c in enumerate(classes)}
    table = {}
    for subj, ms in by_subject.items():
        v = np.zeros(len(classes))
        for m in ms:
            v[col[m.class_name]] += 1
        table[subj] = v
    return by_subject, table


def _balanced_order(subjects, table, totals, rng):
    """Shuffle, then put subjects carrying the largest class shares first."""
    shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
    weight = {s: float((table[s] / totals).sum()) for s in shuffled}
    return sorted(shuffled, key=lambda s: -weight[s])


def kfold_plan(manifest, k=3, val_frac=0.2, seed=0):
    """Subject-disjoint k-fold plan with a subject-disjoint validation carve-out."""
    metas = _metas(manifest)
    classes = _class_order(metas)
    by_subject, table = _subject_table(metas, classes)
    subjects = sorted(by_subject)
    if k < 2 or len(subjects) < k:
        raise ConfigError(f"k-fold needs k >= 2 and at least k subjects (k={k}, subjects={len(subjects)})")
    if not 0 < val_frac < 1:
        raise ConfigError("val_frac must lie in (0, 1)")
    for c, name in enumerate(classes):
        n_subj = sum(1 for s in subjects if table[s][c] > 0)
        if n_subj < k:
            warnings.warn(f"class {name} spans only {n_subj} subjects; some test folds will lack it")

    totals = np.maximum(np.sum([table[s] for s in subjects], axis=0), 1.0)
    rng = np.random.default_rng(seed)
    order = _balanced_order(subjects, table, totals, rng)
    bins = greedy_bins([table[s] for s in order], [1.0 / k] * k)

    folds = []
    for i in range(k):
        test_subj = [s for s, b in zip(order, bins) if b == i]
        pool = [s for s, b in zip(order, bins) if b != i]
        carve = greedy_bins([table[s] for s in pool], [1.0 - val_frac, val_frac])
        ids = {name: set() for name in ("train", "val", "test")}
        for s in test_subj:
            ids["test"].update(m.sample_id for m in by_subject[s])
        for s, b in zip(pool, carve):
            ids["val" if b else "train"].update(m.sample_id for m in by_subject[s])
        folds.append(Split(ids["train"], ids["val"], ids["test"]))
    return FoldPlan(Strategy.THREE_FOLD, seed, folds)


def _split_counts(n, fracs):
    """Round each non-first share, give the remainder to the first."""
    rest = [int(round(n * f)) for f in fracs[1:]]
    return [n - sum(rest)] + rest


def loao_plan(manifest, bonafide_fracs=LOAO_BONAFIDE_FRACS, attack_val_frac=LOAO_ATTACK_VAL_FRAC, seed=0):
    """One fold per attack species, which goes entirely to the test set.

    Bona fide samples are split once into (train, test, val) by
    ``bonafide_fracs`` and reused in every fold.  Each remaining species is
    split once into train/val by ``attack_val_frac``.
    """
    metas = _metas(manifest)
    if len(bonafide_fracs) != 3 or min(bonafide_fracs) < 0 or abs(sum(bonafide_fracs) - 1) > 1e-6:
        raise ConfigError(f"bonafide_fracs must be three shares summing to 1, got {bonafide_fracs}")
    if not 0 <= attack_val_frac < 1:
        raise ConfigError("attack_val_frac must lie in [0, 1)")
    rng = np.random.default_rng(seed)

    bona = sorted(m.sample_id for m in metas if not m.is_attack)
    bona = [bona[i] for i in rng.permutation(len(bona))]
    n_tr, n_te, n_va = _split_counts(len(bona), (bonafide_fracs[0], bonafide_fracs[1], bonafide_fracs[2]))
    bona_train, bona_test, bona_val = bona[:n_tr], bona[n_tr:n_tr + n_te], bona[n_tr + n_te:]

    per_species = {}
    for sp in Species:
        ids = sorted(m.sample_id for m in metas if m.species is sp)
        if not ids:
            continue
        ids = [ids[i] for i in rng.permutation(len(ids))]
        n_val = int(round(len(ids) * attack_val_frac))
        per_species[sp] = (ids, ids[n_val:], ids[:n_val])
    if len(per_species) < 2:
        raise ConfigError("leave-one-attack-out needs at least two attack species")

    folds = []
    for held in per_species:
        train, val = set(bona_train), set(bona_val)
        for sp, (_, tr, va) in per_species.items():
            if sp is not held:
                train.update(tr)
                val.update(va)
        test = set(bona_test) | set(per_species[held][0])
        folds.append(Split(train, val, test, held))
    return FoldPlan(Strategy.LOAO, seed, folds)


def plan_violations(plan, manifest):
    """Every broken invariant of ``plan`` against ``manifest``, as messages."""
    metas = {m.sample_id: m for m in _metas(manifest)}
    all_ids = set(metas)
    problems = []
    for i, f in enumerate(plan.folds):
        if f.train & f.val or f.train & f.test or f.val & f.test:
            problems.append(f"fold {i}: train/val/test overlap")
        if f.train | f.val | f.test != all_ids:
            problems.append(f"fold {i}: splits do not cover the manifest")
        if plan.strategy is Strategy.THREE_FOLD:
            subj = {name: {metas[s].subject_id for s in ids if s in metas}
                    for name, ids in (("train", f.train), ("val", f.val), ("test", f.test))}
            if (subj["train"] | subj["val"]) & subj["test"]:
                problems.append(f"fold {i}: subject spans train/val and test")
            if subj["train"] & subj["val"]:
                problems.append(f"fold {i}: subject spans train and val")
        else:
            held = f.held_out_species
            leaked = [s for s in f.train | f.val if s in metas and metas[s].species is held]
            if held is None or leaked:
                problems.append(f"fold {i}: held-out species present in train/val")
    if plan.strategy is Strategy.THREE_FOLD and plan.folds:
        tests = [f.test for f in plan.folds]
        if set().union(*tests) != all_ids or sum(len(t) for t in tests) != len(all_ids):
            problems.append("test sets are not a partition of the manifest")
    return problems


def split_class_counts(split, manifest):
    """Per-class sample counts of each part of ``split``."""
    metas = {m.sample_id: m for m in _metas(manifest)}
    out = {}
    for name in ("train", "test", "val"):
        counts = defaultdict(int)
        for s in getattr(split, name):
            counts[metas[s].class_name] += 1
        out[name] = dict(counts)
    return out
