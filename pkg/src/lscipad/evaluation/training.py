"""Patch-level training with validation-loss model selection, and sample scoring."""

import functools
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ..architectures import ArchKind, forward_scores
from ..data.preprocess import preprocess
from ..errors import ConfigError, DataError, NumericError
from ..nn.functional import bce_loss
from ..nn.optim import adam_step
from ..patching import PatchBatch, PatchSpec, aggregate, patchify, view_for
from .metrics import ScoreSet

log = logging.getLogger(__name__)

SCORE_CHUNK = 256


@dataclass
class TrainConfig:
    arch: str = ArchKind.LSTM.value
    patch: PatchSpec = field(default_factory=lambda: PatchSpec(8, 8, 100))
    lr: float = 2e-4
    epochs: int = 50
    batch: int = 64
    seed: int = 0
    oversample_attacks: bool = False

    def __post_init__(self):
        self.arch = ArchKind.parse(self.arch).value
        if isinstance(self.patch, dict):
            self.patch = PatchSpec(**self.patch)
        if not (self.lr > 0 and self.epochs >= 1 and self.batch >= 1):
            raise ConfigError(f"lr, epochs and batch must be positive: {self}")

    def to_json(self):
        return asdict(self)


class SampleData:
    """Patch access for the samples of a manifest, memoised per (sample, spec)."""

    def __init__(self, manifest, cache_size=4096):
        self.manifest = manifest
        self._patches = functools.lru_cache(maxsize=cache_size)(self._load_patches)

    def _load_patches(self, sample_id, spec):
        clip = preprocess(self.manifest.load(sample_id), spec.t, spec.offset)
        return patchify(clip, spec, sample_id)

    def patches(self, sample_id, spec):
        return self._patches(sample_id, spec)

    def label(self, sample_id):
        return int(self.manifest.meta(sample_id).is_attack)

    def patch_set(self, sample_ids, spec):
        """Stacked patches of ``sample_ids`` (sorted) and their inherited labels."""
        ids = sorted(sample_ids)
        if not ids:
            return np.zeros((0, spec.t, spec.h, spec.w), np.float32), np.zeros(0, np.float32)
        batches = [self.patches(s, spec) for s in ids]
        x = np.concatenate([b.patches for b in batches])
        y = np.concatenate([np.full(len(b), self.label(s), np.float32) for s, b in zip(ids, batches)])
        return x, y


def view_array(kind, patches):
    return view_for(kind, PatchBatch(patches, [None] * len(patches)))


def select_best_epoch(losses):
    """Index of the first minimum."""
    return int(np.argmin(losses))


def _mean_loss(net, kind, x, y):
    total = 0.0
    for i in range(0, len(x), SCORE_CHUNK):
        scores = forward_scores(net, view_array(kind, x[i:i + SCORE_CHUNK]))
        loss, _ = bce_loss(scores, y[i:i + SCORE_CHUNK])
        total += loss * len(scores)
    return total / len(x)


def _oversample(x, y, rng):
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if not len(pos) or len(pos) >= len(neg):
        return x, y
    reps, extra = divmod(len(neg), len(pos))
    idx = np.concatenate([neg, np.tile(pos, reps), rng.choice(pos, extra, replace=False)])
    return x[idx], y[idx]


def train(net, split, data, cfg):
    """Fit ``net`` on ``split.train`` and keep the weights with the lowest validation loss.

    Returns ``(net, history)``; ``history["best_epoch"]`` is 1-based.
    """
    kind = net.kind.value
    spec = cfg.patch
    x_tr, y_tr = data.patch_set(split.train, spec)
    x_va, y_va = data.patch_set(split.val, spec)
    if not len(x_tr):
        raise DataError("empty training split")
    if not len(x_va):
        warnings.warn("empty validation split; selecting the snapshot on training loss")
    for name, y in (("train", y_tr), ("val", y_va)):
        if len(y) and len(np.unique(y)) < 2:
            warnings.warn(f"{name} split does not contain both classes")
    rng = np.random.default_rng([cfg.seed, 1])
    if cfg.oversample_attacks:
        x_tr, y_tr = _oversample(x_tr, y_tr, rng)

    params = net.params()
    history = {"train_loss": [], "val_loss": []}
    best, best_state = np.inf, None
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_tr))
        total = 0.0
        for b, start in enumerate(range(0, len(order), cfg.batch)):
            idx = order[start:start + cfg.batch]
            scores = forward_scores(net, view_array(kind, x_tr[idx]))
            loss, grad = bce_loss(scores, y_tr[idx])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch {b + 1}")
            net.backward(grad.astype(scores.dtype))
            try:
                adam_step(params, cfg.lr)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch + 1}, batch {b + 1}: {exc}") from None
            total += loss * len(idx)
        train_loss = total / len(order)
        val_loss = _mean_loss(net, kind, x_va, y_va) if len(x_va) else train_loss
        history["train_loss"].append(train_loss)
        history["val_loss"].append(val_loss)
        log.debug("epoch %d train %.4f val %.4f", epoch + 1, train_loss, val_loss)
        if val_loss < best:
            best, best_state = val_loss, net.state()
    net.load_state(best_state)
    history["best_epoch"] = select_best_epoch(history["val_loss"]) + 1
    return net, history


def score_samples(net, sample_ids, data, spec):
    """Mean patch score per sample, ordered by sample id."""
    ids = sorted(sample_ids)
    kind = net.kind.value
    scores = []
    for s in ids:
        patches = data.patches(s, spec).patches
        out = np.concatenate([forward_scores(net, view_array(kind, patches[i:i + SCORE_CHUNK]))
                              for i in range(0, len(patches), SCORE_CHUNK)])
        scores.append(aggregate(out.astype(np.float64))[0])
    return ScoreSet(ids, [data.label(s) for s in ids], scores)
