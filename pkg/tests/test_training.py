import warnings

import numpy as np
import pytest

from lscipad.architectures import build, forward_scores
from lscipad.errors import ConfigError, DataError, NumericError
from lscipad.evaluation import SampleData, Split, TrainConfig, kfold_plan, score_samples, select_best_epoch, train
from lscipad.evaluation import training
from lscipad.patching import PatchSpec, to_2d_view


class ToyData:
    """Two 4x4x3 patches: a flat one (bona fide) and a checkerboard (attack)."""

    def __init__(self, nan=False):
        flat = np.full((3, 4, 4), 0.3, np.float32)
        checker = np.indices((3, 4, 4)).sum(axis=0) % 2
        self.x = {"bona": flat, "att": checker.astype(np.float32)}
        if nan:
            self.x["att"][0, 0, 0] = np.nan
        self.y = {"bona": 0, "att": 1}

    def patch_set(self, ids, spec):
        ids = sorted(ids)
        if not ids:
            return np.zeros((0, 3, 4, 4), np.float32), np.zeros(0, np.float32)
        return np.stack([self.x[i] for i in ids]), np.array([self.y[i] for i in ids], np.float32)

    def label(self, sample_id):
        return self.y[sample_id]


TOY_SPLIT = Split({"bona", "att"}, set(), set())

pytestmark = pytest.mark.filterwarnings("ignore:empty validation split", "ignore:val split does not")


def _toy_cfg(**kw):
    return TrainConfig(**{"arch": "BaseN", "patch": PatchSpec(4, 4, 3), "lr": 1e-3, "epochs": 5,
                          "batch": 2, "seed": 0, **kw})


def test_train_config_defaults_and_validation():
    cfg = TrainConfig()
    assert (cfg.lr, cfg.epochs, cfg.batch, cfg.oversample_attacks) == (2e-4, 50, 64, False)
    with pytest.raises(ConfigError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)
    assert TrainConfig(patch={"h": 8, "w": 8, "t": 5}).patch == PatchSpec(8, 8, 5)


def test_toy_loss_decreases_monotonically():
    net, hist = train(build("BaseN", 4, 4, 3, seed=0), TOY_SPLIT, ToyData(), _toy_cfg())
    losses = hist["train_loss"]
    assert len(losses) == 5
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_identical_seeds_identical_history():
    runs = [train(build("BaseN", 4, 4, 3, seed=0), TOY_SPLIT, ToyData(), _toy_cfg())[1] for _ in range(2)]
    assert runs[0] == runs[1]


def test_select_best_epoch_first_minimum():
    assert select_best_epoch([0.5, 0.3, 0.4]) == 1
    assert select_best_epoch([0.3, 0.2, 0.2]) == 1


def test_snapshot_of_best_epoch_is_returned(monkeypatch):
    losses = iter([0.5, 0.3, 0.4])
    states = []

    def fake_val(net, kind, x, y):
        states.append(net.state())
        return next(losses)

    monkeypatch.setattr(training, "_mean_loss", fake_val)
    split = Split({"bona", "att"}, {"bona", "att"}, set())
    net, hist = train(build("BaseN", 4, 4, 3), split, ToyData(), _toy_cfg(epochs=3))
    assert hist["best_epoch"] == 2
    for name, value in net.state().items():
        assert np.array_equal(value, states[1][name])
        assert not np.array_equal(value, states[2][name]) or name.endswith("bias")


def test_non_finite_loss_reports_context():
    with pytest.raises(NumericError, match="epoch 1, batch 1"):
        train(build("BaseN", 4, 4, 3), TOY_SPLIT, ToyData(nan=True), _toy_cfg())


def test_empty_training_split():
    with pytest.raises(DataError):
        train(build("BaseN", 4, 4, 3), Split(set(), set(), {"att"}), ToyData(), _toy_cfg())


def test_single_class_split_warns():
    with pytest.warns(UserWarning, match="both classes"):
        train(build("BaseN", 4, 4, 3), Split({"att"}, set(), set()), ToyData(), _toy_cfg(epochs=1))


def test_oversampling_balances_classes():
    x = np.arange(10, dtype=np.float32)[:, None]
    y = np.array([0] * 7 + [1] * 3, np.float32)
    xo, yo = training._oversample(x, y, np.random.default_rng(0))
    assert (yo == 0).sum() == (yo == 1).sum() == 7
    assert set(xo[yo == 1, 0].tolist()) == {7.0, 8.0, 9.0}


def test_score_samples_one_patch_equals_patch_score(tiny_manifest):
    data = SampleData(tiny_manifest)
    spec = PatchSpec(32, 32, 5)     # full frame of the 32x32 captures
    net = build("BaseN", 32, 32, 5, seed=2)
    ids = tiny_manifest.sample_ids[:4]
    ss = score_samples(net, ids, data, spec)
    assert ss.sample_ids == sorted(ids)
    for sid, score in zip(ss.sample_ids, ss.scores):
        patches = data.patches(sid, spec)
        assert len(patches) == 1
        assert score == float(forward_scores(net, to_2d_view(patches))[0])
    assert np.all((ss.scores >= 0) & (ss.scores <= 1))
    again = score_samples(net, list(reversed(ids)), data, spec)
    assert again.scores.tobytes() == ss.scores.tobytes()


def test_patch_labels_inherit_sample_label(tiny_manifest):
    data = SampleData(tiny_manifest)
    spec = PatchSpec(8, 8, 4)
    ids = tiny_manifest.sample_ids[:3]
    x, y = data.patch_set(ids, spec)
    assert x.shape == (3 * 16, 4, 8, 8)
    for i, sid in enumerate(sorted(ids)):
        assert set(y[16 * i:16 * (i + 1)].tolist()) == {float(tiny_manifest.meta(sid).is_attack)}


def test_train_on_real_split_is_deterministic(tiny_manifest):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        split = kfold_plan(tiny_manifest, seed=0).folds[0]
    cfg = TrainConfig("Lstm", PatchSpec(8, 8, 6), lr=1e-3, epochs=2, batch=16, seed=5)
    out = []
    for _ in range(2):
        net, hist = train(build("Lstm", 8, 8, 6, seed=5), split, SampleData(tiny_manifest), cfg)
        out.append((hist, score_samples(net, split.test, SampleData(tiny_manifest), cfg.patch).scores.tobytes()))
    assert out[0] == out[1]
