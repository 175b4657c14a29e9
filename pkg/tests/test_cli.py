import os
import json

import pytest

from lscipad import cli
from lscipad.data import Manifest, Species
from lscipad.evaluation import FoldPlan, plan_violations

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def test_synth_defaults_match_desk_dataset(tmp_path, capsys):
    out = tmp_path / "missing" / "ds"
    assert cli.main(["synth", "--out", str(out), "--bona-fide", "20", "--geometry", "4", "4", "3"]) == 0
    m = Manifest.load_file(out / "manifest.json")
    counts = m.class_counts()
    assert counts["BonaFide"] == 20
    assert {k: v for k, v in counts.items() if k != "BonaFide"} == {
        "ConductivePaper": 11, "ConductiveSilicone": 62, "Transparency": 26,
        "SiliconeI": 13, "SiliconeII": 79, "DragonSkin": 27}
    assert str(out / "manifest.json") in capsys.readouterr().out


def test_synth_rerun_same_seed_identical_manifest(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"counts": {"BonaFide": 3, "Transparency": 2}, "subjects": 2,
                               "geometry": [4, 4, 3], "seed": 9}))
    for d in ("a", "b"):
        assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_synth_under_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("LSCIPAD_OUTPUT_ROOT", str(tmp_path / "root"))
    assert cli.main(["synth", "--bona-fide", "1", "--geometry", "2", "2", "2"]) == 0
    (run,) = (tmp_path / "root").iterdir()
    assert run.name.endswith("-synth") and (run / "dataset" / "manifest.json").exists()


def test_synth_capacity_error_exit_code(tmp_path, capsys):
    assert cli.main(["synth", "--out", str(tmp_path), "--subjects", "1", "--geometry", "2", "2", "2"]) == 1
    assert "capacity" in capsys.readouterr().err


def test_synth_bad_config(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text('{"colour": 1}')
    assert cli.main(["synth", "--config", str(cfg)]) == 1
    cfg.write_text("{not json")
    assert cli.main(["synth", "--config", str(cfg)]) == 1


def test_split_loao_and_kfold(tmp_path, tiny_dataset):
    loao = tmp_path / "loao.json"
    assert cli.main(["split", "--manifest", str(tiny_dataset), "--strategy", "LOAO", "--out", str(loao)]) == 0
    plan = FoldPlan.load(loao)
    m = Manifest.load_file(tiny_dataset)
    species = {x.species for x in m.metas if x.species is not None}
    assert len(plan.folds) == len(species) and plan_violations(plan, m) == []
    again = tmp_path / "again.json"
    cli.main(["split", "--manifest", str(tiny_dataset), "--strategy", "loao", "--out", str(again)])
    assert again.read_bytes() == loao.read_bytes()

    kf = tmp_path / "kf.json"
    assert cli.main(["split", "--manifest", str(tiny_dataset), "--seed", "3", "--out", str(kf)]) == 0
    assert plan_violations(FoldPlan.load(kf), m) == []


def test_exit_codes(tmp_path, tiny_dataset):
    assert cli.main(["split", "--manifest", str(tiny_dataset), "--strategy", "bogus"]) == 1
    assert cli.main(["split", "--manifest", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad_manifest.json"
    bad.write_text("[1, 2")
    assert cli.main(["split", "--manifest", str(bad)]) == 2
    assert cli.main(["train"]) == 1
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"manifest": str(tmp_path / "absent.json")}))
    assert cli.main(["--output-root", str(tmp_path / "r"), "train", "--config", str(cfg)]) == 1
    assert cli.main(["eval", str(tmp_path)]) == 1


def test_train_eval_report_roundtrip(tmp_path, tiny_dataset, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"manifest": str(tiny_dataset), "archs": ["BaseN"], "spatial": [8],
                               "temporal": [4], "epochs": 1, "strategy": "LOAO"}))
    root = tmp_path / "runs"
    assert cli.main(["--output-root", str(root), "train", "--config", str(cfg), "--seed", "2", "--batch", "32"]) == 0
    (run_dir,) = root.iterdir()
    meta = json.loads((run_dir / "run.json").read_text())
    assert meta["overrides"] == {"seed": 2, "batch": 32}
    capsys.readouterr()
    assert cli.main(["eval", str(run_dir)]) == 0
    assert "identical=True" in capsys.readouterr().out
    assert cli.main(["report", str(run_dir)]) == 0
    text = capsys.readouterr().out
    assert "BaseN_h8w8t4" in text
    assert len(FoldPlan.load(run_dir / "plan.json").folds) == 4
    # overrides and --resume do not mix
    assert cli.main(["train", "--resume", str(run_dir), "--seed", "1"]) == 1


def test_relative_manifest_resolves_against_config(tmp_path, tiny_dataset):
    sub = tmp_path / "cfgdir"
    sub.mkdir()
    (sub / "exp.json").write_text(json.dumps({
        "manifest": os.path.relpath(tiny_dataset, sub),
        "epochs": 1, "temporal": [4]}))
    assert cli.main(["--output-root", str(tmp_path / "runs"), "train", "--config", str(sub / "exp.json")]) == 0


def test_species_enum_is_closed():
    assert len(Species) == 6
