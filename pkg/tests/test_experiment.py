import csv
import json
import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest

from lscipad import cli, experiment
from lscipad.errors import ConfigError, NumericError
from lscipad.experiment import ExperimentConfig, Run, evaluate_run, job_id, run_experiment

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def _config(tmp_path, manifest, name="exp.json", **kw):
    cfg = {"manifest": str(manifest), "archs": ["Lstm"], "spatial": [8], "temporal": [5],
           "epochs": 2, "batch": 16, **kw}
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path


# ---- config -----------------------------------------------------------------------

def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"manifest": "m", "spatial": []})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"manifest": "m", "learning_rate": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"archs": ["Lstm"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"manifest": "m", "archs": ["VGG"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"manifest": "m", "lr": -1})
    cfg = ExperimentConfig.from_dict({"manifest": "m", "archs": "basen", "spatial": [8, 64]})
    assert cfg.archs == ["BaseN"]
    assert len(cfg.settings()) == 2


def test_output_root_from_environment(tmp_path, monkeypatch, tiny_dataset):
    monkeypatch.setenv(experiment.OUTPUT_ROOT_ENV, str(tmp_path / "envroot"))
    run = Run.create(_config(tmp_path, tiny_dataset))
    assert run.path.parent == tmp_path / "envroot"
    assert run.path.name.endswith("-train")


# ---- sweeps ----------------------------------------------------------------------------

def test_single_setting_sweep_counts(tmp_path, tiny_dataset):
    cfg_path = _config(tmp_path, tiny_dataset)
    run = Run.create(cfg_path, root=tmp_path / "runs")
    summary = run_experiment(run)
    assert summary["failed"] == {} and len(summary["done"]) == 3
    assert sorted(p.name for p in (run.path / "jobs").iterdir()) == [job_id("Lstm", 8, 8, 5, f) for f in range(3)]
    aggs = list((run.path / "aggregates").iterdir())
    assert len(aggs) == 1
    agg = json.loads(aggs[0].read_text())
    assert agg["n_folds"] == 3 and agg["complete"]
    # snapshot is the input file byte for byte, also inside each record
    assert (run.path / "config.json").read_bytes() == cfg_path.read_bytes()
    rec = run.record(job_id("Lstm", 8, 8, 5, 0))
    assert rec["config_snapshot"].encode() == cfg_path.read_bytes()
    assert set(rec) >= {"metrics", "wall_clock", "version", "history"}
    for f in ("record.json", "roc.csv", "scores.json", "weights.lscw"):
        assert (run.job_dir(rec["job"]) / f).exists()


def test_weights_reproduce_scores(tmp_path, tiny_dataset):
    run = Run.create(_config(tmp_path, tiny_dataset, archs=["BaseN"]), root=tmp_path / "runs")
    run_experiment(run)
    results = evaluate_run(run)
    assert len(results) == 3 and all(r["identical_scores"] for r in results.values())
    for jid, r in results.items():
        assert r["metrics"] == run.record(jid)["metrics"]


def test_record_re_execution_is_byte_identical(tmp_path, tiny_dataset):
    run = Run.create(_config(tmp_path, tiny_dataset), overrides={"seed": 4}, root=tmp_path / "runs")
    run_experiment(run)
    rec = run.record(job_id("Lstm", 8, 8, 5, 1))
    again = Run.from_record(rec, root=tmp_path / "rerun")
    assert again.config.seed == 4
    run_experiment(again)
    for f in range(3):
        jid = job_id("Lstm", 8, 8, 5, f)
        assert json.dumps(again.record(jid)["metrics"]) == json.dumps(run.record(jid)["metrics"])


def test_failed_job_is_recorded_and_run_continues(tmp_path, tiny_dataset, monkeypatch):
    real = experiment.train

    def flaky(net, split, data, cfg):
        if net.geometry[2] == 10:
            raise NumericError("non-finite loss at epoch 1, batch 1")
        return real(net, split, data, cfg)

    monkeypatch.setattr(experiment, "train", flaky)
    cfg = _config(tmp_path, tiny_dataset, temporal=[5, 10])
    code = cli.main(["--output-root", str(tmp_path / "runs"), "train", "--config", str(cfg)])
    assert code == 3
    run = Run(next((tmp_path / "runs").iterdir()))
    ledger = run.ledger()
    assert sum(e["status"] == "failed" for e in ledger.values()) == 3
    assert sum(e["status"] == "done" for e in ledger.values()) == 3

    # a resumed run retries only the failed jobs
    monkeypatch.setattr(experiment, "train", real)
    summary = run_experiment(run)
    assert len(summary["skipped"]) == 3 and len(summary["done"]) == 3


def test_fail_fast_stops(tmp_path, tiny_dataset, monkeypatch):
    def broken(*a, **k):
        raise NumericError("boom")

    monkeypatch.setattr(experiment, "train", broken)
    run = Run.create(_config(tmp_path, tiny_dataset, temporal=[5, 10]), root=tmp_path / "runs")
    with pytest.raises(NumericError):
        run_experiment(run, fail_fast=True)
    assert len(run.ledger()) < 6


def test_parallel_workers_match_serial(tmp_path, tiny_dataset):
    runs = []
    for workers in (1, 3):
        run = Run.create(_config(tmp_path, tiny_dataset, name=f"w{workers}.json", workers=workers),
                         root=tmp_path / f"runs{workers}")
        run_experiment(run)
        runs.append(run)
    for f in range(3):
        jid = job_id("Lstm", 8, 8, 5, f)
        assert runs[0].record(jid)["metrics"] == runs[1].record(jid)["metrics"]


# ---- report -------------------------------------------------------------------------------

def test_report_rows_gaps_and_best(tmp_path, tiny_dataset):
    run = Run.create(_config(tmp_path, tiny_dataset, temporal=[5, 6]), root=tmp_path / "runs")
    run_experiment(run)
    # forget one job, as if it never ran
    missing = job_id("Lstm", 8, 8, 6, 2)
    lines = [l for l in (run.path / "ledger.jsonl").read_text().splitlines() if missing not in l]
    (run.path / "ledger.jsonl").write_text("\n".join(lines) + "\n")
    experiment.write_aggregates(run, 3)

    text = experiment.write_report(run)
    with open(run.path / "report_jobs.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    gap = next(r for r in rows if r["job"] == missing)
    assert gap["acer"] == "" and gap["auc"] == "" and gap["status"] == "missing"
    done = [r for r in rows if r["status"] == "done"]
    assert len(done) == 5 and all(r["acer"] != "" for r in done)
    assert sum(r["best"] == "True" for r in rows) == 1
    best = min(done, key=lambda r: float(r["acer"]))
    assert next(r for r in rows if r["best"] == "True")["acer"] == best["acer"]
    with open(run.path / "report_settings.csv") as fh:
        settings = list(csv.DictReader(fh))
    assert [s["folds_done"] for s in settings] == ["3", "2"]
    assert sum(s["best"] == "True" for s in settings) == 1
    assert "*best" in text and missing in text


def test_report_without_plan_is_data_error(tmp_path, tiny_dataset):
    run = Run.create(_config(tmp_path, tiny_dataset), root=tmp_path / "runs")
    assert cli.main(["report", str(run.path)]) == 2


# ---- resume after a hard kill ---------------------------------------------------------------

def _lscipad(*args):
    return [sys.executable, "-m", "lscipad", *args]


def test_killed_run_resumes_from_ledger(tmp_path, tiny_dataset):
    cfg = _config(tmp_path, tiny_dataset, temporal=[5, 10], epochs=15)
    env = dict(os.environ, LSCIPAD_OUTPUT_ROOT=str(tmp_path / "runs"))
    proc = subprocess.Popen(_lscipad("train", "--config", str(cfg)), env=env,
                            stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    run_dir = Path(proc.stdout.readline().strip())
    ledger = run_dir / "ledger.jsonl"
    deadline = time.time() + 120
    while time.time() < deadline:
        if ledger.exists() and len(ledger.read_text().splitlines()) >= 2:
            break
        if proc.poll() is not None:
            break
        time.sleep(0.02)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    finished_before = Run(run_dir).completed()
    assert 2 <= len(finished_before) < 6, "the run should have been interrupted mid-sweep"
    kept = {j: (run_dir / "jobs" / j / "record.json").read_bytes() for j in finished_before}

    out = subprocess.run(_lscipad("train", "--resume", str(run_dir)), env=env,
                         capture_output=True, text=True, check=True).stdout
    assert f"{len(finished_before)} resumed" in out
    run = Run(run_dir)
    assert len(run.completed()) == 6
    for j, raw in kept.items():
        assert (run_dir / "jobs" / j / "record.json").read_bytes() == raw

    # identical to a run that was never interrupted
    clean = Run.create(cfg, root=tmp_path / "clean")
    run_experiment(clean)
    for j in run.completed():
        assert run.record(j)["metrics"] == clean.record(j)["metrics"]
