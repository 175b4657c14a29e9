"""Experiment sweeps: config handling, run directories, job scheduling and reports.

A run directory looks like::

    <root>/<YYYYmmdd-HHMMSS>-train/
        config.json        byte copy of the input config
        run.json           overrides, config location, toolkit version
        plan.json          the fold plan every job uses
        ledger.jsonl       one line per finished (or failed) job
        jobs/<job>/        record.json, roc.csv, scores.json, weights.lscw
        aggregates/<cfg>.json
"""

import csv
import json
import logging
import os
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, as_completed, wait
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from pathlib import Path

from . import __version__
from .architectures import ArchKind, build
from .data.manifest import Manifest
from .errors import ConfigError, DataError, LsciPadError, NumericError
from .evaluation.metrics import METRIC_NAMES, MetricsReport, ScoreSet, aggregate_folds, evaluate, write_roc_csv
from .evaluation.partition import FoldPlan, Strategy, kfold_plan, loao_plan, plan_violations
from .evaluation.training import SampleData, TrainConfig, score_samples, train
from .patching import PatchSpec
from .weights import load_weights, save_weights

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "LSCIPAD_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"
LEDGER = "ledger.jsonl"


@dataclass
class ExperimentConfig:
    manifest: str
    archs: list = field(default_factory=lambda: [ArchKind.LSTM.value])
    spatial: list = field(default_factory=lambda: [8])
    temporal: list = field(default_factory=lambda: [100])
    strategy: str = Strategy.THREE_FOLD.value
    k: int = 3
    val_frac: float = 0.2
    bonafide_fracs: list = field(default_factory=lambda: [0.929, 0.021, 0.050])
    attack_val_frac: float = 0.07
    plan: str = None            # precomputed fold plan, overrides the strategy
    lr: float = 2e-4
    epochs: int = 50
    batch: int = 64
    oversample_attacks: bool = False
    roi: int = 32
    stride: int = None
    offset: int = 0
    seed: int = 0
    workers: int = 1
    output_dir: str = None

    def __post_init__(self):
        for name in ("archs", "spatial", "temporal"):
            value = getattr(self, name)
            if isinstance(value, (str, int)):
                value = [value]
            if not value:
                raise ConfigError(f"sweep list {name!r} is empty")
            setattr(self, name, list(value))
        self.archs = [ArchKind.parse(a).value for a in self.archs]
        self.strategy = Strategy.parse(self.strategy).value
        for name in ("spatial", "temporal"):
            if any(not isinstance(v, int) or v < 1 for v in getattr(self, name)):
                raise ConfigError(f"{name} sizes must be positive integers")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # surfaces bad hyperparameters before any job starts
        self.train_config(self.archs[0], self.spatial[0], self.spatial[0], self.temporal[0])

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "manifest" not in d:
            raise ConfigError("config needs a 'manifest' path")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self):
        return asdict(self)

    def train_config(self, arch, h, w, t):
        return TrainConfig(arch=arch, patch=PatchSpec(h, w, t, self.stride, self.roi, self.offset),
                           lr=self.lr, epochs=self.epochs, batch=self.batch, seed=self.seed,
                           oversample_attacks=self.oversample_attacks)

    def settings(self):
        """(arch, h, w, t) for every swept configuration, in report order."""
        return [(a, s, s, t) for a in self.archs for s in self.spatial for t in self.temporal]


def parse_config_text(text, overrides=None):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if overrides:
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        d = {**d, **overrides}
    return ExperimentConfig.from_dict(d)


def setting_id(arch, h, w, t):
    return f"{arch}_h{h}w{w}t{t}"


def job_id(arch, h, w, t, fold):
    return f"{setting_id(arch, h, w, t)}_f{fold}"


def output_root(explicit=None):
    return Path(explicit or os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT)


def new_run_dir(root, command):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    for i in range(1000):
        path = root / (f"{stamp}-{command}" if i == 0 else f"{stamp}-{command}-{i}")
        try:
            path.mkdir()
            return path
        except FileExistsError:
            continue
    raise ConfigError(f"could not create a run directory under {root}")


def _write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _resolve(path, base):
    p = Path(path)
    return p if p.is_absolute() else Path(base) / p


class Run:
    """An experiment run directory and everything needed to (re)execute it."""

    def __init__(self, path):
        self.path = Path(path)
        meta_file = self.path / "run.json"
        if not meta_file.exists():
            raise ConfigError(f"{self.path} is not a run directory (run.json missing)")
        self.meta = json.loads(meta_file.read_text())
        self.config_text = (self.path / "config.json").read_bytes().decode("utf-8")
        self.config = parse_config_text(self.config_text, self.meta.get("overrides"))
        self._lock = threading.Lock()

    @classmethod
    def create(cls, config_path, overrides=None, root=None):
        config_path = Path(config_path)
        if not config_path.is_file():
            raise ConfigError(f"config file {config_path} does not exist")
        return cls.from_snapshot(config_path.read_bytes(), overrides, config_path.resolve().parent,
                                 root, source=str(config_path.resolve()))

    @classmethod
    def from_snapshot(cls, raw, overrides=None, config_dir=".", root=None, source=None):
        """New run from raw config bytes; the bytes are stored unchanged."""
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ConfigError("config is not UTF-8 text") from None
        cfg = parse_config_text(text, overrides)
        path = new_run_dir(root or cfg.output_dir or output_root(), "train")
        (path / "config.json").write_bytes(raw)
        _write_json(path / "run.json", {
            "config_source": source,
            "config_dir": str(Path(config_dir).resolve()),
            "overrides": overrides,
            "created": datetime.now().isoformat(timespec="seconds"),
            "version": __version__,
        })
        return cls(path)

    @classmethod
    def from_record(cls, record, root=None):
        """Fresh run that re-executes a RunRecord's embedded config."""
        return cls.from_snapshot(record["config_snapshot"], record.get("overrides"),
                                 record["config_dir"], root)

    # paths ---------------------------------------------------------------
    @property
    def manifest_path(self):
        return _resolve(self.config.manifest, self.meta["config_dir"])

    def job_dir(self, jid):
        return self.path / "jobs" / jid

    # plan ------------------------------------------------------------------
    def manifest(self):
        p = self.manifest_path
        if not p.is_file():
            raise ConfigError(f"manifest {p} does not exist")
        return Manifest.load_file(p)

    def fold_plan(self, manifest=None):
        stored = self.path / "plan.json"
        if stored.exists():
            return FoldPlan.load(stored)
        cfg = self.config
        manifest = manifest or self.manifest()
        if cfg.plan:
            src = _resolve(cfg.plan, self.meta["config_dir"])
            if not src.is_file():
                raise ConfigError(f"fold plan {src} does not exist")
            plan = FoldPlan.load(src)
        elif cfg.strategy == Strategy.LOAO.value:
            plan = loao_plan(manifest, tuple(cfg.bonafide_fracs), cfg.attack_val_frac, cfg.seed)
        else:
            plan = kfold_plan(manifest, cfg.k, cfg.val_frac, cfg.seed)
        problems = plan_violations(plan, manifest)
        if problems:
            raise DataError("fold plan is invalid: " + "; ".join(problems))
        plan.save(stored)
        return plan

    def planned_jobs(self, n_folds):
        return [(a, h, w, t, f) for a, h, w, t in self.config.settings() for f in range(n_folds)]

    # ledger -----------------------------------------------------------------
    def ledger(self):
        """Latest ledger entry per job id."""
        out = {}
        path = self.path / LEDGER
        if not path.exists():
            return out
        for line in path.read_text().splitlines():
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn last line of a killed run
            out[entry["job"]] = entry
        return out

    def completed(self):
        return {j for j, e in self.ledger().items()
                if e["status"] == "done" and (self.job_dir(j) / "record.json").exists()}

    def _append_ledger(self, entry):
        with self._lock:
            with open(self.path / LEDGER, "a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def record(self, jid):
        return json.loads((self.job_dir(jid) / "record.json").read_text())


def run_job(run, job, plan, data):
    """Train and score one (arch, h, w, t, fold); write its artefacts."""
    arch, h, w, t, fold = job
    jid = job_id(*job)
    cfg = run.config.train_config(arch, h, w, t)
    split = plan.folds[fold]
    start = time.perf_counter()
    net = build(arch, h, w, t, seed=cfg.seed)
    net, history = train(net, split, data, cfg)
    scores = score_samples(net, split.test, data, cfg.patch)
    report = evaluate(scores)
    elapsed = time.perf_counter() - start

    out = run.job_dir(jid)
    out.mkdir(parents=True, exist_ok=True)
    save_weights(net, out / "weights.lscw")
    write_roc_csv(report.roc, out / "roc.csv")
    _write_json(out / "scores.json", scores.to_json())
    _write_json(out / "record.json", {
        "job": jid,
        "arch": arch, "h": h, "w": w, "t": t, "fold": fold,
        "held_out_species": split.held_out_species.value if split.held_out_species else None,
        "config_snapshot": run.config_text,
        "config_dir": run.meta["config_dir"],
        "overrides": run.meta.get("overrides", {}),
        "train_config": cfg.to_json(),
        "metrics": report.to_json(),
        "history": history,
        "wall_clock": elapsed,
        "version": __version__,
    })
    return report


def write_aggregates(run, n_folds):
    done = run.completed()
    agg_dir = run.path / "aggregates"
    agg_dir.mkdir(exist_ok=True)
    written = []
    for setting in run.config.settings():
        jids = [job_id(*setting, f) for f in range(n_folds)]
        reports = [MetricsReport.from_json(run.record(j)["metrics"]) for j in jids if j in done]
        if not reports:
            continue
        summary = aggregate_folds(reports)
        summary.update(setting=setting_id(*setting), folds_done=len(reports),
                       complete=len(reports) == n_folds)
        _write_json(agg_dir / f"{setting_id(*setting)}.json", summary)
        written.append(setting_id(*setting))
    return written


def run_experiment(run, fail_fast=False, workers=None):
    """Execute every planned job not yet in the ledger.

    Returns a dict with completed, failed and skipped job ids.  A failing
    job is recorded and the sweep carries on unless ``fail_fast``, in which
    case pending jobs are cancelled and the error re-raised.
    """
    manifest = run.manifest()
    plan = run.fold_plan(manifest)
    data = SampleData(manifest)
    jobs = run.planned_jobs(len(plan.folds))
    already = run.completed()
    todo = [j for j in jobs if job_id(*j) not in already]
    log.info("%d planned jobs, %d already done", len(jobs), len(jobs) - len(todo))

    summary = {"skipped": sorted(already), "done": [], "failed": {}}
    first_error = None

    def one(job):
        jid = job_id(*job)
        try:
            report = run_job(run, job, plan, data)
        except LsciPadError as exc:
            run._append_ledger({"job": jid, "status": "failed", "error": f"{type(exc).__name__}: {exc}",
                                "exit_code": exc.exit_code})
            raise
        run._append_ledger({"job": jid, "status": "done", "acer": report.acer, "auc": report.auc})
        return jid

    n_workers = workers or run.config.workers
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = {pool.submit(one, j): j for j in todo}
        if fail_fast:
            wait(futures, return_when=FIRST_EXCEPTION)
            for fut in futures:
                fut.cancel()
        for fut in as_completed(futures):
            if fut.cancelled():
                continue
            jid = job_id(*futures[fut])
            exc = fut.exception()
            if exc is None:
                summary["done"].append(jid)
            elif isinstance(exc, LsciPadError):
                summary["failed"][jid] = str(exc)
                first_error = first_error or exc
            else:
                raise exc
    summary["done"].sort()
    write_aggregates(run, len(plan.folds))
    if first_error is not None and fail_fast:
        raise first_error
    summary["error"] = first_error
    return summary


def evaluate_run(run, jobs=None):
    """Reload stored weights, re-score every completed job and compare to the stored scores."""
    manifest = run.manifest()
    plan = run.fold_plan(manifest)
    data = SampleData(manifest)
    results = {}
    for jid in sorted(jobs or run.completed()):
        rec = run.record(jid)
        cfg = run.config.train_config(rec["arch"], rec["h"], rec["w"], rec["t"])
        # weights fully determine the network, so the build seed is irrelevant here
        net = load_weights(build(rec["arch"], rec["h"], rec["w"], rec["t"], seed=0), run.job_dir(jid) / "weights.lscw")
        scores = score_samples(net, plan.folds[rec["fold"]].test, data, cfg.patch)
        stored = ScoreSet.from_json(json.loads((run.job_dir(jid) / "scores.json").read_text()))
        report = evaluate(scores)
        results[jid] = {
            "identical_scores": scores.sample_ids == stored.sample_ids
                                and bool((scores.scores == stored.scores).all()),
            "metrics": report.to_json(),
        }
    _write_json(run.path / "eval.json", results)
    bad = [j for j, r in results.items() if not r["identical_scores"]]
    if bad:
        raise NumericError(f"reloaded weights do not reproduce stored scores for {', '.join(bad)}")
    return results


def _fmt(v):
    return "-" if v is None else f"{v:.4f}"


def build_report(run):
    """Per-job and per-setting tables; returns (text, job_rows, setting_rows).

    Every planned job gets a row.  Metrics of jobs that have not finished
    are left empty rather than zero.  The setting with the lowest mean ACER
    and the job with the lowest ACER are flagged.
    """
    plan_file = run.path / "plan.json"
    if not plan_file.exists():
        raise DataError(f"{run.path} has no fold plan; nothing was run")
    n_folds = len(FoldPlan.load(plan_file).folds)
    done = run.completed()
    ledger = run.ledger()

    job_rows = []
    for job in run.planned_jobs(n_folds):
        jid = job_id(*job)
        row = dict(zip(("arch", "h", "w", "t", "fold"), job), job=jid)
        if jid in done:
            m = run.record(jid)["metrics"]
            row.update({k: m[k] for k in METRIC_NAMES}, status="done")
        else:
            row.update({k: None for k in METRIC_NAMES})
            row["status"] = ledger.get(jid, {}).get("status", "missing")
        job_rows.append(row)

    setting_rows = []
    for setting in run.config.settings():
        sid = setting_id(*setting)
        row = dict(zip(("arch", "h", "w", "t"), setting), setting=sid)
        agg = run.path / "aggregates" / f"{sid}.json"
        summary = json.loads(agg.read_text()) if agg.exists() else None
        for k in METRIC_NAMES:
            row[k] = summary[k]["mean"] if summary else None
            row[k + "_std"] = summary[k]["std"] if summary else None
        row["folds_done"] = summary["folds_done"] if summary else 0
        setting_rows.append(row)

    for rows in (job_rows, setting_rows):
        scored = [r for r in rows if r["acer"] is not None]
        best = min(scored, key=lambda r: r["acer"]) if scored else None
        for r in rows:
            r["best"] = r is best

    head = f"{'setting':<22}{'folds':>6}" + "".join(f"{k:>18}" for k in METRIC_NAMES)
    lines = [f"run {run.path.name}  ({len(done)}/{len(job_rows)} jobs done)", "", head]
    for r in setting_rows:
        cells = "".join(f"{_fmt(r[k]) + ' +/- ' + _fmt(r[k + '_std']) if r[k] is not None else '-':>18}"
                        for k in METRIC_NAMES)
        lines.append(f"{r['setting']:<22}{r['folds_done']:>6}{cells}" + ("  *best" if r["best"] else ""))
    lines += ["", f"{'job':<26}{'status':>9}" + "".join(f"{k:>9}" for k in METRIC_NAMES)]
    for r in job_rows:
        cells = "".join(f"{_fmt(r[k]):>9}" for k in METRIC_NAMES)
        lines.append(f"{r['job']:<26}{r['status']:>9}{cells}" + ("  *best" if r["best"] else ""))
    return "\n".join(lines) + "\n", job_rows, setting_rows


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                             for c in columns])


def write_report(run):
    text, job_rows, setting_rows = build_report(run)
    (run.path / "report.txt").write_text(text)
    _write_csv(run.path / "report_jobs.csv", job_rows,
               ["job", "arch", "h", "w", "t", "fold", "status", *METRIC_NAMES, "best"])
    _write_csv(run.path / "report_settings.csv", setting_rows,
               ["setting", "arch", "h", "w", "t", "folds_done",
                *[c for k in METRIC_NAMES for c in (k, k + "_std")], "best"])
    return text

