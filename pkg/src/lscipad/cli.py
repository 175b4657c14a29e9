"""Command line front end: ``lscipad synth | split | train | eval | report``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .data.manifest import Manifest
from .data.synth import SpeckleParams, default_counts, make_synth_dataset
from .errors import ConfigError, DataError, LsciPadError
from .evaluation.partition import Strategy, kfold_plan, loao_plan, plan_violations, split_class_counts
from .experiment import Run, evaluate_run, new_run_dir, output_root, run_experiment, write_report

log = logging.getLogger("lscipad")

SYNTH_KEYS = {"out", "counts", "bona_fide", "subjects", "seed", "geometry", "physics"}


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def cmd_synth(args):
    cfg = _load_json(args.config) if args.config else {}
    unknown = set(cfg) - SYNTH_KEYS
    if unknown:
        raise ConfigError(f"unknown synth config keys: {', '.join(sorted(unknown))}")
    for key in ("out", "bona_fide", "subjects", "seed", "geometry"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    counts = cfg.get("counts") or default_counts(cfg.get("bona_fide", 400))
    try:
        params = SpeckleParams(**cfg.get("physics", {}))
    except TypeError as exc:
        raise ConfigError(f"bad physics block: {exc}") from None
    geometry = tuple(cfg.get("geometry", (64, 64, 100)))
    if len(geometry) != 3:
        raise ConfigError("geometry must be [H, W, T]")
    out = Path(cfg["out"]) if cfg.get("out") else new_run_dir(output_root(args.output_root), "synth") / "dataset"
    manifest = make_synth_dataset(out, counts, subjects=cfg.get("subjects", 60), seed=cfg.get("seed", 0),
                                  geometry=geometry, params=params)
    print(out / "manifest.json")
    for name, n in sorted(manifest.class_counts().items()):
        print(f"  {name:<20}{n:>6}")
    return 0


def cmd_split(args):
    manifest = Manifest.load_file(args.manifest)
    strategy = Strategy.parse(args.strategy)
    if strategy is Strategy.LOAO:
        plan = loao_plan(manifest, seed=args.seed)
    else:
        plan = kfold_plan(manifest, k=args.k, val_frac=args.val_frac, seed=args.seed)
    problems = plan_violations(plan, manifest)
    if problems:
        raise DataError("; ".join(problems))
    out = Path(args.out) if args.out else new_run_dir(output_root(args.output_root), "split") / "plan.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    plan.save(out)
    print(out)
    for i, split in enumerate(plan.folds):
        counts = split_class_counts(split, manifest)
        held = f" (held out: {split.held_out_species.value})" if split.held_out_species else ""
        print(f"fold {i}{held}: " + "  ".join(f"{k}={sum(v.values())}" for k, v in counts.items()))
    return 0


def _overrides(args):
    names = ("manifest", "seed", "epochs", "lr", "batch", "workers")
    out = {n: getattr(args, n) for n in names if getattr(args, n) is not None}
    if "manifest" in out:
        # relative paths in the config file resolve against its directory, flags against the cwd
        out["manifest"] = str(Path(out["manifest"]).resolve())
    return out


def cmd_train(args):
    if args.resume:
        if args.config or _overrides(args):
            raise ConfigError("--resume takes its settings from the run directory; drop --config and overrides")
        run = Run(args.resume)
    elif args.config:
        run = Run.create(args.config, _overrides(args), args.output_root)
    else:
        raise ConfigError("train needs --config or --resume")
    print(run.path, flush=True)
    summary = run_experiment(run, fail_fast=args.fail_fast)
    for jid, err in sorted(summary["failed"].items()):
        print(f"FAILED {jid}: {err}", file=sys.stderr)
    print(f"{len(summary['done'])} jobs run, {len(summary['skipped'])} resumed, {len(summary['failed'])} failed")
    return summary["error"].exit_code if summary["error"] else 0


def cmd_eval(args):
    run = Run(args.run_dir)
    results = evaluate_run(run, args.job or None)
    for jid, r in results.items():
        m = r["metrics"]
        print(f"{jid:<26} acer={m['acer']}  auc={m['auc']}  identical={r['identical_scores']}")
    return 0


def cmd_report(args):
    print(write_report(Run(args.run_dir)), end="")
    return 0


def make_parser():
    p = argparse.ArgumentParser(prog="lscipad", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lscipad {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--output-root", help="parent of timestamped run directories "
                                         "(default: $LSCIPAD_OUTPUT_ROOT or ./runs)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic speckle dataset")
    s.add_argument("--config", help="JSON with out/counts/bona_fide/subjects/seed/geometry/physics")
    s.add_argument("--out", help="dataset directory (created if missing)")
    s.add_argument("--bona-fide", type=int)
    s.add_argument("--subjects", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--geometry", type=int, nargs=3, metavar=("H", "W", "T"))
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="write a fold plan for a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--strategy", default="ThreeFold", help="ThreeFold or LOAO")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--val-frac", type=float, default=0.2)
    s.add_argument("--out")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="run (or resume) a training sweep")
    s.add_argument("--config")
    s.add_argument("--resume", metavar="RUN_DIR")
    s.add_argument("--manifest")
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--fail-fast", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="re-score completed jobs from their stored weights")
    s.add_argument("run_dir")
    s.add_argument("--job", action="append", help="restrict to this job id (repeatable)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="summary tables for a run directory")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LsciPadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
