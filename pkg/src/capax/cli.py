"""Command-line entry point: plan, run, analyze, and report subcommands.

Exit codes: 0 success, 1 run failures, 2 bad inputs, 3 analysis infeasible.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis as analysis_mod
from .config import StudyConfig, load_config
from .errors import CapaxError, RankDeficient
from .grid import expand_grid
from .inventory import demo_inventory, load_inventory
from .plan import build_plan, load_manifest, save_manifest
from .registry import RunRegistry, schedule
from .supervisor import run_study

EXIT_OK = 0
EXIT_RUN_FAILURES = 1
EXIT_BAD_INPUT = 2
EXIT_ANALYSIS = 3


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    if not sizes:
        raise argparse.ArgumentTypeError("empty size list")
    return sizes


def _load_study_config(args) -> StudyConfig:
    config = load_config(args.config) if args.config else StudyConfig()
    overrides = {}
    if getattr(args, "registry", None):
        overrides["registry"] = args.registry
    if getattr(args, "parallelism", None):
        overrides["parallelism"] = args.parallelism
    if getattr(args, "trainer", None):
        overrides["trainer"] = args.trainer
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "response", None):
        overrides["response"] = args.response
    if getattr(args, "manifest", None):
        overrides["manifest"] = args.manifest
    if overrides:
        config = StudyConfig(**{**config.__dict__, **overrides})
    return config


def cmd_plan(args) -> int:
    config = _load_study_config(args)
    if args.demo_patients:
        patients = demo_inventory(args.demo_patients, seed=config.seed)
    elif args.inventory:
        patients = load_inventory(args.inventory)
    else:
        print("plan: need --inventory or --demo-patients", file=sys.stderr)
        return EXIT_BAD_INPUT

    sizes = args.sizes or config.plan_sizes
    if sizes is None:
        sizes = tuple(config.grid.dataset_sizes)
    try:
        plan = build_plan(
            patients,
            sizes=sizes,
            seed=config.seed,
            images_per_patient=config.plan_images_per_patient,
            dev_fraction=config.plan_dev_fraction,
            fold_count=config.k_folds,
            fold_mode=config.plan_fold_mode,
        )
    except (CapaxError, ValueError) as exc:
        print(f"plan: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    out = Path(args.out or config.manifest)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(plan, out)
    print(f"wrote manifest {out}")
    for size in plan.dataset_sizes:
        folds = [len(plan.fold_assignments[(size, i)]) for i in range(plan.fold_count)]
        print(
            f"size {size}: dev {plan.dev_count(size)}, test {len(plan.test_order[size])}, "
            f"folds {folds} ({plan.fold_modes[size]})"
        )
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_study_config(args)
    manifest_path = Path(config.manifest)
    if not manifest_path.exists():
        print(f"run: manifest {manifest_path} not found", file=sys.stderr)
        return EXIT_BAD_INPUT
    plan = load_manifest(manifest_path)
    missing = [s for s in config.grid.dataset_sizes if s not in plan.dataset_sizes]
    if missing:
        print(f"run: manifest lacks dataset sizes {missing}", file=sys.stderr)
        return EXIT_BAD_INPUT

    conditions = expand_grid(config.grid)
    registry = RunRegistry(config.registry)
    pending = schedule(
        conditions,
        k_folds=config.k_folds,
        registry=registry,
        seed=config.seed,
        max_epochs=config.max_epochs,
        patience=config.patience,
    )
    total = len(conditions) * config.k_folds
    print(f"{total} runs in study, {len(registry.completed_ids())} completed, "
          f"{len(pending)} pending")
    if not pending:
        return EXIT_OK

    def progress(done, total_pending, result):
        if done % 50 == 0 or done == total_pending:
            print(f"  {done}/{total_pending} ({result.status})", flush=True)

    ok, failures = run_study(
        pending,
        trainer=config.trainer,
        manifest=str(manifest_path),
        registry=registry,
        parallelism=config.parallelism,
        timeout=config.epoch_timeout,
        progress=progress,
    )
    print(f"completed {ok}, failed {failures}")
    return EXIT_OK if failures == 0 else EXIT_RUN_FAILURES


def cmd_analyze(args) -> int:
    config = _load_study_config(args)
    registry_path = Path(config.registry)
    if not registry_path.exists():
        print(f"analyze: registry {registry_path} not found", file=sys.stderr)
        return EXIT_BAD_INPUT
    registry = RunRegistry(registry_path)
    try:
        bundle = analysis_mod.analyze_registry(
            registry,
            response=config.response,
            confidence=config.confidence,
            dev_fraction=config.plan_dev_fraction,
        )
    except RankDeficient as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (CapaxError, ValueError) as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS

    out_dir = Path(args.out or "analysis")
    bundle_path = analysis_mod.write_bundle(bundle, out_dir)
    tables = analysis_mod.write_tables(bundle, out_dir)
    print(f"wrote {bundle_path}")
    for path in tables:
        print(f"wrote {path}")
    if bundle["n_failed"]:
        print(f"note: {bundle['n_failed']} failed runs excluded from analysis")
    print(f"AIC: {bundle['model']['aic']:.1f}")
    return EXIT_OK


def cmd_report(args) -> int:
    bundle_path = Path(args.analysis)
    if bundle_path.is_dir():
        bundle_path = bundle_path / "analysis.json"
    if not bundle_path.exists():
        print(f"report: analysis bundle {bundle_path} not found", file=sys.stderr)
        return EXIT_BAD_INPUT
    bundle = analysis_mod.load_bundle(bundle_path)
    out_dir = Path(args.out or "report")
    for path in analysis_mod.write_report(bundle, out_dir):
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capax",
                                     description="Capacity-versus-sample-size study harness")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="study configuration JSON")
    common.add_argument("--seed", type=int, default=None)

    p_plan = sub.add_parser("plan", parents=[common], help="build the dataset manifest")
    p_plan.add_argument("--inventory", help="patient inventory JSON")
    p_plan.add_argument("--demo-patients", type=int, default=0,
                        help="generate a synthetic inventory of N patients")
    p_plan.add_argument("--sizes", type=_parse_sizes, default=None,
                        help="comma-separated dataset sizes")
    p_plan.add_argument("--out", help="manifest output path")
    p_plan.add_argument("--manifest", help=argparse.SUPPRESS)
    p_plan.set_defaults(func=cmd_plan)

    p_run = sub.add_parser("run", parents=[common], help="execute the factorial study")
    p_run.add_argument("--manifest", help="dataset manifest path")
    p_run.add_argument("--registry", help="run registry path")
    p_run.add_argument("--trainer", help="trainer command line")
    p_run.add_argument("--parallelism", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", parents=[common], help="fit and test the results")
    p_an.add_argument("--registry", help="run registry path")
    p_an.add_argument("--response", choices=["dice", "bce"], default=None)
    p_an.add_argument("--out", help="analysis output directory")
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="emit plot-ready tables from an analysis")
    p_rep.add_argument("--analysis", default="analysis",
                       help="analysis directory or bundle path")
    p_rep.add_argument("--out", help="report output directory")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapaxError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
