"""Command-line entry points: batch runs, the confounder accuracy table,
config validation, and the live annotation service."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "folds", None) is not None:
        cfg = dataclasses.replace(cfg, folds=args.folds)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.dry_run:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    from .runner import run_experiment
    out = Path(args.out) if args.out else Path("runs") / "latest"
    result = run_experiment(cfg, out)
    agg = result.result
    mean, std = agg.series("predictive")
    final_pred = mean[-1] if len(mean) else float("nan")
    line = (f"run {result.run_id}: {len(agg.histories)} fold(s), "
            f"final predictive {final_pred:.3f}")
    finals = agg.histories[0][-1] if agg.histories and agg.histories[0] else None
    if finals is not None and finals.alpha0 is not None:
        a0 = agg.final("alpha0").mean()
        a1 = agg.final("alpha1").mean()
        line += f", alpha0 {a0:.3f}, alpha1 {a1:.3f}"
    print(line)
    print(f"wrote {result.metrics_path}, {result.summary_path}, {result.manifest_path}")
    return 0


def cmd_decoy_table(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    from .runner import decoy_accuracy_table, format_decoy_table
    out = Path(args.out) if args.out else None
    table = decoy_accuracy_table(cfg, out_dir=out)
    print(format_decoy_table(table))
    if out:
        print(f"wrote {out / 'decoy_table.csv'}, {out / 'decoy_table.json'}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(store_dir=args.store)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explearn",
        description="explanatory interactive learning experiments and services")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a (cross-validated) experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--folds", type=int, default=None)
    run.add_argument("--dry-run", action="store_true",
                     help="validate and print the resolved config, touch nothing")
    run.set_defaults(fn=cmd_run)

    table = sub.add_parser("decoy-table",
                           help="passive confounder-removal accuracy table")
    table.add_argument("--config", required=True)
    table.add_argument("--out", default=None)
    table.add_argument("--seed", type=int, default=None)
    table.set_defaults(fn=cmd_decoy_table)

    val = sub.add_parser("validate", help="validate a config and print it resolved")
    val.add_argument("--config", required=True)
    val.set_defaults(fn=cmd_validate)

    serve = sub.add_parser("serve", help="run the live annotation session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--store", default=None,
                       help="directory for session event logs (resume on restart)")
    serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
