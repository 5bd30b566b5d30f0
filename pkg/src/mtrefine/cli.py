"""Command-line entry points.

Verbs: translate (base translations only), refine (full iterative run),
refine-external (refine an existing system output), report (re-render
artifacts from a run directory), serve-eval (pairwise judging service).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, load_config
from .runner import regenerate_report, run_experiment

logger = logging.getLogger(__name__)


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run configuration YAML")
    parser.add_argument("--output-dir", help="override the configured output dir")
    parser.add_argument("--cache-dir", help="override the configured cache dir")
    parser.add_argument("--workers", type=int, help="override worker count")


def _load_with_overrides(args: argparse.Namespace):
    cfg = load_config(args.config)
    overrides = {}
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.cache_dir:
        overrides["cache_dir"] = args.cache_dir
    if args.workers:
        overrides["workers"] = args.workers
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtrefine",
        description="Iterative translation refinement workbench",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("translate", help="query base translations only")
    _add_config_arg(p)

    p = sub.add_parser("refine", help="full run: base + iterative strategies")
    _add_config_arg(p)

    p = sub.add_parser("refine-external", help="refine an existing system output")
    _add_config_arg(p)
    p.add_argument("--hypotheses", required=True,
                   help="system output file, line-aligned with the origin test set")
    p.add_argument("--system-name", required=True, help="label for the system")

    p = sub.add_parser("report", help="re-render reports from a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--case-count", type=int, default=3)

    p = sub.add_parser("serve-eval", help="serve pairwise judging campaigns")
    p.add_argument("--store", required=True, help="campaign store directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--operator-token",
                   help="token for campaign creation and tallies")
    p.add_argument("--ui", help="static judging UI directory to host at /ui")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        if args.verb == "translate":
            cfg = dataclasses.replace(_load_with_overrides(args), strategies=())
            result = run_experiment(cfg)
            print(f"run complete: {result.run_dir} "
                  f"({result.total_calls} calls, {result.network_calls} network)")
        elif args.verb == "refine":
            cfg = _load_with_overrides(args)
            if not cfg.strategies:
                raise ConfigError("refine needs at least one strategy in the config")
            result = run_experiment(cfg)
            print(f"run complete: {result.run_dir} "
                  f"({result.total_calls} calls, {result.network_calls} network)")
            for label, best in sorted(result.selections.items()):
                print(f"  {label}: best iteration {best}")
        elif args.verb == "refine-external":
            cfg = _load_with_overrides(args)
            if not cfg.strategies:
                raise ConfigError("refine-external needs at least one strategy")
            result = run_experiment(
                cfg, external_base=args.hypotheses, system_name=args.system_name
            )
            print(f"run complete: {result.run_dir}")
        elif args.verb == "report":
            paths = regenerate_report(args.run_dir, case_count=args.case_count)
            for name, path in sorted(paths.items()):
                print(f"  {name}: {path}")
        elif args.verb == "serve-eval":
            import uvicorn

            from .evalsvc import CampaignStore, create_app

            app = create_app(
                CampaignStore(args.store),
                operator_token=args.operator_token,
                ui_dir=args.ui,
            )
            uvicorn.run(app, host=args.host, port=args.port)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
