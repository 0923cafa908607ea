"""Command line entry point.

    snnwall run --scenario a --controller both --out out/ [--config f.yaml]
                [--seed N] [--dump-spikes] [--no-figures]
    snnwall report --scenario a --out out/
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .harness import report, scenarios
from .harness.config import ConfigError, load_config

log = logging.getLogger("snnwall")


def _controllers(choice: str) -> tuple[str, ...]:
    return scenarios.CONTROLLERS if choice == "both" else (choice,)


def cmd_run(args) -> int:
    cfg = scenarios.default_config(args.scenario)
    if args.config:
        cfg = load_config(args.config, base=cfg)
        if cfg.scenario != args.scenario:
            raise ConfigError(f"config is for case {cfg.scenario}, not {args.scenario}")
    if args.seed is not None:
        cfg = scenarios.with_seed(cfg, args.seed)
    out = args.out or cfg.out_dir
    room = scenarios.room_spec(cfg) if cfg.scenario == "c" else None
    start = time.perf_counter()
    results = scenarios.run_scenario(cfg, _controllers(args.controller),
                                     record_spikes=args.dump_spikes)
    log.info("case %s simulated in %.1f s", cfg.scenario, time.perf_counter() - start)
    written = report.write_outputs(results, cfg, out, room, args.dump_spikes)
    if not args.no_figures:
        logs = {name: r.log for name, r in results.items()}
        written += report.render_figures(cfg, logs, out, room)
    print(report.format_metrics(results))
    for path in written:
        log.info("wrote %s", path)
    return 0


def cmd_report(args) -> int:
    for path in report.report_from_dir(args.out, args.scenario):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnwall",
                                     description="Adaptive wall-following simulations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one case and write logs")
    run.add_argument("--scenario", choices=("a", "b", "c"), required=True)
    run.add_argument("--controller", choices=("snn", "lqr", "both"), default="both")
    run.add_argument("--config", help="YAML overrides applied to the case preset")
    run.add_argument("--out", help="output directory (default: config out_dir)")
    run.add_argument("--seed", type=int, help="noise and network seed")
    run.add_argument("--dump-spikes", action="store_true", help="write spike rasters")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="re-render figures from a run directory")
    rep.add_argument("--scenario", choices=("a", "b", "c"), required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
