"""Command-line entry point: run one scenario from a config file and export the results."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .export import export
from .runner import EXIT_CONFIG, EXIT_DEGRADED, EXIT_INTEGRATION, run_scenario

log = logging.getLogger("softrod")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softrod-run", description=__doc__)
    parser.add_argument("--config", type=Path, help="flat dotted-key TOML file (defaults if omitted)")
    parser.add_argument("--out-dir", type=Path, default=Path("out"), help="directory for CSV output")
    parser.add_argument("--duration", type=float, help="simulated time in seconds (overrides run.duration)")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE", help="set a config key; repeatable"
    )
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    overrides = list(args.override)
    if args.duration is not None:
        overrides.append(f"run.duration={args.duration!r}")
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    record = run_scenario(config)
    paths = export(record, args.out_dir)
    if record.status == EXIT_INTEGRATION:
        log.error("integration failure: %s (last valid state written)", record.failure)
    elif record.status == EXIT_DEGRADED:
        log.warning("%d of %d outer solves ended above tolerance", record.degraded_steps, record.steps + 1)
    if record.rows:
        last = record.rows[-1]
        log.info(
            "t=%.3f |p~|=%.3e |p~_t|=%.3e |theta~|inf=%.3e; wrote %d files to %s",
            last["t"], last["p_err_L2"], last["p_err_t_L2"], last["theta_err_Linf"], len(paths), args.out_dir,
        )
    return record.status


if __name__ == "__main__":
    sys.exit(main())
