"""``sbcoal <experiment> [--config path] [--seed u64] [--replicates n] ...``

Exit status: 0 when every checked row passes, 1 when any fails, 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    all_passed,
    load_config_file,
    make_config,
    run,
    write_csv,
    write_json,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("sbcoal")


def _parse_assignment(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects KEY=VALUE, got {text!r}")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw  # bare strings such as scheme=em
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbcoal",
        description="Seed-bank coalescent and Wright-Fisher seed-bank verification experiments.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat TOML file of experiment settings")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--threads", type=int, default=0, help="worker threads (0: all cores)")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--json", help="JSON summary path")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key; VALUE is parsed as a TOML value",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        overrides = load_config_file(args.config) if args.config else {}
        file_experiment = overrides.get("experiment")
        if file_experiment is not None and file_experiment != args.experiment:
            raise ConfigError(
                f"config is for {file_experiment!r}, not {args.experiment!r}"
            )
        for item in args.set:
            key, value = _parse_assignment(item)
            overrides[key] = value
        if args.replicates is not None:
            overrides["replicates"] = args.replicates
        cfg = make_config(
            args.experiment, overrides, master_seed=args.seed, threads=args.threads,
            out=args.out, json_path=args.json,
        )
    except (ConfigError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"sbcoal: config error: {exc}", file=sys.stderr)
        return 2

    log.info("running %s with seed %d", cfg.experiment, cfg.master_seed)
    rows = run(cfg)
    if cfg.out:
        write_csv(rows, cfg.out)
    else:
        write_csv(rows, sys.stdout)
    if cfg.json:
        write_json(cfg, rows, cfg.json)
    failed = [r for r in rows if r.passed is False]
    for r in failed:
        log.warning("FAIL %s %s estimate=%r oracle=%r tol=%r", r.experiment, r.check,
                    r.estimate, r.oracle, r.tolerance)
    return 0 if all_passed(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
