"""Command line entry point: ``hypercol {run,validate,render} CONFIG``.

Exit codes: 0 success, 2 invalid config, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from hypercol import experiments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("hypercol")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypercol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the experiment described by a JSON config"),
                        ("validate", "check a config and list every problem"),
                        ("render", "draw the config's realization as realization.svg")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="path to a JSON config")
        if name != "validate":
            sp.add_argument("--jobs", type=int, default=1, help="maximum parallel jobs")
            sp.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw = experiments.load_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, experiments.ConfigError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    problems = experiments.validate(raw)
    if args.command == "render" and not problems:
        problems = experiments.validate({**raw, "kind": "render"})
    if args.command == "validate":
        for line in problems:
            print(line)
        return EXIT_CONFIG if problems else EXIT_OK
    if problems:
        for line in problems:
            print(f"invalid config: {line}", file=sys.stderr)
        return EXIT_CONFIG

    cfg = experiments.ExperimentConfig.from_dict(raw)
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = experiments.run(cfg, out_dir=args.out, jobs=args.jobs,
                                 force_render=args.command == "render")
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("wrote %d result rows", len(report["results"]))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
