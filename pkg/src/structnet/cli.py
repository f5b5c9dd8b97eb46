"""Command line entry point.

    structnet <kind> --config <path> [--out <dir>] [--seed <n> ...] [--no-svg]

``--out`` defaults to ``$STRUCTNET_OUT`` (or ``./runs``) joined with the
kind. Exit status is 0 on success, including runs that diverge, 2 on a
bad config or arguments and 3 when the output cannot be written.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import EXPERIMENT_KINDS, parse_config, replace_section
from .errors import ConfigError, StructnetError
from .experiments import run

OUT_ENV = "STRUCTNET_OUT"


def build_parser():
    p = argparse.ArgumentParser(prog="structnet",
                                description="Run one structured-network experiment.")
    p.add_argument("kind", choices=EXPERIMENT_KINDS)
    p.add_argument("--config", required=True, help="config file (section.key = value lines)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<kind> or runs/<kind>)")
    p.add_argument("--seed", type=int, nargs="+", help="override experiment.seeds")
    p.add_argument("--no-svg", action="store_true", help="skip SVG rendering")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"structnet: cannot read config: {err}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as err:
        print(f"structnet: {args.config}: {err}", file=sys.stderr)
        return 2
    cfg = replace_section(cfg, "experiment", kind=args.kind)
    if args.seed:
        cfg = replace_section(cfg, "experiment", seeds=list(args.seed))
    if args.no_svg:
        cfg = replace_section(cfg, "experiment", svg=False)
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "runs")) / args.kind
    try:
        return run(cfg, out)
    except OSError as err:
        print(f"structnet: cannot write output: {err}", file=sys.stderr)
        return 3
    except StructnetError as err:
        print(f"structnet: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
