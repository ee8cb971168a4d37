"""``waw-lab <scenario> --config <file> [overrides]``"""
from __future__ import annotations

import argparse
import sys

from .config import SCENARIO_NAMES, ConfigError, load_config
from .scenarios import run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="waw-lab",
                                 description="Write+Write cache-timing experiments.")
    ap.add_argument("scenario_arg", nargs="?", metavar="scenario",
                    help=f"one of: {', '.join(SCENARIO_NAMES)}")
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--scenario", help="scenario (alternative to the positional)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out-dir")
    ap.add_argument("--cache", choices=("classic", "scatter"))
    ap.add_argument("--reps", type=int)
    ap.add_argument("--th", type=float)
    ap.add_argument("--pe", type=float, dest="p_e")
    ap.add_argument("--division", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.scenario_arg and args.scenario and args.scenario_arg != args.scenario:
        print(f"waw-lab: conflicting scenarios {args.scenario_arg!r} and {args.scenario!r}",
              file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed,
                          scenario=args.scenario_arg or args.scenario,
                          out_dir=args.out_dir, cache=args.cache, reps=args.reps,
                          th=args.th, p_e=args.p_e, division=args.division)
    except ConfigError as e:
        print(f"waw-lab: {e}", file=sys.stderr)
        return 2
    for path in run(cfg):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
