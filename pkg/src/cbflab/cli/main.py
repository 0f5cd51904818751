"""cbflab command line: gen-data | compute-hj | train | eval | teleop.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config, write_snapshot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbflab",
        description="Observation-conditioned residual neural CBF lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY.PATH=VALUE", help="dotted-key override")
        p.add_argument("--preset", help="grid/rate preset name")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", default="runs/latest", help="output directory")

    common(sub.add_parser("gen-data", help="generate a training dataset"))
    common(sub.add_parser("train", help="train the hypernetwork"))
    common(sub.add_parser("eval", help="run batch evaluation"))
    common(sub.add_parser("teleop", help="run the live teleoperation server"))

    hj = sub.add_parser("compute-hj", help="solve the HJB-VI for one occupancy grid")
    hj.add_argument("--model", required=True, choices=["dubins", "integrator2d"])
    hj.add_argument("--grid", required=True, help="grid preset name")
    hj.add_argument("--in", dest="in_path", required=True, help="OGRID1 input")
    hj.add_argument("--out", dest="out_path", required=True, help="VGRID1 output")
    hj.add_argument("--failure-margin", type=float, default=0.0,
                    help="meters subtracted from the SDF before solving")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compute-hj":
            from .commands import cmd_compute_hj
            try:
                cmd_compute_hj(args.model, args.grid, args.in_path, args.out_path,
                               failure_margin=args.failure_margin)
            except (ValueError, FileNotFoundError) as e:
                print(f"config error: {e}", file=sys.stderr)
                return EXIT_CONFIG
            return EXIT_OK

        try:
            cfg = load_config(args.config, args.overrides, args.preset, args.seed)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        out_dir = Path(args.out)
        write_snapshot(cfg, out_dir)

        if args.command == "gen-data":
            from .commands import cmd_gen_data
            cmd_gen_data(cfg, out_dir)
        elif args.command == "train":
            from .commands import cmd_train
            cmd_train(cfg, out_dir)
        elif args.command == "eval":
            from .commands import cmd_eval
            try:
                cmd_eval(cfg, out_dir)
            except ValueError as e:
                print(f"config error: {e}", file=sys.stderr)
                return EXIT_CONFIG
        elif args.command == "teleop":
            from .teleop import cmd_teleop
            try:
                cmd_teleop(cfg)
            except OSError as e:
                print(f"runtime failure: {e}", file=sys.stderr)
                return EXIT_RUNTIME
        return EXIT_OK
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
