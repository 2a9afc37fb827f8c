"""Command-line entry point.

    chaosqfc <preset> [--set key=value]... [--seed N] [--out DIR] [--trials N]
    chaosqfc validate <config.ini>
    chaosqfc rerun <manifest.json> [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical-convergence
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_scenario_config
from .errors import ConfigError, ConvergenceError
from .presets import PRESET_NAMES, rerun_manifest, run_preset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


def _parse_overrides(pairs):
    overrides = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError([f"--set expects key=value, got {item!r}"])
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosqfc",
        description="chaotic-light frequency-conversion LiDAR simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in PRESET_NAMES:
        sp = sub.add_parser(name, help=f"run the {name} preset")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a preset parameter")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--out", default="out")

    vp = sub.add_parser("validate", help="validate a scenario configuration file")
    vp.add_argument("config")

    rp = sub.add_parser("rerun", help="re-execute a run manifest and verify outputs")
    rp.add_argument("manifest")
    rp.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            cfg = load_scenario_config(args.config)
            print(f"{args.config}: valid")
            print(f"  source flux {cfg.source.flux:.4g} /s, sigma {cfg.source.sigma:.4g} Hz, "
                  f"trials {cfg.n_trials}, solver {cfg.solver}")
            return EXIT_OK
        if args.command == "rerun":
            manifest, identical = rerun_manifest(args.manifest, args.out)
            status = "byte-identical" if identical else "MISMATCH"
            print(f"rerun of {manifest.preset}: outputs {status} "
                  f"({len(manifest.outputs)} files, {manifest.wall_clock_s:.2f} s)")
            return EXIT_OK if identical else EXIT_IO
        manifest = run_preset(args.command, _parse_overrides(args.set),
                              args.out, seed=args.seed, trials=args.trials)
        print(f"{manifest.preset}: wrote {len(manifest.outputs)} file(s) to "
              f"{manifest.out_dir} in {manifest.wall_clock_s:.2f} s")
        for k, v in manifest.summary.items():
            print(f"  {k}: {v}")
        return EXIT_OK
    except ConfigError as e:
        for problem in e.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
