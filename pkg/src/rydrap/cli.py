"""Command-line entry point.

    rydrap run <config.yaml | preset-name> [--out DIR] [--seed N] [--threads N]
               [--dt-override DT_US] [--quiet]
    rydrap preset <name> [--emit-config] [run flags]
    rydrap scan <config.yaml | preset-name> [run flags]
    rydrap compare <dir> <dir> [...] [--out DIR] [--quiet]

Exit codes: 0 success; 2 invalid config/arguments; 3 numerical instability;
4 resource refusal (problem too large for the requested solver).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import RunConfig
from .errors import ConfigError, NumericalInstabilityError, ResourceRefusalError
from .presets import PRESET_NAMES, preset_config
from .runner import compare, execute


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="override outputs.directory")
    p.add_argument("--seed", type=int, help="override solver.seed (and derived disorder seed)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker processes for realizations/trajectories "
                        "(default: all cores)")
    p.add_argument("--dt-override", type=float, help="override solver.dt_us")
    p.add_argument("--quiet", action="store_true", help="suppress the summary line")


def _load_target(target: str) -> RunConfig:
    if Path(target).is_file():
        return RunConfig.from_file(target)
    if target in PRESET_NAMES:
        return preset_config(target)
    raise ConfigError(
        f"{target!r} is neither a config file nor a preset "
        f"(presets: {', '.join(PRESET_NAMES)})"
    )


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydrap", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a config file or preset")
    p_run.add_argument("target", help="config YAML path or preset name")
    _add_run_flags(p_run)

    p_pre = sub.add_parser("preset", help="execute a named preset (or print its config)")
    p_pre.add_argument("name", help=f"one of: {', '.join(PRESET_NAMES)}")
    p_pre.add_argument("--emit-config", action="store_true",
                       help="print the preset's YAML config instead of running it")
    _add_run_flags(p_pre)

    p_scan = sub.add_parser("scan", help="run the calibration-error scan of a config")
    p_scan.add_argument("target", help="config YAML path or preset name")
    _add_run_flags(p_scan)

    p_cmp = sub.add_parser("compare", help="merge populations of several run directories")
    p_cmp.add_argument("dirs", nargs="+", help="run directories to compare")
    p_cmp.add_argument("--out", default="out/compare", help="output directory")
    p_cmp.add_argument("--quiet", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad arguments, which matches the config-error code
        return int(e.code or 0)

    try:
        if args.verb == "compare":
            compare(args.dirs, out_dir=args.out, quiet=args.quiet)
            return 0
        if args.verb == "preset":
            cfg = preset_config(args.name)
            if args.emit_config:
                sys.stdout.write(cfg.to_yaml())
                return 0
        else:
            cfg = _load_target(args.target)
        execute(
            cfg,
            out_override=args.out,
            seed_override=args.seed,
            dt_override=args.dt_override,
            threads=max(1, args.threads),
            quiet=args.quiet,
            scan=(args.verb == "scan"),
        )
        return 0
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalInstabilityError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ResourceRefusalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
