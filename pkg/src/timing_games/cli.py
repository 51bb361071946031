"""Command-line front end: ``timing-games {validate,run,verify,oracle} --scenario PATH --out DIR``.

Exit codes: 0 pass, 1 verification failure, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, load_preset
from .errors import ConfigurationError, ModelError
from .scenario import EXIT_CONFIG, EXIT_RUNTIME, module_of, oracle_suite, run_scenario, validate_scenario

COMMANDS = {
    "validate": lambda cfg: validate_scenario(cfg),
    "run": lambda cfg: run_scenario(cfg),
    "verify": lambda cfg: run_scenario(cfg, verify_only=True),
    "oracle": lambda cfg: oracle_suite(cfg),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="timing-games", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="JSON scenario file")
    src.add_argument("--preset", metavar="NAME", help="bundled preset name")
    ap.add_argument("--out", metavar="DIR", required=True, help="output directory")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--paths", type=int, help="override the Monte Carlo path count")
    ap.add_argument("--steps", type=int, help="override the grid step count")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "paths": args.paths, "steps": args.steps}
    try:
        cfg = load_preset(args.preset, overrides) if args.preset else load_config(args.scenario, overrides)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = COMMANDS[args.command](cfg)
        report.write(args.out, cfg)
    except (ConfigurationError, ModelError) as e:
        print(f"config error [{module_of(e)}]: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every failure maps to an exit code
        print(f"runtime error [{module_of(e)}]: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    summary = report.body["summary"]
    print(f"{args.command} {cfg.name}: {'PASS' if report.passed else 'FAIL'}")
    for line in summary.get("failures", []):
        print(f"  {line}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
