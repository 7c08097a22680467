"""Command line entry point: ``smefilter run|figure|validate|oracle-check``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigInvalid, NumericalFailure, SmeFilterError
from .harness.figures import FIGURES, run_figure
from .harness.io import export_csv
from .harness.oracles import ensemble_vs_lindblad, scheme_agreement
from .harness.runner import run_scenario
from .harness.scenario import load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _error(code: str, message: str) -> None:
    print(f"ERROR {code}: {message}", file=sys.stderr)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    result = run_scenario(scenario)
    target = _out_dir(args.out) / f"{scenario.name}.csv"
    export_csv(result, target)
    print(target)
    return EXIT_OK


def cmd_figure(args) -> int:
    overrides = {}
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.cycles is not None:
        overrides["cycles"] = args.cycles
    out = _out_dir(args.out)
    for result in run_figure(args.id, overrides):
        target = out / f"{result.scenario.name}.csv"
        export_csv(result, target)
        print(target)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = load_scenario(args.config)
    print(f"OK {scenario.name}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    reports = [
        ensemble_vs_lindblad(realizations=args.realizations, seed=args.seed),
        scheme_agreement(seed=args.seed),
    ]
    for r in reports:
        print(r.line())
    if all(r.passed for r in reports):
        return EXIT_OK
    _error("OracleMismatch", "; ".join(r.name for r in reports if not r.passed))
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smefilter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", help="run a preset figure battery")
    p.add_argument("--id", required=True, choices=FIGURES)
    p.add_argument("--out", required=True)
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cycles", type=int)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("validate", help="parse and check a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle-check", help="ensemble-vs-Lindblad and scheme-agreement checks")
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        _error(exc.code, str(exc))
        return EXIT_CONFIG
    except NumericalFailure as exc:
        _error(exc.code, str(exc))
        return EXIT_NUMERICAL
    except SmeFilterError as exc:
        _error(exc.code, str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _error("IoError", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
