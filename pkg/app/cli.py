"""
Command-line front end.

Usage:
    python -m app solve  --config configs/special_case.conf --out runs/special
    python -m app verify --config configs/special_case.conf --out runs/verify [--flip-lambda]
    python -m app sweep  --config configs/special_case.conf --out runs/sweep --param n --values 0,1,2,3 [--workers 4]

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration error.
"""
import argparse
import logging
import sys
from typing import List, Optional

from app import __version__
from app.config import configure_logging, get_settings
from app.exceptions import SimulationError, ScenarioSyntaxError, ScenarioValidationError, CoefficientRangeError
from app.models import SweepParam
from app.schemas import RunReport
from app.services.run_service import RunService
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

_CONFIG_ERRORS = (ScenarioSyntaxError, ScenarioValidationError, CoefficientRangeError)


def _summary(report: RunReport) -> int:
    for verdict in report.verdicts:
        mark = "PASS" if verdict.passed else "FAIL"
        print(f"  [{mark}] {verdict.check:40s} {verdict.value:.3e}  (tol {verdict.tolerance:.1e})")
    print(f"{report.command}: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_PASS if report.passed else EXIT_CHECK_FAILED


def cmd_solve(args) -> int:
    """Solve the scenario and write aux, phase, wave and observables files"""
    scenario = ScenarioService.load_scenario(args.config, flip_lambda=args.flip_lambda)
    return _summary(RunService.solve(scenario, args.out))


def cmd_verify(args) -> int:
    """Run the full verification suite"""
    scenario = ScenarioService.load_scenario(args.config, flip_lambda=args.flip_lambda)
    return _summary(RunService.verify(scenario, args.out))


def cmd_sweep(args) -> int:
    """Repeat verification across values of one parameter"""
    scenario = ScenarioService.load_scenario(args.config, flip_lambda=args.flip_lambda)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ScenarioValidationError(f"--values must be comma-separated numbers, got {args.values!r}")
    if not values:
        raise ScenarioValidationError("--values is empty")
    workers = args.workers or get_settings().workers
    return _summary(RunService.sweep(scenario, SweepParam(args.param), values, args.out, workers))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Pseudo-Hermitian invariant simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default=None, help="Override INVARIANT_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Available commands")

    def common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="Scenario config file")
        sub.add_argument("--out", required=True, help="Output directory")
        sub.add_argument("--workers", type=int, default=None, help="Worker processes for sweeps")
        sub.add_argument("--flip-lambda", action="store_true",
                         help="Negate lambda in the Hamiltonian only (harness sensitivity run)")

    solve_parser = subparsers.add_parser("solve", help="Solve a scenario and write artifacts")
    common(solve_parser)
    solve_parser.set_defaults(func=cmd_solve)

    verify_parser = subparsers.add_parser("verify", help="Verify all identities against tolerances")
    common(verify_parser)
    verify_parser.set_defaults(func=cmd_verify)

    sweep_parser = subparsers.add_parser("sweep", help="Sweep one parameter")
    common(sweep_parser)
    sweep_parser.add_argument("--param", required=True, choices=[p.value for p in SweepParam])
    sweep_parser.add_argument("--values", required=True, help="Comma-separated values")
    sweep_parser.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
