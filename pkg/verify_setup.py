#!/usr/bin/env python3
"""
Verification script to check if the invariant simulator is set up correctly
"""
import sys
import tempfile
import traceback
from pathlib import Path

CONFIGS = Path(__file__).resolve().parent / "configs"


def check_imports():
    """Check if all required modules can be imported"""
    print("Checking imports...")
    try:
        from app.main import app
        from app.cli import main
        from app.services.scenario_service import ScenarioService
        from app.services.auxiliary_solver import AuxiliarySolver
        from app.services.state_service import StateService
        from app.services.operator_algebra import OperatorAlgebra
        from app.services.propagation_service import PropagationService
        from app.services.run_service import RunService
        print("  ✓ All imports successful")
        return True
    except Exception as e:
        print(f"  ✗ Import error: {e}")
        traceback.print_exc()
        return False


def check_configs():
    """Check that the bundled scenarios parse"""
    print("\nChecking bundled configs...")
    try:
        from app.services.scenario_service import ScenarioService

        paths = sorted(CONFIGS.glob("*.conf"))
        for path in paths:
            scenario = ScenarioService.load_scenario(path)
            print(f"  ✓ {path.name}: {scenario.n_steps} steps, n={list(scenario.quantum_n)}")
        return bool(paths)
    except Exception as e:
        print(f"  ✗ Config error: {e}")
        traceback.print_exc()
        return False


def check_solve():
    """Run a small solve and compare the final phase with its closed form"""
    print("\nChecking a small solve...")
    try:
        from app.services.run_service import RunService
        from app.services.scenario_service import ScenarioService

        scenario = ScenarioService.parse_scenario(
            "omega = const(1.0)\nlambda = linear(1.0)\nalpha_init = particular\nsteps = 200\n"
        )
        with tempfile.TemporaryDirectory() as out:
            report = RunService.solve(scenario, out)
        eps = report.observables[-1]["eps_n"]
        print(f"  ✓ eps_0(1) = {eps:.10f} (expected {-2.0 / 3.0:.10f})")
        return abs(eps + 2.0 / 3.0) < 1e-8
    except Exception as e:
        print(f"  ✗ Solve error: {e}")
        traceback.print_exc()
        return False


def check_api_routes():
    """Check if API routes are registered"""
    print("\nChecking API routes...")
    try:
        from app.main import app

        routes = [route.path for route in app.routes]
        expected_routes = [
            "/",
            "/health",
            "/api/v1/scenarios/parse",
            "/api/v1/runs/solve",
            "/api/v1/runs/verify",
        ]
        missing = [r for r in expected_routes if r not in routes]
        print(f"  ✓ Found {len(routes)} routes registered")
        if missing:
            print(f"  ✗ Missing routes: {missing}")
        return not missing
    except Exception as e:
        print(f"  ✗ Route check error: {e}")
        traceback.print_exc()
        return False


def main():
    print("=" * 60)
    print("Invariant Simulator Setup Verification")
    print("=" * 60)

    results = [check_imports(), check_configs(), check_solve(), check_api_routes()]

    print("\n" + "=" * 60)
    if all(results):
        print("✅ All checks passed! Application is ready to use.")
        print("\nTo verify the special case:")
        print("  python -m app verify --config configs/special_case.conf --out runs/verify")
        print("\nTo start the server:")
        print("  ./run.sh")
        print("\nThen visit: http://localhost:8000/docs")
        return 0
    else:
        print("❌ Some checks failed. Please review the errors above.")
        return 1


if __name__ == "__main__":
    sys.exit(main())
