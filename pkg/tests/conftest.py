import pytest

from app.services.auxiliary_solver import AuxiliarySolver
from app.services.scenario_service import ScenarioService

# Constant frequency, lambda = a t, closed-form alpha = -2 a t/(m omega0^2)
SPECIAL_CASE = """
m = 1
hbar = 1
omega = const(1.0)
lambda = linear(1.0)
alpha_init = particular
t = [0, 1]
steps = 1000
n = [0]
"""

ZERO_LAMBDA = """
m = 1
hbar = 1
omega = const(1.0)
lambda = const(0)
t = [0, 1]
steps = 1000
n = [0]
"""

SIN_MOD = """
omega = sin_mod(1.0, 0.1, 2.0)
lambda = linear(0.5)
t = [0, 1]
steps = 1000
n = [0]
"""

# Mesh step 1e-4 with room for a centered difference at t = 1
FINE_MESH = "t = [0, 1.001]\nsteps = 10010\n"

# Special case away from unit mass and hbar
SCALED_ENTRIES = "m = 1.3\nhbar = 0.7\n"


def with_entries(text: str, extra: str) -> str:
    """Replace or add config entries"""
    overridden = {line.split("=")[0].strip() for line in extra.strip().splitlines()}
    kept = [line for line in text.strip().splitlines() if line.split("=")[0].strip() not in overridden]
    return "\n".join(kept) + "\n" + extra


@pytest.fixture(scope="session")
def special_scenario():
    return ScenarioService.parse_scenario(SPECIAL_CASE)


@pytest.fixture(scope="session")
def special_aux(special_scenario):
    return AuxiliarySolver.solve(special_scenario)


@pytest.fixture(scope="session")
def zero_scenario():
    return ScenarioService.parse_scenario(ZERO_LAMBDA)


@pytest.fixture(scope="session")
def zero_aux(zero_scenario):
    return AuxiliarySolver.solve(zero_scenario)


@pytest.fixture(scope="session")
def sin_mod_scenario():
    return ScenarioService.parse_scenario(SIN_MOD)


@pytest.fixture(scope="session")
def sin_mod_aux(sin_mod_scenario):
    return AuxiliarySolver.solve(sin_mod_scenario)


@pytest.fixture(scope="session")
def special_fine():
    s = ScenarioService.parse_scenario(with_entries(SPECIAL_CASE, FINE_MESH))
    return s, AuxiliarySolver.solve(s)


@pytest.fixture(scope="session")
def zero_fine():
    s = ScenarioService.parse_scenario(with_entries(ZERO_LAMBDA, FINE_MESH))
    return s, AuxiliarySolver.solve(s)


@pytest.fixture(scope="session")
def sin_mod_fine():
    s = ScenarioService.parse_scenario(with_entries(SIN_MOD, FINE_MESH))
    return s, AuxiliarySolver.solve(s)


@pytest.fixture(scope="session")
def special_flipped():
    s = ScenarioService.parse_scenario(with_entries(SPECIAL_CASE, FINE_MESH), flip_lambda=True)
    return s, AuxiliarySolver.solve(s)


@pytest.fixture(scope="session")
def scaled_scenario():
    return ScenarioService.parse_scenario(with_entries(SPECIAL_CASE, SCALED_ENTRIES))


@pytest.fixture(scope="session")
def scaled_aux(scaled_scenario):
    return AuxiliarySolver.solve(scaled_scenario)


@pytest.fixture(scope="session")
def scaled_fine():
    s = ScenarioService.parse_scenario(with_entries(with_entries(SPECIAL_CASE, SCALED_ENTRIES), FINE_MESH))
    return s, AuxiliarySolver.solve(s)
