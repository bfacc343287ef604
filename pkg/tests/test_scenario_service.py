import math

import numpy as np
import pytest

from app.exceptions import ScenarioSyntaxError, ScenarioValidationError, CoefficientRangeError
from app.models import AlphaInit, CoefficientKind
from app.services.scenario_service import ScenarioService
from tests.conftest import SPECIAL_CASE, with_entries


def test_parse_special_case(special_scenario):
    s = special_scenario
    assert s.m == 1.0 and s.hbar == 1.0
    assert s.omega_spec.kind == CoefficientKind.CONST and s.omega_spec.params == (1.0,)
    assert s.lambda_spec.kind == CoefficientKind.LINEAR and s.lambda_spec.params == (1.0,)
    assert (s.t0, s.t1, s.n_steps) == (0.0, 1.0, 1000)
    assert s.alpha_init == AlphaInit.PARTICULAR
    assert s.quantum_n == (0,)
    assert s.grid_L == 12.0 and s.grid_N == 1024 and s.fock_dim == 64
    assert s.stencil == 4
    assert s.interior_dim == 16


def test_entries_on_one_line_and_comments():
    text = "m = 2, hbar = 0.5  # units\nomega = sin_mod(1.0, 0.1, 2.0), lambda = const(0)\n# done\n"
    s = ScenarioService.parse_scenario(text)
    assert s.m == 2.0 and s.hbar == 0.5
    assert s.omega_spec.params == (1.0, 0.1, 2.0)


def test_tolerance_override():
    s = ScenarioService.parse_scenario(SPECIAL_CASE + "tol_tdse = 1e-3\n")
    assert s.tolerances.tdse == 1e-3
    assert s.tolerances.propagation == 1e-4


def test_coefficient_evaluation(special_scenario, sin_mod_scenario):
    assert ScenarioService.eval_omega(special_scenario, 0.7) == 1.0
    assert ScenarioService.eval_lambda(special_scenario, 0.5) == 0.5
    assert ScenarioService.eval_omega(sin_mod_scenario, math.pi / 4) == pytest.approx(1.1, rel=1e-14)
    rate = ScenarioService.eval_coefficient_rate(sin_mod_scenario.omega_spec, 0.3)
    assert rate == pytest.approx(0.1 * 2.0 * math.cos(0.6), rel=1e-14)
    values = ScenarioService.eval_lambda(special_scenario, np.array([0.0, 0.25, 1.0]))
    np.testing.assert_array_equal(values, [0.0, 0.25, 1.0])


def test_evaluation_is_pure(sin_mod_scenario):
    first = ScenarioService.eval_omega(sin_mod_scenario, 0.123)
    for _ in range(3):
        assert ScenarioService.eval_omega(sin_mod_scenario, 0.123) == first


def test_flip_lambda_only_changes_hamiltonian_coupling():
    s = ScenarioService.parse_scenario(SPECIAL_CASE, flip_lambda=True)
    assert s.flip_lambda
    assert ScenarioService.eval_lambda(s, 0.5) == 0.5
    assert ScenarioService.hamiltonian_lambda(s, 0.5) == -0.5


def test_lambda_vanishes(zero_scenario, special_scenario):
    assert ScenarioService.lambda_vanishes(zero_scenario)
    assert not ScenarioService.lambda_vanishes(special_scenario)


def test_non_positive_omega_rejected():
    text = with_entries(SPECIAL_CASE, "omega = const(-1.0)\n")
    with pytest.raises(ScenarioValidationError, match="omega must be positive"):
        ScenarioService.parse_scenario(text)


def test_omega_crossing_zero_reports_time():
    text = with_entries(SPECIAL_CASE, "omega = sin_mod(1.0, 2.0, 6.0)\n")
    with pytest.raises(ScenarioValidationError, match=r"omega must be positive \(omega=.* at t=.*\)"):
        ScenarioService.parse_scenario(text)


@pytest.mark.parametrize("extra, message", [
    ("m = 0\n", "m must be positive"),
    ("hbar = -1\n", "hbar must be positive"),
    ("t = [1, 0]\n", "t1 must exceed t0"),
    ("stencil = 3\n", "stencil must be 2 or 4"),
    ("grid_N = 64\n", "grid_N must be at least 128"),
    ("fock_dim = 8\n", "fock_dim must be at least 16"),
])
def test_invalid_values(extra, message):
    with pytest.raises(ScenarioValidationError, match=message):
        ScenarioService.parse_scenario(with_entries(SPECIAL_CASE, extra))


def test_missing_coefficient():
    with pytest.raises(ScenarioValidationError, match="lambda is required"):
        ScenarioService.parse_scenario("omega = const(1.0)\n")


def test_syntax_error_position():
    text = "m = 1\nomega = const(1.0)\nlambda = const(0)\nfoo = 3\n"
    with pytest.raises(ScenarioSyntaxError) as info:
        ScenarioService.parse_scenario(text)
    assert (info.value.line, info.value.column) == (4, 1)
    assert "unknown key 'foo'" in str(info.value)


@pytest.mark.parametrize("text, fragment", [
    ("m 1\n", "expected 'key = value'"),
    ("omega = cosh(1.0)\nlambda = const(0)\n", "unknown function 'cosh'"),
    ("omega = const(1.0)\nlambda = const(0)\nt = [0, 1\n", "unclosed bracket"),
    ("omega = sin_mod(1.0, 0.1)\nlambda = const(0)\n", "sin_mod takes 3 argument(s)"),
    ("omega = const(1.0)\nlambda = const(0)\nm = 1\nm = 2\n", "duplicate key 'm'"),
    ("omega = const(1.0)\nlambda = const(0)\nsteps = 10.5\n", "steps expects an integer"),
    ("omega = const(1.0)\nlambda = const(0)\nalpha_init = random\n", "alpha_init is 'zero' or 'particular'"),
])
def test_syntax_errors(text, fragment):
    with pytest.raises(ScenarioSyntaxError, match=r"^line \d+, column \d+: ") as info:
        ScenarioService.parse_scenario(text)
    assert fragment in str(info.value)


def test_table_coefficient(tmp_path):
    (tmp_path / "omega.csv").write_text("t,omega\n0,1.0\n1,2.0\n2,2.0\n")
    text = "omega = table(omega.csv)\nlambda = const(0)\n"
    s = ScenarioService.parse_scenario(text, base_dir=tmp_path)
    assert s.omega_spec.kind == CoefficientKind.TABLE
    assert ScenarioService.eval_omega(s, 0.25) == pytest.approx(1.25)
    assert ScenarioService.eval_coefficient_rate(s.omega_spec, 0.5) == pytest.approx(1.0)
    with pytest.raises(CoefficientRangeError):
        ScenarioService.eval_omega(s, 3.0)


def test_table_must_cover_mesh(tmp_path):
    (tmp_path / "omega.csv").write_text("0,1.0\n0.5,1.0\n")
    with pytest.raises(ScenarioValidationError):
        ScenarioService.parse_scenario("omega = table(omega.csv)\nlambda = const(0)\n", base_dir=tmp_path)


def test_serialize_parses_back(sin_mod_scenario):
    s = ScenarioService.parse_scenario(
        SPECIAL_CASE + "save_t = [0, 0.5, 1]\ndt = 0.002\ntol_spectrum = 3e-5\nsigma0 = 0.9\n"
    )
    for scenario in (s, sin_mod_scenario):
        again = ScenarioService.parse_scenario(ScenarioService.serialize_scenario(scenario))
        assert again == scenario


def test_serialize_parses_back_with_table(tmp_path):
    config_dir = tmp_path / "cfgdir"
    config_dir.mkdir()
    (config_dir / "omega.csv").write_text("t,omega\n0,1.0\n1,2.0\n2,2.0\n")
    (config_dir / "run.conf").write_text("omega = table(omega.csv)\nlambda = const(0)\n")
    s = ScenarioService.load_scenario(config_dir / "run.conf")
    again = ScenarioService.parse_scenario(ScenarioService.serialize_scenario(s))
    assert again == s
    assert ScenarioService.eval_omega(again, 0.25) == pytest.approx(1.25)


def test_load_scenario(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(SPECIAL_CASE)
    s = ScenarioService.load_scenario(path)
    assert s.lambda_spec.params == (1.0,)
    with pytest.raises(ScenarioValidationError, match="cannot read config"):
        ScenarioService.load_scenario(tmp_path / "missing.conf")
