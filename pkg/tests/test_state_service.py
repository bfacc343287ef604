import math

import numpy as np
import pytest

from app.exceptions import GridDecayError
from app.schemas import Grid
from app.services.auxiliary_solver import AuxiliarySolver
from app.services.grid import scenario_grid
from app.services.propagation_service import PropagationService
from app.services.scenario_service import ScenarioService
from app.services.state_service import StateService


def test_zero_lambda_eigenfunction_is_oscillator_state(zero_scenario, zero_aux):
    for n in (0, 1, 3):
        phi = StateService.phi_PH(n, zero_scenario, zero_aux, 500)
        psi = StateService.invariant_eigenfunction(n, zero_scenario, zero_aux, 500)
        np.testing.assert_allclose(phi.values, psi, rtol=1e-14, atol=1e-300)


def test_ground_state_closed_form(special_scenario, special_aux):
    grid = Grid(L=12.0, N=1025)
    phi = StateService.phi_PH(0, special_scenario, special_aux, 1000, grid)
    x = grid.points()
    assert x[512] == 0.0
    expected_origin = np.exp(0.5j) * math.pi ** -0.25 * math.exp(0.5)
    assert abs(phi.values[512] - expected_origin) < 1e-12
    closed = np.exp(0.5j) * np.exp(x) * math.pi ** -0.25 * np.exp(-(x + 1j) ** 2 / 2.0)
    np.testing.assert_allclose(phi.values, closed, atol=1e-12)
    assert phi.t == 1.0 and phi.n == 0


def test_rho_inverse_identity_without_metric():
    x = np.linspace(-3.0, 3.0, 7)
    out = StateService.rho_inverse_apply(lambda z: z * z, x, 0.0, 0.0, 1.0, 1.0)
    np.testing.assert_allclose(out, x * x, atol=0)


def test_phase_special_case(special_scenario, special_aux):
    trace = StateService.phase(0, special_scenario, special_aux)
    assert trace.eps[0] == 0.0
    assert trace.eps[-1] == pytest.approx(-2.0 / 3.0, abs=1e-10)
    np.testing.assert_allclose(trace.eps, trace.part_invariant + trace.part_metric, atol=0)
    np.testing.assert_allclose(trace.part_metric, -trace.mesh ** 3 / 6.0, atol=1e-10)


def test_phase_longer_interval():
    s = ScenarioService.parse_scenario(
        "omega = const(1.0)\nlambda = linear(1.0)\nalpha_init = particular\nt = [0, 2]\nsteps = 2000\nn = [3]\n"
    )
    trace = StateService.phase(3, s, AuxiliarySolver.solve(s))
    assert trace.eps[-1] == pytest.approx(-8.3333333333, abs=1e-8)


def test_phase_matches_closed_form_for_other_coupling():
    a, omega0, t, n = 2.0, 1.5, 2.0, 3
    s = ScenarioService.parse_scenario(
        f"omega = const({omega0})\nlambda = linear({a})\nalpha_init = particular\n"
        f"t = [0, {t}]\nsteps = 10000\nn = [{n}]\n"
    )
    trace = StateService.phase(n, s, AuxiliarySolver.solve(s))
    closed = -(n + 0.5) * omega0 * t - a ** 2 * t ** 3 / (6.0 * omega0 ** 2)
    assert abs(trace.eps[-1] - closed) < 1e-9


def test_phase_with_mass_and_hbar(scaled_scenario, scaled_aux):
    m, hbar = scaled_scenario.m, scaled_scenario.hbar
    for n in (0, 1):
        trace = StateService.phase(n, scaled_scenario, scaled_aux)
        closed = -(n + 0.5) * scaled_aux.mesh - scaled_aux.mesh ** 3 / (6.0 * m * hbar)
        np.testing.assert_allclose(trace.eps, closed, atol=1e-10)


def test_zero_lambda_phase(zero_scenario, zero_aux):
    for n in (0, 2):
        trace = StateService.phase(n, zero_scenario, zero_aux)
        np.testing.assert_allclose(trace.eps, -(n + 0.5) * zero_aux.mesh, atol=1e-12)
        assert np.all(trace.part_metric == 0.0)


def test_solution_starts_as_eigenfunction(special_scenario, special_aux):
    phi = StateService.phi_PH(1, special_scenario, special_aux, 0)
    solution = StateService.solution_Phi(1, special_scenario, special_aux, 0)
    np.testing.assert_allclose(solution.values, phi.values, rtol=1e-15)
    later = StateService.solution_Phi(1, special_scenario, special_aux, 700)
    np.testing.assert_allclose(
        np.abs(later.values),
        np.abs(StateService.phi_PH(1, special_scenario, special_aux, 700).values),
        rtol=1e-14,
    )


def test_eta_orthonormality(sin_mod_scenario, sin_mod_aux):
    for k in (0, 333, 1000):
        gram = np.array([
            [StateService.eta_inner(m, n, sin_mod_scenario, sin_mod_aux, k) for n in range(7)]
            for m in range(7)
        ])
        np.testing.assert_allclose(gram, np.eye(7), atol=1e-8)


def test_superposition_eta_norm(special_scenario, special_aux):
    state = StateService.superpose({0: 0.6, 1: 0.8j}, special_scenario, special_aux, 500)
    assert state.n == "superposition"
    norm = PropagationService.eta_norm(state, special_scenario, special_aux)
    assert norm == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        StateService.superpose({}, special_scenario, special_aux, 500)


def test_mean_energy_special_case(special_scenario, special_aux):
    mean = StateService.mean_H_eta(0, special_scenario, special_aux, 1000)
    assert mean.value == pytest.approx(0.5, abs=1e-8)
    assert mean.closed_form == pytest.approx(0.5, abs=1e-10)
    assert abs(mean.imaginary) < 1e-10


def test_mean_energy_without_coupling(zero_scenario, zero_aux):
    for n in (0, 2):
        mean = StateService.mean_H_eta(n, zero_scenario, zero_aux, 400)
        assert mean.value == pytest.approx(n + 0.5, abs=1e-10)


def test_mean_energy_agrees_with_formula(sin_mod_scenario, sin_mod_aux):
    for n in (0, 1, 2):
        mean = StateService.mean_H_eta(n, sin_mod_scenario, sin_mod_aux, 500)
        assert mean.value == pytest.approx(mean.closed_form, rel=1e-6)
        assert abs(mean.imaginary) < 1e-8


def test_mean_energy_with_mass_and_hbar(scaled_scenario, scaled_aux):
    for n in (0, 1):
        mean = StateService.mean_H_eta(n, scaled_scenario, scaled_aux, 1000)
        assert mean.value == pytest.approx(mean.closed_form, rel=1e-6)
        assert abs(mean.imaginary) < 1e-8


def test_phase_reality_special_case(special_scenario, special_aux):
    reality = StateService.check_phase_reality(0, special_scenario, special_aux)
    assert reality.samples > 0
    assert reality.max_imag < 1e-7
    assert reality.max_real_deviation < 1e-6


def test_phase_reality_time_dependent_width(sin_mod_scenario, sin_mod_aux):
    reality = StateService.check_phase_reality(1, sin_mod_scenario, sin_mod_aux, max_samples=40)
    assert reality.max_imag < 1e-6
    assert reality.max_real_deviation < 1e-6


def test_phase_reality_with_mass_and_hbar(scaled_scenario, scaled_aux):
    reality = StateService.check_phase_reality(1, scaled_scenario, scaled_aux, max_samples=40)
    assert reality.max_imag < 1e-6
    assert reality.max_real_deviation < 1e-6


def test_grid_too_small(special_scenario, special_aux):
    with pytest.raises(GridDecayError, match="grid_L"):
        StateService.phi_PH(0, special_scenario, special_aux, 0, Grid(L=2.0, N=256))


def test_default_grid(special_scenario, special_aux):
    phi = StateService.phi_PH(0, special_scenario, special_aux, 10)
    assert phi.grid == scenario_grid(special_scenario)
