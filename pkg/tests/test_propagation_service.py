import numpy as np
import pytest

from app.exceptions import GridDecayError, SpectralCutoffError
from app.schemas import WaveSample
from app.services.grid import scenario_grid
from app.services.propagation_service import PropagationService
from app.services.state_service import StateService


def test_stationary_state_stays_put(zero_scenario, zero_aux):
    psi0 = StateService.solution_Phi(0, zero_scenario, zero_aux, 0)
    trajectory = PropagationService.propagate(psi0, zero_scenario, 0.0, 1.0, 1e-3, 100, zero_aux)
    assert len(trajectory.states) == 11
    assert np.max(np.abs(trajectory.plain_norm - trajectory.plain_norm[0])) < 1e-8
    final = trajectory.states[-1]
    assert final.t == pytest.approx(1.0)
    assert np.max(np.abs(np.abs(final.values) - np.abs(psi0.values))) < 1e-6
    # without a metric the eta norm is the plain norm
    np.testing.assert_allclose(trajectory.eta_norm, trajectory.plain_norm, atol=1e-12)


def test_propagation_matches_closed_form(special_scenario, special_aux):
    s, aux = special_scenario, special_aux
    psi0 = StateService.solution_Phi(0, s, aux, 0)
    trajectory = PropagationService.propagate(psi0, s, 0.0, 1.0, 2e-4, 5, aux)
    reference = StateService.solution_Phi(0, s, aux, 1000)
    assert PropagationService.l2_distance(trajectory.states[-1], reference) < 1e-4

    plain = trajectory.plain_norm
    assert np.max(np.abs(plain - plain[0])) / plain[0] > 1e-3
    eta = trajectory.eta_norm
    assert eta[0] == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(eta - eta[0])) / eta[0] < 1e-6

    phases = PropagationService.extract_phase(trajectory, 0, s, aux, StateService.phi_PH)
    trace = StateService.phase(0, s, aux)
    expected = np.array([trace.eps[aux.index_of(t)] for t in trajectory.times])
    assert np.max(np.abs(np.angle(np.exp(1j * (phases - expected))))) < 1e-4


def test_crank_nicolson_second_order(special_scenario, special_aux):
    psi0 = StateService.solution_Phi(0, special_scenario, special_aux, 0)
    ratios = PropagationService.convergence_ratios(psi0, special_scenario, 1.0, (0.02, 0.01, 0.005))
    assert len(ratios) == 1
    assert 3.5 <= ratios[0] <= 4.5


def test_tdse_residual_stationary(zero_fine):
    s, aux = zero_fine
    assert PropagationService.tdse_residual(StateService.solution_Phi, 0, s, aux, 0.5, 1e-4) < 1e-6


@pytest.mark.parametrize("n", [0, 1, 2])
@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_tdse_residual_special_case(special_fine, n, t):
    s, aux = special_fine
    assert PropagationService.tdse_residual(StateService.solution_Phi, n, s, aux, t, 1e-4) < 1e-5


@pytest.mark.parametrize("n", [0, 1])
@pytest.mark.parametrize("t", [0.5, 1.0])
def test_tdse_residual_with_mass_and_hbar(scaled_fine, n, t):
    s, aux = scaled_fine
    assert PropagationService.tdse_residual(StateService.solution_Phi, n, s, aux, t, 1e-4) < 1e-5


def test_tdse_residual_time_dependent_frequency(sin_mod_fine):
    s, aux = sin_mod_fine
    assert PropagationService.tdse_residual(StateService.solution_Phi, 0, s, aux, 0.5, 1e-4) < 1e-4


def test_second_order_stencil_is_coarser(special_fine):
    s, aux = special_fine
    fourth = PropagationService.tdse_residual(StateService.solution_Phi, 1, s, aux, 0.5, 1e-4, stencil=4)
    second = PropagationService.tdse_residual(StateService.solution_Phi, 1, s, aux, 0.5, 1e-4, stencil=2)
    assert second > 10 * fourth


def test_flipped_coupling_is_detected(special_flipped):
    s, aux = special_flipped
    assert PropagationService.tdse_residual(StateService.solution_Phi, 0, s, aux, 0.5, 1e-4) > 1e-2
    psi0 = StateService.solution_Phi(0, s, aux, 0)
    trajectory = PropagationService.propagate(psi0, s, 0.0, 1.0, 1e-3, 1000)
    reference = StateService.solution_Phi(0, s, aux, aux.index_of(1.0))
    assert PropagationService.l2_distance(trajectory.states[-1], reference) > 1e-2
    assert np.isnan(trajectory.eta_norm).all()


def test_eta_norm_of_closed_form_solutions(special_scenario, special_aux):
    for n in (0, 1, 2):
        for k in (0, 500, 1000):
            state = StateService.solution_Phi(n, special_scenario, special_aux, k)
            assert PropagationService.eta_norm(state, special_scenario, special_aux) == pytest.approx(1.0, abs=1e-6)
    bra = StateService.solution_Phi(0, special_scenario, special_aux, 500)
    ket = StateService.solution_Phi(1, special_scenario, special_aux, 500)
    assert abs(PropagationService.eta_overlap(bra, ket, special_scenario, special_aux)) < 1e-6


def test_eta_norm_with_mass_and_hbar(scaled_scenario, scaled_aux):
    for n in (0, 1):
        for k in (0, 500, 1000):
            state = StateService.solution_Phi(n, scaled_scenario, scaled_aux, k)
            assert PropagationService.eta_norm(state, scaled_scenario, scaled_aux) == pytest.approx(1.0, abs=1e-6)


def test_explicit_cutoff_must_cover_state(zero_scenario, zero_aux):
    psi = StateService.solution_Phi(0, zero_scenario, zero_aux, 0)
    with pytest.raises(SpectralCutoffError):
        PropagationService.eta_norm(psi, zero_scenario, zero_aux, k_cutoff=1.0)
    assert PropagationService.eta_norm(psi, zero_scenario, zero_aux, k_cutoff=100.0) == pytest.approx(1.0, abs=1e-10)


def test_initial_state_must_decay(zero_scenario):
    grid = scenario_grid(zero_scenario)
    flat = WaveSample(grid=grid, values=np.ones(grid.N), t=0.0, n=0)
    with pytest.raises(GridDecayError):
        PropagationService.propagate(flat, zero_scenario, 0.0, 1.0, 1e-3)


def test_step_must_divide_interval(zero_scenario, zero_aux):
    psi0 = StateService.solution_Phi(0, zero_scenario, zero_aux, 0)
    with pytest.raises(ValueError, match="does not divide"):
        PropagationService.propagate(psi0, zero_scenario, 0.0, 1.0, 0.3)


def test_apply_H_on_ground_state(zero_scenario, zero_aux):
    psi = StateService.solution_Phi(0, zero_scenario, zero_aux, 0)
    applied = PropagationService.apply_H(psi.values, psi.grid, zero_scenario, 0.0)
    inside = slice(2, psi.grid.N - 2)
    error = np.linalg.norm((applied - 0.5 * psi.values)[inside]) / np.linalg.norm(psi.values[inside])
    assert error < 1e-6
