"""
State Service
Builds eigenfunctions of the pseudo-Hermitian invariant, their real phases, the
exact Schrodinger solutions, eta inner products and the eta-mean of H.
"""
import logging
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.schemas import Scenario, AuxTrace, Grid, WaveSample, PhaseTrace, MeanEnergy, PhaseReality
from app.services.grid import scenario_grid, inner, integrate, spectral_derivative, check_edge_decay
from app.services.scenario_service import ScenarioService
from app.services.special_functions import eigenfunction_Ih

logger = logging.getLogger(__name__)


def _cumulative_integral(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid with the Euler-Maclaurin endpoint correction"""
    base = cumulative_trapezoid(values, dx=h, initial=0.0)
    slope = np.gradient(values, h, edge_order=2)
    return base - h * h / 12.0 * (slope - slope[0])


class StateService:
    """Closed-form states of the non-Hermitian oscillator"""

    @staticmethod
    def rho_inverse_apply(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, alpha: float,
                          alpha_dot: float, m: float, hbar: float) -> np.ndarray:
        """
        Apply rho^-1 = exp[(alpha p - m alpha' x)/(2 hbar)] to a function given as a
        callable of complex position:
            exp[i m alpha alpha'/(8 hbar)] exp[-m alpha' x/(2 hbar)] func(x - i alpha/2)
        """
        scalar = np.exp(1j * m * alpha * alpha_dot / (8.0 * hbar))
        return scalar * np.exp(-m * alpha_dot * x / (2.0 * hbar)) * func(x - 0.5j * alpha)

    @staticmethod
    def invariant_eigenfunction(n: int, s: Scenario, aux: AuxTrace, t_index: int,
                                grid: Optional[Grid] = None) -> np.ndarray:
        """Eigenfunction of the Hermitian invariant I_h at mesh index t_index"""
        grid = grid or scenario_grid(s)
        return eigenfunction_Ih(
            n, grid.points(), aux.sigma[t_index], aux.sigma_dot[t_index], s.m, s.hbar
        )

    @staticmethod
    def phi_PH(n: int, s: Scenario, aux: AuxTrace, t_index: int,
               grid: Optional[Grid] = None) -> WaveSample:
        """Eigenfunction of the pseudo-Hermitian invariant, rho^-1 applied to psi_n"""
        grid = grid or scenario_grid(s)
        sigma, sigma_dot = aux.sigma[t_index], aux.sigma_dot[t_index]
        values = StateService.rho_inverse_apply(
            lambda z: eigenfunction_Ih(n, z, sigma, sigma_dot, s.m, s.hbar),
            grid.points(),
            aux.alpha[t_index],
            aux.alpha_dot[t_index],
            s.m,
            s.hbar,
        )
        check_edge_decay(values, f"phi_{n} at t={aux.mesh[t_index]!r}")
        return WaveSample(grid=grid, values=values, t=float(aux.mesh[t_index]), n=n)

    @staticmethod
    def phase(n: int, s: Scenario, aux: AuxTrace) -> PhaseTrace:
        """Real phase: -(n+1/2) int 1/(m sigma^2) + int lambda alpha/(4 hbar)"""
        h = aux.step
        invariant_rate = -(n + 0.5) / (s.m * aux.sigma ** 2)
        metric_rate = ScenarioService.eval_lambda(s, aux.mesh) * aux.alpha / (4.0 * s.hbar)
        part_invariant = _cumulative_integral(invariant_rate, h)
        part_metric = _cumulative_integral(metric_rate, h)
        return PhaseTrace(
            n=n,
            mesh=aux.mesh,
            eps=part_invariant + part_metric,
            part_invariant=part_invariant,
            part_metric=part_metric,
        )

    @staticmethod
    def solution_Phi(n: int, s: Scenario, aux: AuxTrace, t_index: int, grid: Optional[Grid] = None,
                     phase_trace: Optional[PhaseTrace] = None) -> WaveSample:
        """Exact solution exp(i eps_n) phi_n of the non-Hermitian Schrodinger equation"""
        phase_trace = phase_trace or StateService.phase(n, s, aux)
        phi = StateService.phi_PH(n, s, aux, t_index, grid)
        values = np.exp(1j * phase_trace.eps[t_index]) * phi.values
        return phi.model_copy(update={"values": values})

    @staticmethod
    def superpose(coefficients: Dict[int, complex], s: Scenario, aux: AuxTrace, t_index: int,
                  grid: Optional[Grid] = None) -> WaveSample:
        """Finite linear combination sum_n c_n Phi_n"""
        if not coefficients:
            raise ValueError("superposition needs at least one mode")
        grid = grid or scenario_grid(s)
        values = np.zeros(grid.N, dtype=complex)
        for n, c in coefficients.items():
            values += c * StateService.solution_Phi(n, s, aux, t_index, grid).values
        return WaveSample(grid=grid, values=values, t=float(aux.mesh[t_index]), n="superposition")

    @staticmethod
    def eta_inner(m_idx: int, n_idx: int, s: Scenario, aux: AuxTrace, t_index: int,
                  grid: Optional[Grid] = None) -> complex:
        """<phi_m|eta|phi_n> through the similarity route <psi_m|psi_n>"""
        grid = grid or scenario_grid(s)
        bra = StateService.invariant_eigenfunction(m_idx, s, aux, t_index, grid)
        ket = StateService.invariant_eigenfunction(n_idx, s, aux, t_index, grid)
        return inner(bra, ket, grid)

    @staticmethod
    def mean_H_eta(n: int, s: Scenario, aux: AuxTrace, t_index: int,
                   grid: Optional[Grid] = None) -> MeanEnergy:
        """<psi_n| rho H rho^-1 |psi_n> by quadrature, with the closed form alongside"""
        grid = grid or scenario_grid(s)
        x = grid.points()
        t = float(aux.mesh[t_index])
        sigma, sigma_dot = aux.sigma[t_index], aux.sigma_dot[t_index]
        alpha, alpha_dot = aux.alpha[t_index], aux.alpha_dot[t_index]
        omega = ScenarioService.eval_omega(s, t)
        lam = ScenarioService.hamiltonian_lambda(s, t)
        m, hbar = s.m, s.hbar

        psi = StateService.invariant_eigenfunction(n, s, aux, t_index, grid)
        dpsi = spectral_derivative(psi, grid)
        density = np.abs(psi) ** 2
        kinetic = hbar ** 2 / (2.0 * m) * integrate(np.abs(dpsi) ** 2, grid)
        potential = 0.5 * m * omega ** 2 * integrate(x * x * density, grid)
        first_moment = integrate(x * density, grid)
        momentum = inner(psi, -1j * hbar * dpsi, grid)
        constant = m * alpha_dot ** 2 / 8.0 + m * alpha ** 2 * omega ** 2 / 8.0 + alpha * lam / 2.0

        value = (kinetic + potential + 1j * (lam + m * alpha * omega ** 2 / 2.0) * first_moment
                 + 0.5j * alpha_dot * momentum - constant)
        formula = (0.5 * hbar * (n + 0.5) * (m * sigma_dot ** 2 + m * omega ** 2 * sigma ** 2
                                             + 1.0 / (m * sigma ** 2)) - constant)
        return MeanEnergy(n=n, t=t, value=float(value.real), imaginary=float(value.imag),
                          closed_form=float(formula))

    @staticmethod
    def check_phase_reality(n: int, s: Scenario, aux: AuxTrace, grid: Optional[Grid] = None,
                            max_samples: int = 200) -> PhaseReality:
        """
        Evaluate the phase integrand <psi_n|(i hbar d/dt - h)|psi_n>/hbar at interior
        mesh times, with d/dt by centered differences, and compare its real part
        with the closed-form rate of the phase.
        """
        grid = grid or scenario_grid(s)
        x = grid.points()
        h = aux.step
        last = aux.mesh.shape[0] - 1
        stride = max(1, (last - 1) // max_samples)
        indices = range(1, last, stride)
        m, hbar = s.m, s.hbar

        max_imag = 0.0
        max_dev = 0.0
        for k in indices:
            before = StateService.invariant_eigenfunction(n, s, aux, k - 1, grid)
            psi = StateService.invariant_eigenfunction(n, s, aux, k, grid)
            after = StateService.invariant_eigenfunction(n, s, aux, k + 1, grid)
            t = float(aux.mesh[k])
            omega = ScenarioService.eval_omega(s, t)
            lam = ScenarioService.eval_lambda(s, t)

            time_term = inner(psi, 1j * hbar * (after - before) / (2.0 * h), grid)
            dpsi = spectral_derivative(psi, grid)
            oscillator = (hbar ** 2 / (2.0 * m) * integrate(np.abs(dpsi) ** 2, grid)
                          + 0.5 * m * omega ** 2 * integrate(x * x * np.abs(psi) ** 2, grid))
            integrand = (time_term - oscillator + aux.alpha[k] * lam / 4.0) / hbar
            rate = -(n + 0.5) / (m * aux.sigma[k] ** 2) + lam * aux.alpha[k] / (4.0 * hbar)

            max_imag = max(max_imag, abs(integrand.imag))
            max_dev = max(max_dev, abs(integrand.real - rate))

        logger.debug("phase reality n=%d: max|Im|=%.3e max|dRe|=%.3e", n, max_imag, max_dev)
        return PhaseReality(n=n, max_imag=max_imag, max_real_deviation=max_dev, samples=len(indices))
