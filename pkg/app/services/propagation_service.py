"""
Propagation Service
Crank-Nicolson propagation of the non-Hermitian Schrodinger equation on a
uniform grid, the finite-difference residual of closed-form solutions, and the
eta metric applied on the grid as a band-limited Fourier multiplier.
"""
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from app.config import get_settings
from app.exceptions import SpectralCutoffError, NonFiniteError
from app.schemas import Scenario, AuxTrace, Grid, WaveSample, Trajectory
from app.services.grid import integrate, inner, wavenumbers, check_edge_decay
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

# Second-derivative stencils: (centre, +-1, +-2, ...) in units of 1/dx^2
STENCILS = {
    2: (-2.0, 1.0),
    4: (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0),
}

PhiBuilder = Callable[[int, Scenario, AuxTrace, int, Optional[Grid]], WaveSample]


class PropagationService:
    """Grid dynamics oracle, independent of the invariant construction"""

    @staticmethod
    def kinetic_coefficients(grid: Grid, s: Scenario, stencil: Optional[int] = None) -> np.ndarray:
        """Band coefficients of -hbar^2/(2m) d^2/dx^2"""
        stencil = stencil or s.stencil
        if stencil not in STENCILS:
            raise ValueError(f"unknown stencil order {stencil}")
        return -s.hbar ** 2 / (2.0 * s.m * grid.dx ** 2) * np.asarray(STENCILS[stencil])

    @staticmethod
    def _apply_band(coefficients: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Symmetric banded operator with zero (Dirichlet) values beyond the walls"""
        out = coefficients[0] * values
        for d in range(1, coefficients.shape[0]):
            out[:-d] += coefficients[d] * values[d:]
            out[d:] += coefficients[d] * values[:-d]
        return out

    @staticmethod
    def potential(x: np.ndarray, s: Scenario, t: float) -> np.ndarray:
        omega = ScenarioService.eval_omega(s, t)
        lam = ScenarioService.hamiltonian_lambda(s, t)
        return 0.5 * s.m * omega ** 2 * x * x + 1j * lam * x

    @staticmethod
    def apply_H(values: np.ndarray, grid: Grid, s: Scenario, t: float,
                stencil: Optional[int] = None) -> np.ndarray:
        coefficients = PropagationService.kinetic_coefficients(grid, s, stencil)
        values = np.asarray(values, dtype=complex)
        return (PropagationService._apply_band(coefficients, values)
                + PropagationService.potential(grid.points(), s, t) * values)

    @staticmethod
    def plain_norm(psi: WaveSample) -> float:
        return float(integrate(np.abs(psi.values) ** 2, psi.grid))

    @staticmethod
    def l2_distance(a: WaveSample, b: WaveSample) -> float:
        if a.grid != b.grid:
            raise ValueError("states live on different grids")
        return float(np.sqrt(integrate(np.abs(a.values - b.values) ** 2, a.grid)))

    @staticmethod
    def propagate(psi0: WaveSample, s: Scenario, t0: float, t1: float, dt: float, save_every: int = 1,
                  aux: Optional[AuxTrace] = None, stencil: Optional[int] = None) -> Trajectory:
        """
        Crank-Nicolson steps (1 + i dt H(t+dt/2)/(2 hbar)) psi_{k+1} = (1 - i dt H(t+dt/2)/(2 hbar)) psi_k
        solved as a banded system. States are saved every save_every steps and at t1;
        eta norms are filled in when the auxiliary trace is given.
        """
        span = t1 - t0
        steps = int(round(span / dt))
        if steps < 1 or abs(steps * dt - span) > 1e-9 * span:
            raise ValueError(f"dt={dt!r} does not divide [{t0!r}, {t1!r}]")
        if save_every < 1:
            raise ValueError("save_every must be positive")
        grid = psi0.grid
        x = grid.points()
        check_edge_decay(psi0.values, "initial state")

        coefficients = PropagationService.kinetic_coefficients(grid, s, stencil)
        bands = coefficients.shape[0] - 1
        factor = 1j * dt / (2.0 * s.hbar)
        lhs = np.zeros((2 * bands + 1, grid.N), dtype=complex)
        for d in range(1, bands + 1):
            lhs[bands - d, :] = factor * coefficients[d]
            lhs[bands + d, :] = factor * coefficients[d]

        logger.info("propagating %d steps of dt=%.3g on N=%d", steps, dt, grid.N)
        psi = np.array(psi0.values, dtype=complex)
        times: List[float] = [t0]
        states: List[WaveSample] = [psi0]
        for j in range(steps):
            t_mid = t0 + (j + 0.5) * dt
            potential = PropagationService.potential(x, s, t_mid)
            rhs = psi - factor * (PropagationService._apply_band(coefficients, psi) + potential * psi)
            lhs[bands, :] = 1.0 + factor * (coefficients[0] + potential)
            psi = solve_banded((bands, bands), lhs, rhs, check_finite=False)
            if (j + 1) % save_every == 0 or j + 1 == steps:
                t = t0 + (j + 1) * dt
                if not np.all(np.isfinite(psi)):
                    raise NonFiniteError(f"propagated state is not finite at t={t!r}", stage="oracle")
                check_edge_decay(psi, f"propagated state at t={t!r}")
                times.append(t)
                states.append(WaveSample(grid=grid, values=psi, t=t, n=psi0.n))

        plain = [PropagationService.plain_norm(state) for state in states]
        if aux is not None:
            eta = [PropagationService.eta_norm(state, s, aux, t) for state, t in zip(states, times)]
        else:
            eta = [float("nan")] * len(states)
        return Trajectory(times=times, states=states, plain_norm=plain, eta_norm=eta)

    @staticmethod
    def tdse_residual(phi_builder: PhiBuilder, n: int, s: Scenario, aux: AuxTrace, t: float,
                      dt_fd: Optional[float] = None, grid: Optional[Grid] = None,
                      stencil: Optional[int] = None) -> float:
        """|i hbar dPhi/dt - H Phi| / |Phi| on the grid interior, dPhi/dt by centered difference"""
        k = aux.index_of(t)
        h = aux.step
        dt_fd = dt_fd or s.dt_fd or h
        offset = int(round(dt_fd / h))
        if offset < 1 or abs(offset * h - dt_fd) > 1e-9 * dt_fd:
            raise ValueError(f"dt_fd={dt_fd!r} is not a multiple of the mesh step {h!r}")
        if k - offset < 0 or k + offset >= aux.mesh.shape[0]:
            raise ValueError(f"t={t!r} with dt_fd={dt_fd!r} leaves the auxiliary mesh")
        dt_fd = offset * h

        centre = phi_builder(n, s, aux, k, grid)
        before = phi_builder(n, s, aux, k - offset, grid).values
        after = phi_builder(n, s, aux, k + offset, grid).values
        lhs = 1j * s.hbar * (after - before) / (2.0 * dt_fd)
        rhs = PropagationService.apply_H(centre.values, centre.grid, s, float(aux.mesh[k]), stencil)

        band = (stencil or s.stencil) // 2
        inside = slice(band, centre.grid.N - band)
        residual = np.linalg.norm((lhs - rhs)[inside]) / np.linalg.norm(centre.values[inside])
        logger.debug("tdse residual n=%d t=%.6g: %.3e", n, t, residual)
        return float(residual)

    @staticmethod
    def apply_eta(psi: WaveSample, s: Scenario, alpha: float, alpha_dot: float,
                  k_cutoff: Optional[float] = None) -> np.ndarray:
        """
        eta = exp[-alpha p/hbar + m alpha' x/hbar]
            = exp(m alpha' x/hbar) exp(-alpha p/hbar) exp(i m alpha alpha'/(2 hbar))
        with exp(-alpha p/hbar) the multiplier exp(-alpha k) restricted to |k| <= k_cutoff.
        """
        grid = psi.grid
        k = wavenumbers(grid)
        spectrum = np.fft.fft(psi.values)
        amplitude = np.abs(spectrum)
        threshold = get_settings().spectral_threshold * amplitude.max()
        significant = amplitude >= threshold
        if k_cutoff is None:
            k_cutoff = float(np.max(np.abs(k[significant])))
        elif np.any(significant & (np.abs(k) > k_cutoff)):
            raise SpectralCutoffError(
                f"state has content above {get_settings().spectral_threshold:g} of peak beyond |k|={k_cutoff!r}"
            )
        logger.debug("eta multiplier cut-off |k| <= %.3f", k_cutoff)
        with np.errstate(over="ignore", invalid="ignore"):
            multiplier = np.where(np.abs(k) <= k_cutoff, np.exp(-alpha * k), 0.0)
            shifted = np.fft.ifft(multiplier * spectrum)
            result = (np.exp(1j * s.m * alpha * alpha_dot / (2.0 * s.hbar))
                      * np.exp(s.m * alpha_dot * grid.points() / s.hbar) * shifted)
        if not np.all(np.isfinite(result)):
            raise NonFiniteError("eta applied on the grid overflowed", stage="oracle")
        return result

    @staticmethod
    def eta_overlap(bra: WaveSample, ket: WaveSample, s: Scenario, aux: AuxTrace,
                    t: Optional[float] = None, k_cutoff: Optional[float] = None) -> complex:
        """<bra|eta(t)|ket> with eta applied to the ket"""
        k = aux.index_of(ket.t if t is None else t)
        eta_ket = PropagationService.apply_eta(ket, s, aux.alpha[k], aux.alpha_dot[k], k_cutoff)
        return inner(bra.values, eta_ket, ket.grid)

    @staticmethod
    def eta_norm(psi: WaveSample, s: Scenario, aux: AuxTrace, t: Optional[float] = None,
                 k_cutoff: Optional[float] = None) -> float:
        overlap = PropagationService.eta_overlap(psi, psi, s, aux, t, k_cutoff)
        logger.debug("eta norm %.15g (imaginary %.3e)", overlap.real, overlap.imag)
        return float(overlap.real)

    @staticmethod
    def extract_phase(trajectory: Trajectory, n: int, s: Scenario, aux: AuxTrace,
                      phi_builder: PhiBuilder) -> np.ndarray:
        """arg <phi_n(t)|eta|Phi(t)> at every saved time of a trajectory"""
        phases = []
        for state in trajectory.states:
            k = aux.index_of(state.t)
            reference = phi_builder(n, s, aux, k, state.grid)
            phases.append(np.angle(PropagationService.eta_overlap(reference, state, s, aux, state.t)))
        return np.asarray(phases)

    @staticmethod
    def convergence_ratios(psi0: WaveSample, s: Scenario, t1: float, dts: Sequence[float],
                           reference: Optional[WaveSample] = None,
                           stencil: Optional[int] = None) -> List[float]:
        """
        Error ratios under successive dt refinement. Against the reference state when
        given, otherwise between consecutive refinements (self-convergence).
        """
        finals = [
            PropagationService.propagate(psi0, s, psi0.t, t1, dt, save_every=10 ** 9, stencil=stencil).states[-1]
            for dt in dts
        ]
        if reference is not None:
            errors = [PropagationService.l2_distance(state, reference) for state in finals]
        else:
            errors = [PropagationService.l2_distance(a, b) for a, b in zip(finals, finals[1:])]
        logger.debug("propagation errors %s", errors)
        return [a / b for a, b in zip(errors, errors[1:])]
