"""
Operator Algebra
Truncated Fock-basis matrices for H, rho, eta, h, I_h and I_PH, and the operator
identities between them evaluated as interior-block residuals.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.exceptions import MatrixExpError, EtaPositivityError
from app.models import CheckName
from app.schemas import Scenario, AuxTrace, OpMatrix, ResidualRecord, SimilarityResiduals, Grid
from app.services.grid import spectral_derivative
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

# Scaled matrices have 1-norm at most this before the Taylor core
EXP_THETA = 0.5
EXP_ORDER = 18
EXP_MAX_SQUARINGS = 64
# 1-norm of generators that the truncated exponentials are trusted for
EXP_TRUST_NORM = 30.0


def fock_xp(dim: int, m: float, omega_ref: float, hbar: float) -> Tuple[OpMatrix, OpMatrix]:
    """Position and momentum from ladder operators at reference frequency omega_ref"""
    if dim < 16:
        raise ValueError("Fock dimension must be at least 16")
    if not omega_ref > 0:
        raise ValueError("reference frequency must be positive")
    lower = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    raise_ = lower.T
    x = math.sqrt(hbar / (2.0 * m * omega_ref)) * (lower + raise_)
    p = 1j * math.sqrt(m * hbar * omega_ref / 2.0) * (raise_ - lower)
    return (
        OpMatrix(dim=dim, entries=x, label="X", hermitian=True),
        OpMatrix(dim=dim, entries=p, label="P", hermitian=True),
    )


def expm_array(a: np.ndarray) -> np.ndarray:
    """Scaling and squaring around a truncated Taylor series evaluated by Horner's rule"""
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, 1)
    if not np.isfinite(norm):
        raise MatrixExpError("matrix exponential of a non-finite matrix")
    squarings = 0 if norm <= EXP_THETA else int(math.ceil(math.log2(norm / EXP_THETA)))
    if squarings > EXP_MAX_SQUARINGS:
        raise MatrixExpError(f"norm {norm:.3e} needs more than {EXP_MAX_SQUARINGS} squarings")
    scaled = a / 2.0 ** squarings
    identity = np.eye(a.shape[0], dtype=complex)
    result = identity
    for k in range(EXP_ORDER, 0, -1):
        result = identity + scaled @ result / k
    for _ in range(squarings):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise MatrixExpError(f"matrix exponential overflowed (norm {norm:.3e})")
    return result


def matrix_exp(a: OpMatrix, label: Optional[str] = None) -> OpMatrix:
    return OpMatrix(dim=a.dim, entries=expm_array(a.entries), t=a.t, label=label or f"exp({a.label})")


class OperatorAlgebra:
    """Operators of one scenario in a D-dimensional Fock basis"""

    def __init__(self, s: Scenario, aux: AuxTrace, dim: Optional[int] = None,
                 omega_ref: Optional[float] = None, interior: Optional[int] = None):
        self.s = s
        self.aux = aux
        self.dim = dim or s.fock_dim
        self.omega_ref = omega_ref or ScenarioService.eval_omega(s, s.t0)
        self.interior = interior or (s.interior if dim is None else None) or self.dim // 4
        if not 1 <= self.interior <= self.dim:
            raise ValueError("interior block must fit inside the basis")
        X, P = fock_xp(self.dim, s.m, self.omega_ref, s.hbar)
        self.X = X.entries
        self.P = P.entries
        self.identity = np.eye(self.dim, dtype=complex)

    @property
    def edge_band(self) -> int:
        return self.dim - self.interior

    def _block(self, a: np.ndarray) -> np.ndarray:
        return a[: self.interior, : self.interior]

    def _max(self, a: np.ndarray) -> float:
        return float(np.max(np.abs(self._block(a))))

    def _index(self, t: float) -> int:
        return self.aux.index_of(t)

    def _offset(self, dt: Optional[float]) -> Tuple[int, float]:
        """Mesh steps spanned by a finite-difference step, and the realised step"""
        h = self.aux.step
        dt = dt or self.s.dt_fd or h
        steps = int(round(dt / h))
        if steps < 1 or abs(steps * h - dt) > 1e-9 * dt:
            raise ValueError(f"dt={dt!r} is not a multiple of the mesh step {h!r}")
        return steps, steps * h

    def _neighbours(self, t: float, dt: Optional[float]) -> Tuple[int, int, int, float]:
        k = self._index(t)
        steps, dt = self._offset(dt)
        if k - steps < 0 or k + steps >= self.aux.mesh.shape[0]:
            raise ValueError(f"t={t!r} with dt={dt!r} leaves the auxiliary mesh")
        return k - steps, k, k + steps, dt

    def _wrap(self, entries: np.ndarray, k: int, label: str, hermitian: bool = False) -> OpMatrix:
        return OpMatrix(dim=self.dim, entries=entries, t=float(self.aux.mesh[k]), label=label,
                        hermitian=hermitian)

    # Builders by mesh index

    def _hamiltonian(self, k: int) -> np.ndarray:
        t = float(self.aux.mesh[k])
        omega = ScenarioService.eval_omega(self.s, t)
        lam = ScenarioService.hamiltonian_lambda(self.s, t)
        m = self.s.m
        return self.P @ self.P / (2.0 * m) + 0.5 * m * omega ** 2 * self.X @ self.X + 1j * lam * self.X

    def _oscillator(self, k: int) -> np.ndarray:
        omega = ScenarioService.eval_omega(self.s, float(self.aux.mesh[k]))
        m = self.s.m
        return self.P @ self.P / (2.0 * m) + 0.5 * m * omega ** 2 * self.X @ self.X

    def _generator(self, k: int) -> np.ndarray:
        """G with eta = exp(G) and rho = exp(G/2): G = (-alpha P + m alpha' X)/hbar"""
        return (-self.aux.alpha[k] * self.P + self.s.m * self.aux.alpha_dot[k] * self.X) / self.s.hbar

    def _invariant(self, k: int, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        sigma, sigma_dot = self.aux.sigma[k], self.aux.sigma_dot[k]
        m = self.s.m
        return 0.5 * (
            sigma ** 2 * p @ p
            - m * sigma * sigma_dot * (p @ x + x @ p)
            + (1.0 / sigma ** 2 + m ** 2 * sigma_dot ** 2) * x @ x
        )

    def _Ih(self, k: int) -> np.ndarray:
        return self._invariant(k, self.X, self.P)

    def _IPH(self, k: int) -> np.ndarray:
        x = self.X - 0.5j * self.aux.alpha[k] * self.identity
        p = self.P - 0.5j * self.s.m * self.aux.alpha_dot[k] * self.identity
        return self._invariant(k, x, p)

    def _eta(self, k: int) -> Tuple[np.ndarray, float]:
        """Hermitized eta and log10 of its condition number, certified through the generator"""
        generator = self._generator(k)
        if np.max(np.abs(generator - generator.conj().T)) >= 1e-12:
            raise EtaPositivityError("metric generator is not Hermitian")
        norm = np.linalg.norm(generator, 1)
        if norm > EXP_TRUST_NORM:
            logger.debug("metric generator norm %.2f exceeds the trusted %.0f", norm, EXP_TRUST_NORM)
        eta = expm_array(generator)
        eta = 0.5 * (eta + eta.conj().T)
        if np.any(eta.diagonal().real <= 0):
            raise EtaPositivityError(
                f"truncated eta is not positive at t={self.aux.mesh[k]!r}; increase fock_dim"
            )
        return eta, self._condition(generator)

    @staticmethod
    def _condition(generator: np.ndarray) -> float:
        """log10 of the condition number of exp(G) from the eigenvalue spread of the Hermitian G"""
        spread = np.linalg.eigvalsh(0.5 * (generator + generator.conj().T))
        return float((spread[-1] - spread[0]) / math.log(10.0))

    def _rho(self, k: int, inverse: bool = False) -> np.ndarray:
        sign = -0.5 if inverse else 0.5
        return expm_array(sign * self._generator(k))

    # Public builders

    def build_H(self, t: float) -> OpMatrix:
        k = self._index(t)
        return self._wrap(self._hamiltonian(k), k, "H")

    def build_eta(self, t: float) -> OpMatrix:
        k = self._index(t)
        eta, condition = self._eta(k)
        logger.debug("eta at t=%.6g: log10 cond %.2f", t, condition)
        return self._wrap(eta, k, "eta")

    def build_rho(self, t: float) -> OpMatrix:
        k = self._index(t)
        return self._wrap(self._rho(k), k, "rho")

    def build_Ih(self, t: float) -> OpMatrix:
        k = self._index(t)
        ih = self._Ih(k)
        return self._wrap(0.5 * (ih + ih.conj().T), k, "I_h", hermitian=True)

    def build_IPH(self, t: float) -> OpMatrix:
        k = self._index(t)
        return self._wrap(self._IPH(k), k, "I_PH")

    def build_h(self, t: float, dt: Optional[float] = None) -> OpMatrix:
        """h = rho H rho^-1 + i hbar rho' rho^-1 with rho' by centered difference"""
        before, k, after, dt = self._neighbours(t, dt)
        rho = self._rho(k)
        rho_inv = self._rho(k, inverse=True)
        rho_rate = (self._rho(after) - self._rho(before)) / (2.0 * dt)
        h = rho @ self._hamiltonian(k) @ rho_inv + 1j * self.s.hbar * rho_rate @ rho_inv
        return self._wrap(h, k, "h")

    # Checks

    def _record(self, check: CheckName, t: float, residual: float, dt: Optional[float] = None,
                condition: Optional[float] = None) -> ResidualRecord:
        # rho = exp(G/2) has half the log-condition of eta
        return ResidualRecord(check=check.value, t=t, dim=self.dim, dt=dt, edge_band=self.edge_band,
                              residual=residual, condition_eta=condition,
                              condition_rho=None if condition is None else 0.5 * condition)

    def check_ph_relation(self, t: float, dt: Optional[float] = None) -> ResidualRecord:
        """
        Time-dependent pseudo-Hermiticity H^dagger = eta H eta^-1 + i hbar eta' eta^-1,
        right-multiplied by eta: |H^dagger eta - eta H - i hbar eta'|_I / |eta|_I.
        """
        before, k, after, dt = self._neighbours(t, dt)
        eta, condition = self._eta(k)
        eta_rate = (self._eta(after)[0] - self._eta(before)[0]) / (2.0 * dt)
        hamiltonian = self._hamiltonian(k)
        residual = hamiltonian.conj().T @ eta - eta @ hamiltonian - 1j * self.s.hbar * eta_rate
        value = self._max(residual) / self._max(eta)
        return self._record(CheckName.PH_RELATION, t, value, dt, condition)

    def check_frozen_pseudo_hermiticity(self, t: float) -> ResidualRecord:
        """Static relation H^dagger eta = eta H at frozen t"""
        k = self._index(t)
        eta, condition = self._eta(k)
        hamiltonian = self._hamiltonian(k)
        residual = hamiltonian.conj().T @ eta - eta @ hamiltonian
        return self._record(CheckName.FROZEN_PH, t, self._max(residual) / self._max(eta), None, condition)

    def check_liouville(self, t: float, dt: Optional[float] = None, hermitian: bool = False) -> ResidualRecord:
        """dI/dt = (i/hbar)[I, H] for I_PH and H, or for I_h and h_osc when hermitian=True"""
        before, k, after, dt = self._neighbours(t, dt)
        if hermitian:
            build, generator, check = self._Ih, self._oscillator(k), CheckName.LIOUVILLE_HERMITIAN
        else:
            build, generator, check = self._IPH, self._hamiltonian(k), CheckName.LIOUVILLE
        invariant = build(k)
        rate = (build(after) - build(before)) / (2.0 * dt)
        commutator = invariant @ generator - generator @ invariant
        return self._record(check, t, self._max(rate - 1j / self.s.hbar * commutator), dt)

    def check_similarity(self, t: float, dt: Optional[float] = None) -> SimilarityResiduals:
        """
        res_invariant: rho I_PH rho^-1 against I_h
        res_hamiltonian: anti-Hermitian part of h = rho H rho^-1 + i hbar rho' rho^-1
        res_rho_h: rho H rho^-1 against its explicit expansion
        """
        before, k, after, dt = self._neighbours(t, dt)
        rho = self._rho(k)
        rho_inv = self._rho(k, inverse=True)
        res_invariant = self._max(rho @ self._IPH(k) @ rho_inv - self._Ih(k))

        transformed = rho @ self._hamiltonian(k) @ rho_inv
        rho_rate = (self._rho(after) - self._rho(before)) / (2.0 * dt)
        h = transformed + 1j * self.s.hbar * rho_rate @ rho_inv
        res_hamiltonian = self._max(h - h.conj().T)

        m = self.s.m
        omega = ScenarioService.eval_omega(self.s, t)
        lam = ScenarioService.hamiltonian_lambda(self.s, t)
        alpha, alpha_dot = self.aux.alpha[k], self.aux.alpha_dot[k]
        explicit = (
            self.P @ self.P / (2.0 * m)
            + 0.5 * m * omega ** 2 * self.X @ self.X
            + 1j * (lam + m * alpha * omega ** 2 / 2.0) * self.X
            + 0.5j * alpha_dot * self.P
            - (m * alpha_dot ** 2 / 8.0 + m * alpha ** 2 * omega ** 2 / 8.0 + alpha * lam / 2.0) * self.identity
        )
        res_rho_h = self._max(transformed - explicit)
        return SimilarityResiduals(t=t, res_invariant=res_invariant, res_hamiltonian=res_hamiltonian,
                                   res_rho_h=res_rho_h,
                                   condition_rho=0.5 * self._condition(self._generator(k)))

    def spectrum(self, label: str, t: float, count: Optional[int] = None) -> np.ndarray:
        """Lowest eigenvalues (sorted by real part) of I_h, I_PH, H or the interior block of h"""
        count = count or self.interior
        if count > self.interior:
            raise ValueError("only interior eigenvalues are reported")
        k = self._index(t)
        if label == "I_h":
            return np.linalg.eigvalsh(self.build_Ih(t).entries)[:count].astype(complex)
        if label == "I_PH":
            values = np.linalg.eigvals(self._IPH(k))
        elif label == "H":
            values = np.linalg.eigvals(self._hamiltonian(k))
        elif label == "h":
            values = np.linalg.eigvals(self._block(self.build_h(t).entries))
        else:
            raise ValueError(f"unknown operator {label!r}")
        return values[np.argsort(values.real)][:count]

    @staticmethod
    def apply_Ih_grid(values: np.ndarray, grid: Grid, sigma: float, sigma_dot: float,
                      m: float = 1.0, hbar: float = 1.0) -> np.ndarray:
        """I_h on grid samples with p = -i hbar d/dx by spectral derivatives"""
        x = grid.points()
        first = spectral_derivative(values, grid)
        second = spectral_derivative(values, grid, order=2)
        p_squared = -hbar ** 2 * second
        symmetrised = -1j * hbar * (values + 2.0 * x * first)
        return 0.5 * (
            sigma ** 2 * p_squared
            - m * sigma * sigma_dot * symmetrised
            + (1.0 / sigma ** 2 + m ** 2 * sigma_dot ** 2) * x * x * values
        )
