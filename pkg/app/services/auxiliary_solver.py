"""
Auxiliary Solver
Integrates the Ermakov equation for sigma(t) and the driven linear equation for
alpha(t) with fixed-step classical Runge-Kutta, and certifies the samples by
finite-difference residuals.
"""
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from app.exceptions import SigmaPositivityError, NonFiniteError
from app.models import AlphaInit
from app.schemas import Scenario, AuxTrace, CoefficientSpec
from app.services.scenario_service import ScenarioService

logger = logging.getLogger(__name__)

# accel(j, x) with j indexing the half-step mesh: j=2k is t_k, j=2k+1 is t_k + h/2
Acceleration = Callable[[int, float], float]


class AuxiliarySolver:
    """RK4 integration of the sigma and alpha equations on the scenario mesh"""

    @staticmethod
    def _half_mesh(s: Scenario) -> np.ndarray:
        return np.linspace(s.t0, s.t1, 2 * s.n_steps + 1)

    @staticmethod
    def _integrate(accel: Acceleration, s: Scenario, x0: float, v0: float,
                   positive: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Classical RK4 for x'' = accel(t, x) written as a first-order system"""
        h = s.step
        half = 0.5 * h
        steps = s.n_steps
        xs = np.empty(steps + 1)
        vs = np.empty(steps + 1)
        x, v = float(x0), float(v0)
        xs[0], vs[0] = x, v
        half_mesh = AuxiliarySolver._half_mesh(s) if positive else None

        for k in range(steps):
            j = 2 * k
            a1 = accel(j, x)
            x2 = x + half * v
            v2 = v + half * a1
            if positive and x2 <= 0:
                raise SigmaPositivityError(float(half_mesh[j + 1]))
            a2 = accel(j + 1, x2)
            x3 = x + half * v2
            v3 = v + half * a2
            if positive and x3 <= 0:
                raise SigmaPositivityError(float(half_mesh[j + 1]))
            a3 = accel(j + 1, x3)
            x4 = x + h * v3
            v4 = v + h * a3
            if positive and x4 <= 0:
                raise SigmaPositivityError(float(half_mesh[j + 2]))
            a4 = accel(j + 2, x4)

            x = x + h * (v + 2.0 * v2 + 2.0 * v3 + v4) / 6.0
            v = v + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
            if not (math.isfinite(x) and math.isfinite(v)):
                raise NonFiniteError(
                    f"non-finite auxiliary value at t={s.t0 + (k + 1) * h!r}", stage="auxiliary"
                )
            if positive and x <= 0:
                raise SigmaPositivityError(float(half_mesh[j + 2]))
            xs[k + 1], vs[k + 1] = x, v
        return xs, vs

    @staticmethod
    def solve_ermakov(s: Scenario, sigma0: float, sigma_dot0: float) -> Tuple[np.ndarray, np.ndarray]:
        """sigma'' + omega^2 sigma = 1/(m^2 sigma^3)"""
        if not sigma0 > 0:
            raise SigmaPositivityError(s.t0)
        w2 = (ScenarioService.eval_omega(s, AuxiliarySolver._half_mesh(s)) ** 2).tolist()
        inv_m2 = 1.0 / (s.m * s.m)

        def accel(j: int, x: float) -> float:
            return -w2[j] * x + inv_m2 / (x * x * x)

        return AuxiliarySolver._integrate(accel, s, sigma0, sigma_dot0, positive=True)

    @staticmethod
    def solve_alpha(s: Scenario, alpha0: float, alpha_dot0: float,
                    lambda_spec: Optional[CoefficientSpec] = None) -> Tuple[np.ndarray, np.ndarray]:
        """m alpha'' + m omega^2 alpha + 2 lambda = 0; the metric always uses the unflipped lambda"""
        half_mesh = AuxiliarySolver._half_mesh(s)
        w2 = (ScenarioService.eval_omega(s, half_mesh) ** 2).tolist()
        lam = ScenarioService.eval_coefficient(lambda_spec or s.lambda_spec, half_mesh)
        drive = (-2.0 * np.asarray(lam) / s.m).tolist()

        def accel(j: int, x: float) -> float:
            return -w2[j] * x + drive[j]

        return AuxiliarySolver._integrate(accel, s, alpha0, alpha_dot0)

    @staticmethod
    def beta(s: Scenario, alpha_dot: np.ndarray) -> np.ndarray:
        """Second metric coefficient, beta = -m alpha'"""
        return -s.m * np.asarray(alpha_dot)

    @staticmethod
    def initial_conditions(s: Scenario) -> Tuple[float, float, float, float]:
        """(sigma0, sigma_dot0, alpha0, alpha_dot0) after applying defaults"""
        omega0 = ScenarioService.eval_omega(s, s.t0)
        sigma0 = s.sigma0 if s.sigma0 is not None else (s.m * omega0) ** -0.5

        alpha0, alpha_dot0 = 0.0, 0.0
        if s.alpha_init == AlphaInit.PARTICULAR:
            # quasi-static particular solution -2 lambda/(m omega^2) and its exact rate
            lam = ScenarioService.eval_lambda(s, s.t0)
            lam_rate = ScenarioService.eval_coefficient_rate(s.lambda_spec, s.t0)
            omega_rate = ScenarioService.eval_coefficient_rate(s.omega_spec, s.t0)
            alpha0 = -2.0 * lam / (s.m * omega0 ** 2)
            alpha_dot0 = -2.0 * lam_rate / (s.m * omega0 ** 2) + 4.0 * lam * omega_rate / (s.m * omega0 ** 3)
        if s.alpha0 is not None:
            alpha0 = s.alpha0
        if s.alpha_dot0 is not None:
            alpha_dot0 = s.alpha_dot0
        return sigma0, s.sigma_dot0, alpha0, alpha_dot0

    @staticmethod
    def residuals(trace: AuxTrace, s: Scenario) -> Tuple[float, float]:
        """Max interior residuals of both equations from centered second differences"""
        mesh = trace.mesh
        if mesh.shape[0] < 3:
            raise ValueError("residuals need at least three mesh points")
        h = trace.step
        inner = mesh[1:-1]
        w2 = ScenarioService.eval_omega(s, inner) ** 2
        lam = ScenarioService.eval_lambda(s, inner)

        with np.errstate(all="ignore"):
            sigma = trace.sigma
            sigma_dd = (sigma[2:] - 2.0 * sigma[1:-1] + sigma[:-2]) / h ** 2
            res_sigma = np.abs(sigma_dd + w2 * sigma[1:-1] - 1.0 / (s.m ** 2 * sigma[1:-1] ** 3))

            alpha = trace.alpha
            alpha_dd = (alpha[2:] - 2.0 * alpha[1:-1] + alpha[:-2]) / h ** 2
            res_alpha = np.abs(s.m * alpha_dd + s.m * w2 * alpha[1:-1] + 2.0 * lam)

        def worst(values: np.ndarray) -> float:
            return float(np.max(values)) if np.all(np.isfinite(values)) else float("inf")

        return worst(res_sigma), worst(res_alpha)

    @staticmethod
    def solve(s: Scenario) -> AuxTrace:
        """Integrate both auxiliary equations and return the certified trace"""
        sigma0, sigma_dot0, alpha0, alpha_dot0 = AuxiliarySolver.initial_conditions(s)
        logger.info("solving auxiliary equations on %d steps", s.n_steps)
        sigma, sigma_dot = AuxiliarySolver.solve_ermakov(s, sigma0, sigma_dot0)
        alpha, alpha_dot = AuxiliarySolver.solve_alpha(s, alpha0, alpha_dot0)
        trace = AuxTrace(
            mesh=ScenarioService.time_mesh(s),
            sigma=sigma,
            sigma_dot=sigma_dot,
            alpha=alpha,
            alpha_dot=alpha_dot,
        )
        res_sigma, res_alpha = AuxiliarySolver.residuals(trace, s)
        logger.debug("auxiliary residuals: sigma=%.3e alpha=%.3e", res_sigma, res_alpha)
        return trace.model_copy(update={"residual_sigma": res_sigma, "residual_alpha": res_alpha})
