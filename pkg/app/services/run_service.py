"""
Run Service
End-to-end pipelines behind the CLI and the HTTP API: solve a scenario and
write its artifacts, verify every identity against configured tolerances, and
sweep one parameter across values.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.exceptions import SimulationError, ScenarioValidationError
from app.models import CheckName, CoefficientKind, SweepParam
from app.schemas import Scenario, AuxTrace, CoefficientSpec, ResidualRecord, Verdict, RunReport
from app.services import artifacts
from app.services.auxiliary_solver import AuxiliarySolver
from app.services.grid import scenario_grid
from app.services.operator_algebra import OperatorAlgebra
from app.services.propagation_service import PropagationService
from app.services.scenario_service import ScenarioService
from app.services.state_service import StateService

logger = logging.getLogger(__name__)

# Highest mode index used for the eta-orthonormality table
ORTHONORMALITY_MODES = 6
ORTHONORMALITY_TIMES = 10
SPECTRUM_LEVELS = 8
OBSERVABLE_ROWS = 101
TRAJECTORY_SAVES = 50
# Plain-norm bound when lambda vanishes identically
UNITARY_DRIFT = 1e-8


def _snap(aux: AuxTrace, t: float, margin: int = 0) -> int:
    """Nearest mesh index to t, kept margin steps away from both ends"""
    k = int(round((t - aux.mesh[0]) / aux.step))
    return min(max(k, margin), aux.mesh.shape[0] - 1 - margin)


def _fd_offset(s: Scenario, aux: AuxTrace) -> int:
    dt_fd = s.dt_fd or aux.step
    offset = int(round(dt_fd / aux.step))
    if offset < 1 or abs(offset * aux.step - dt_fd) > 1e-9 * dt_fd:
        raise ScenarioValidationError("dt_fd must be a multiple of the mesh step")
    return offset


class _Timer:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        logger.info("stage %s started", name)
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start
            logger.info("stage %s finished in %.3fs", name, self.timings[name])


class _Verdicts:
    """Collects verdicts; a check that raises becomes a failed verdict naming the stage"""

    def __init__(self, s: Scenario):
        self.tolerances = s.tolerances
        self.items: List[Verdict] = []

    def add(self, check: CheckName, value: float, tolerance: Optional[float] = None,
            passed: Optional[bool] = None, detail: Optional[str] = None) -> None:
        tolerance = getattr(self.tolerances, check.value) if tolerance is None else tolerance
        if passed is None:
            passed = bool(np.isfinite(value) and value < tolerance)
        if not passed:
            logger.warning("check %s FAILED: %.3e against %.1e", check.value, value, tolerance)
        self.items.append(Verdict(check=check.value, tolerance=tolerance, value=float(value),
                                  passed=passed, detail=detail))

    def attempt(self, checks: Sequence[CheckName], func: Callable[[], None]) -> None:
        try:
            func()
        except SimulationError as exc:
            for check in checks:
                self.add(check, math.inf, passed=False, detail=f"{exc.stage}: {exc}")


class RunService:
    """Solve, verify and sweep pipelines"""

    @staticmethod
    def solve(s: Scenario, out_dir: Union[str, Path]) -> RunReport:
        """Auxiliary functions, phases, states at the requested times and the observables table"""
        out = Path(out_dir)
        timer = _Timer()
        written: List[Path] = []
        records: List[ResidualRecord] = []
        rows: List[Dict[str, float]] = []
        verdicts = _Verdicts(s)

        with timer.stage("auxiliary"):
            aux = AuxiliarySolver.solve(s)
            written.append(artifacts.write_aux(out / "aux.csv", aux))
            records.append(ResidualRecord(check="residual_sigma", residual=aux.residual_sigma))
            records.append(ResidualRecord(check="residual_alpha", residual=aux.residual_alpha))

        grid = scenario_grid(s)
        last = aux.mesh.shape[0] - 1
        sample = np.unique(np.round(np.linspace(0, last, min(last + 1, OBSERVABLE_ROWS))).astype(int))
        save_indices = [_snap(aux, t) for t in (s.save_t or (s.t0, s.t1))]

        with timer.stage("states"):
            for n in s.quantum_n:
                trace = StateService.phase(n, s, aux)
                written.append(artifacts.write_phase(out / f"phase_n{n}.csv", trace))
                for k in save_indices:
                    wave = StateService.solution_Phi(n, s, aux, k, grid, trace)
                    written.append(artifacts.write_wave(out / f"wave_n{n}_k{k}.csv", wave))
                norms = []
                for k in sample:
                    k = int(k)
                    wave = StateService.solution_Phi(n, s, aux, k, grid, trace)
                    norm = PropagationService.eta_norm(wave, s, aux, float(aux.mesh[k]))
                    norms.append(norm)
                    rows.append({
                        "n": float(n),
                        "t": float(aux.mesh[k]),
                        "eps_n": float(trace.eps[k]),
                        "mean_H_eta": StateService.mean_H_eta(n, s, aux, k, grid).value,
                        "eta_norm": norm,
                    })
                drift = float(np.max(np.abs(np.asarray(norms) - norms[0])) / norms[0])
                verdicts.add(CheckName.ETA_CONSERVATION, drift, detail=f"n={n}")

        written.append(artifacts.write_csv(
            out / "observables.csv",
            ("n", "t", "eps_n", "mean_H_eta", "eta_norm"),
            ((int(r["n"]), r["t"], r["eps_n"], r["mean_H_eta"], r["eta_norm"]) for r in rows),
        ))
        report = RunReport(
            command="solve",
            scenario=s.model_dump(mode="json"),
            records=records,
            observables=rows,
            verdicts=verdicts.items,
            timings=timer.timings,
            artifacts=[str(p) for p in written],
        )
        artifacts.write_report(out / "report.json", report)
        return report

    @staticmethod
    def verify(s: Scenario, out_dir: Optional[Union[str, Path]] = None) -> RunReport:
        """Run every operator, state and oracle check and judge them against the tolerances"""
        timer = _Timer()
        records: List[ResidualRecord] = []
        verdicts = _Verdicts(s)
        written: List[Path] = []

        with timer.stage("auxiliary"):
            aux = AuxiliarySolver.solve(s)
        offset = _fd_offset(s, aux)
        last = aux.mesh.shape[0] - 1
        if last < 2 * offset:
            raise ScenarioValidationError("time mesh too short for the finite-difference step")
        dt_fd = offset * aux.step
        grid = scenario_grid(s)
        n0 = s.quantum_n[0]
        sweep = np.unique(np.round(np.linspace(offset, last - offset, s.check_points)).astype(int))
        times = [float(aux.mesh[k]) for k in sweep]

        def operator_checks() -> None:
            algebra = OperatorAlgebra(s, aux)
            worst: Dict[CheckName, float] = {}

            def keep(record: ResidualRecord, check: CheckName) -> None:
                records.append(record)
                worst[check] = max(worst.get(check, 0.0), record.residual)

            levels = min(SPECTRUM_LEVELS, algebra.interior)
            expected = s.hbar * (np.arange(levels) + 0.5)
            reference = None
            for t in times:
                keep(algebra.check_ph_relation(t, dt_fd), CheckName.PH_RELATION)
                keep(algebra.check_liouville(t, dt_fd), CheckName.LIOUVILLE)
                keep(algebra.check_liouville(t, dt_fd, hermitian=True), CheckName.LIOUVILLE_HERMITIAN)
                similarity = algebra.check_similarity(t, dt_fd)
                for check, value in (
                    (CheckName.SIMILARITY_INVARIANT, similarity.res_invariant),
                    (CheckName.H_HERMITICITY, similarity.res_hamiltonian),
                    (CheckName.SIMILARITY_HAMILTONIAN, similarity.res_rho_h),
                ):
                    keep(ResidualRecord(check=check.value, t=t, dim=algebra.dim, dt=dt_fd,
                                        edge_band=algebra.edge_band, residual=value,
                                        condition_rho=similarity.condition_rho), check)
                levels_t = algebra.spectrum("I_PH", t, levels)
                reference = levels_t if reference is None else reference
                for check, value in (
                    (CheckName.SPECTRUM_IMAG, float(np.max(np.abs(levels_t.imag)))),
                    (CheckName.SPECTRUM, float(np.max(np.abs(levels_t.real - expected) / expected))),
                    (CheckName.SPECTRUM_CONSTANCY, float(np.max(np.abs(levels_t - reference)))),
                ):
                    keep(ResidualRecord(check=check.value, t=t, dim=algebra.dim,
                                        edge_band=algebra.edge_band, residual=value), check)

            if (aux.alpha[0] == 0.0 and aux.alpha_dot[0] == 0.0
                    and ScenarioService.eval_lambda(s, s.t0) == 0.0):
                records.append(algebra.check_frozen_pseudo_hermiticity(s.t0))
            for check, value in worst.items():
                verdicts.add(check, value)

        def tdse_checks() -> None:
            worst = 0.0
            for n in s.quantum_n:
                for fraction in (0.25, 0.5, 1.0):
                    k = _snap(aux, s.t0 + fraction * (s.t1 - s.t0), offset)
                    t = float(aux.mesh[k])
                    value = PropagationService.tdse_residual(
                        StateService.solution_Phi, n, s, aux, t, dt_fd, grid
                    )
                    records.append(ResidualRecord(check=CheckName.TDSE.value, t=t, n=n, dt=dt_fd,
                                                  residual=value))
                    worst = max(worst, value)
            verdicts.add(CheckName.TDSE, worst)

        def propagation_checks() -> None:
            psi0 = StateService.solution_Phi(n0, s, aux, 0, grid)
            dt = s.dt or aux.step
            interval = max(1, int(round((s.t1 - s.t0) / TRAJECTORY_SAVES / aux.step))) * aux.step
            save_every = int(round(interval / dt))
            if save_every < 1 or abs(save_every * dt - interval) > 1e-9 * interval:
                raise ScenarioValidationError("dt and the mesh step must be commensurate")
            trajectory = PropagationService.propagate(psi0, s, s.t0, s.t1, dt, save_every, aux)
            if out_dir is not None:
                written.extend(artifacts.write_trajectory(Path(out_dir) / "trajectory", trajectory))

            final = trajectory.states[-1]
            reference = StateService.solution_Phi(n0, s, aux, last, grid)
            distance = PropagationService.l2_distance(final, reference)
            records.append(ResidualRecord(check=CheckName.PROPAGATION.value, t=s.t1, n=n0, dt=dt,
                                          residual=distance))
            verdicts.add(CheckName.PROPAGATION, distance)

            span = s.t1 - s.t0
            ratios = PropagationService.convergence_ratios(psi0, s, s.t1, (span / 50, span / 100, span / 200))
            records.append(ResidualRecord(check=CheckName.PROPAGATION_ORDER.value, n=n0, residual=ratios[-1]))
            order_error = abs(ratios[-1] - 4.0)
            verdicts.add(CheckName.PROPAGATION_ORDER, order_error,
                         passed=bool(order_error <= s.tolerances.propagation_order),
                         detail=f"error ratio {ratios[-1]:.4f} per dt halving")

            eta = trajectory.eta_norm
            verdicts.add(CheckName.ETA_CONSERVATION, float(np.max(np.abs(eta - eta[0])) / eta[0]))
            plain = trajectory.plain_norm
            drift = float(np.max(np.abs(plain - plain[0])) / plain[0])
            if ScenarioService.lambda_vanishes(s):
                verdicts.add(CheckName.PLAIN_NORM_DRIFT, drift, tolerance=UNITARY_DRIFT,
                             detail="lambda vanishes: plain norm must be conserved")
            else:
                tolerance = s.tolerances.plain_norm_drift
                verdicts.add(CheckName.PLAIN_NORM_DRIFT, drift, tolerance=tolerance,
                             passed=drift > tolerance,
                             detail="lambda present: plain norm must drift")

            phases = PropagationService.extract_phase(trajectory, n0, s, aux, StateService.phi_PH)
            trace = StateService.phase(n0, s, aux)
            expected = np.array([trace.eps[aux.index_of(t)] for t in trajectory.times])
            mismatch = float(np.max(np.abs(np.angle(np.exp(1j * (phases - expected))))))
            verdicts.add(CheckName.PHASE_EXTRACTION, mismatch)

        def state_checks() -> None:
            worst_imag = 0.0
            for n in s.quantum_n:
                reality = StateService.check_phase_reality(n, s, aux, grid)
                records.append(ResidualRecord(check=CheckName.PHASE_REALITY.value, n=n,
                                              residual=reality.max_imag))
                records.append(ResidualRecord(check="phase_rate", n=n, residual=reality.max_real_deviation))
                worst_imag = max(worst_imag, reality.max_imag)
            verdicts.add(CheckName.PHASE_REALITY, worst_imag)

            worst = 0.0
            for k in np.unique(np.round(np.linspace(0, last, ORTHONORMALITY_TIMES)).astype(int)):
                for m_idx in range(ORTHONORMALITY_MODES + 1):
                    for n_idx in range(ORTHONORMALITY_MODES + 1):
                        value = StateService.eta_inner(m_idx, n_idx, s, aux, int(k), grid)
                        worst = max(worst, abs(value - (1.0 if m_idx == n_idx else 0.0)))
            verdicts.add(CheckName.ETA_ORTHONORMALITY, worst)

        with timer.stage("operators"):
            verdicts.attempt(
                [CheckName.PH_RELATION, CheckName.LIOUVILLE, CheckName.SIMILARITY_INVARIANT], operator_checks
            )
        with timer.stage("states"):
            verdicts.attempt([CheckName.PHASE_REALITY, CheckName.ETA_ORTHONORMALITY], state_checks)
        with timer.stage("oracle"):
            verdicts.attempt([CheckName.TDSE], tdse_checks)
            verdicts.attempt(
                [CheckName.PROPAGATION, CheckName.PROPAGATION_ORDER, CheckName.ETA_CONSERVATION], propagation_checks
            )

        report = RunReport(
            command="verify",
            scenario=s.model_dump(mode="json"),
            records=records,
            verdicts=verdicts.items,
            timings=timer.timings,
        )
        if out_dir is not None:
            out = Path(out_dir)
            written.append(artifacts.write_residuals(out / "residuals.json", records))
            report = report.model_copy(update={"artifacts": [str(p) for p in written]})
            artifacts.write_report(out / "report.json", report)
        logger.info("verify %s", "PASSED" if report.passed else "FAILED")
        return report

    @staticmethod
    def vary(s: Scenario, param: SweepParam, value: float) -> Scenario:
        """Scenario with one sweep parameter replaced"""
        update: Dict[str, object] = {}
        if param == SweepParam.A:
            update["lambda_spec"] = CoefficientSpec(kind=CoefficientKind.LINEAR, params=(value,))
        elif param == SweepParam.OMEGA0:
            spec = s.omega_spec
            if spec.kind == CoefficientKind.SIN_MOD:
                update["omega_spec"] = spec.model_copy(update={"params": (value,) + spec.params[1:]})
            elif spec.kind == CoefficientKind.TABLE:
                raise ScenarioValidationError("omega0 cannot be swept for a table-defined omega")
            else:
                update["omega_spec"] = CoefficientSpec(kind=CoefficientKind.CONST, params=(value,))
        elif param == SweepParam.N:
            update["quantum_n"] = (int(value),)
        elif param == SweepParam.DT:
            update["n_steps"] = int(round((s.t1 - s.t0) / value))
            update["dt"] = value
            update["dt_fd"] = value
        elif param == SweepParam.GRID_N:
            update["grid_N"] = int(value)
        elif param == SweepParam.FOCK_DIM:
            update["fock_dim"] = int(value)
            update["interior"] = s.interior_dim
        return ScenarioService.build_scenario(**{**s.model_dump(), **update})

    @staticmethod
    def sweep(s: Scenario, param: SweepParam, values: Sequence[float], out_dir: Union[str, Path],
              workers: int = 1) -> RunReport:
        """Repeat verification per value and emit a long-format convergence table"""
        out = Path(out_dir)
        timer = _Timer()
        jobs = [(s, param, float(v), str(out / f"{param.value}_{i:03d}")) for i, v in enumerate(values)]
        with timer.stage("sweep"):
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_sweep_point, jobs))
            else:
                results = [_sweep_point(job) for job in jobs]

        rows: List[Tuple[str, float, str, float]] = []
        verdicts: List[Verdict] = []
        for (_, _, value, _), (point_rows, point_verdicts) in zip(jobs, results):
            rows.extend((param.value, value, check, residual) for check, residual in point_rows)
            verdicts.extend(
                v.model_copy(update={"check": f"{v.check}[{param.value}={value:g}]"}) for v in point_verdicts
            )
        path = artifacts.write_csv(out / "sweep.csv", ("param", "value", "check", "residual"), rows)
        report = RunReport(
            command="sweep",
            scenario=s.model_dump(mode="json"),
            verdicts=verdicts,
            timings=timer.timings,
            artifacts=[str(path)],
        )
        artifacts.write_report(out / "report.json", report)
        return report


def _sweep_point(job: Tuple[Scenario, SweepParam, float, str]) -> Tuple[List[Tuple[str, float]], List[Verdict]]:
    """One sweep value: verification maxima per check plus final phase and mean energy per mode"""
    s, param, value, out_dir = job
    variant = RunService.vary(s, param, value)
    report = RunService.verify(variant, out_dir)
    rows: List[Tuple[str, float]] = []
    worst: Dict[str, float] = {}
    for record in report.records:
        worst[record.check] = max(worst.get(record.check, 0.0), record.residual)
    rows.extend(sorted(worst.items()))

    aux = AuxiliarySolver.solve(variant)
    last = aux.mesh.shape[0] - 1
    for n in variant.quantum_n:
        rows.append((f"eps_n{n}", float(StateService.phase(n, variant, aux).eps[last])))
        rows.append((f"mean_H_eta_n{n}", StateService.mean_H_eta(n, variant, aux, last).value))
    return rows, report.verdicts
