from typing import Optional, List, Dict, Tuple, Union, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models import CoefficientKind, AlphaInit


def _frozen_array(value, dtype) -> np.ndarray:
    """Copy into a read-only numpy array"""
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


# Scenario Schemas
class CoefficientSpec(BaseModel):
    """Tagged coefficient function for omega(t) or lambda(t)"""
    model_config = ConfigDict(frozen=True)

    kind: CoefficientKind
    params: Tuple[float, ...] = ()
    path: Optional[str] = None
    table_t: Tuple[float, ...] = ()
    table_v: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def check_arity(self):
        arity = {
            CoefficientKind.CONST: 1,
            CoefficientKind.LINEAR: 1,
            CoefficientKind.SIN_MOD: 3,
            CoefficientKind.TABLE: 0,
        }[self.kind]
        if len(self.params) != arity:
            raise ValueError(f"{self.kind.value} takes {arity} argument(s), got {len(self.params)}")
        if not all(np.isfinite(self.params)):
            raise ValueError(f"{self.kind.value} arguments must be finite")
        if self.kind == CoefficientKind.TABLE:
            if len(self.table_t) < 2 or len(self.table_t) != len(self.table_v):
                raise ValueError("table needs at least two (t, value) rows")
            if np.any(np.diff(self.table_t) <= 0):
                raise ValueError("table times must be strictly increasing")
            if not np.all(np.isfinite(self.table_v)):
                raise ValueError("table values must be real and finite")
        return self


class Tolerances(BaseModel):
    """Pass/fail bounds for every verdict, keyed by check name"""
    model_config = ConfigDict(frozen=True)

    ph_relation: float = 1e-5
    liouville: float = 1e-5
    liouville_hermitian: float = 1e-5
    similarity_invariant: float = 1e-6
    similarity_hamiltonian: float = 1e-6
    h_hermiticity: float = 1e-5
    spectrum: float = 1e-5
    spectrum_imag: float = 1e-6
    spectrum_constancy: float = 1e-6
    tdse: float = 1e-5
    propagation: float = 1e-4
    # half-width of the accepted error-ratio window around 4 per dt halving
    propagation_order: float = 0.5
    eta_conservation: float = 1e-6
    plain_norm_drift: float = 1e-3
    phase_reality: float = 1e-6
    phase_extraction: float = 1e-4
    eta_orthonormality: float = 1e-8

    @field_validator("*")
    @classmethod
    def positive(cls, v):
        if not v > 0:
            raise ValueError("tolerances must be positive")
        return v


class Scenario(BaseModel):
    """Physical parameters, coefficient functions and solver settings of one run"""
    model_config = ConfigDict(frozen=True)

    m: float = 1.0
    hbar: float = 1.0
    omega_spec: CoefficientSpec
    lambda_spec: CoefficientSpec
    t0: float = 0.0
    t1: float = 1.0
    n_steps: int = 1000
    quantum_n: Tuple[int, ...] = (0,)

    grid_L: float = 12.0
    grid_N: int = 1024
    fock_dim: int = 64

    sigma0: Optional[float] = None
    sigma_dot0: float = 0.0
    alpha0: Optional[float] = None
    alpha_dot0: Optional[float] = None
    alpha_init: AlphaInit = AlphaInit.ZERO

    dt: Optional[float] = None
    dt_fd: Optional[float] = None
    save_t: Optional[Tuple[float, ...]] = None
    stencil: int = 4
    interior: Optional[int] = None
    check_points: int = 11

    tolerances: Tolerances = Field(default_factory=Tolerances)
    flip_lambda: bool = False

    @field_validator("m")
    @classmethod
    def mass_positive(cls, v):
        if not v > 0:
            raise ValueError("m must be positive")
        return v

    @field_validator("hbar")
    @classmethod
    def hbar_positive(cls, v):
        if not v > 0:
            raise ValueError("hbar must be positive")
        return v

    @field_validator("quantum_n")
    @classmethod
    def modes_non_negative(cls, v):
        if not v or any(n < 0 for n in v):
            raise ValueError("n must be a non-empty list of non-negative integers")
        return v

    @field_validator("sigma0")
    @classmethod
    def sigma0_positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("sigma0 must be positive")
        return v

    @field_validator("stencil")
    @classmethod
    def known_stencil(cls, v):
        if v not in (2, 4):
            raise ValueError("stencil must be 2 or 4")
        return v

    @model_validator(mode="after")
    def check_ranges(self):
        if not self.t1 > self.t0:
            raise ValueError("t1 must exceed t0")
        if self.n_steps < 2:
            raise ValueError("steps must be at least 2")
        if self.grid_L <= 0:
            raise ValueError("grid_L must be positive")
        if self.grid_N < 128:
            raise ValueError("grid_N must be at least 128")
        if self.fock_dim < 16:
            raise ValueError("fock_dim must be at least 16")
        if self.interior is not None and not 1 <= self.interior <= self.fock_dim:
            raise ValueError("interior must lie between 1 and fock_dim")
        if self.check_points < 1:
            raise ValueError("check_points must be at least 1")
        for name in ("dt", "dt_fd"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        return self

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def interior_dim(self) -> int:
        return self.interior if self.interior is not None else self.fock_dim // 4


# Auxiliary Schemas
class AuxTrace(BaseModel):
    """Auxiliary functions sampled on the uniform time mesh"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mesh: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray
    residual_sigma: float = float("nan")
    residual_alpha: float = float("nan")

    @field_validator("mesh", "sigma", "sigma_dot", "alpha", "alpha_dot", mode="before")
    @classmethod
    def as_array(cls, v):
        return _frozen_array(v, float)

    @model_validator(mode="after")
    def check_mesh(self):
        size = self.mesh.shape[0]
        if size < 3:
            raise ValueError("mesh needs at least three points")
        for name in ("sigma", "sigma_dot", "alpha", "alpha_dot"):
            if getattr(self, name).shape != (size,):
                raise ValueError(f"{name} does not match the mesh")
        steps = np.diff(self.mesh)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps.mean())) > 1e-12 * max(1.0, np.max(np.abs(self.mesh))):
            raise ValueError("mesh must be strictly increasing and uniform")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must stay positive")
        return self

    @property
    def step(self) -> float:
        return float(self.mesh[1] - self.mesh[0])

    def index_of(self, t: float) -> int:
        """Mesh index of time t; t must coincide with a mesh point"""
        position = (t - self.mesh[0]) / self.step
        index = int(round(position))
        if abs(position - index) > 1e-6 or not 0 <= index < self.mesh.shape[0]:
            raise ValueError(f"t={t!r} is not a point of the auxiliary mesh")
        return index


# State Schemas
class Grid(BaseModel):
    """Uniform spatial grid on [-L, L]"""
    model_config = ConfigDict(frozen=True)

    L: float = Field(gt=0)
    N: int = Field(ge=128)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.N - 1)

    def points(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.N)


class WaveSample(BaseModel):
    """Complex wavefunction sampled on a grid at one time"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray
    t: float
    n: Union[int, str]

    @field_validator("values", mode="before")
    @classmethod
    def as_array(cls, v):
        return _frozen_array(v, complex)

    @model_validator(mode="after")
    def check_shape(self):
        if self.values.shape != (self.grid.N,):
            raise ValueError("values do not match the grid")
        return self

    @property
    def x(self) -> np.ndarray:
        return self.grid.points()


class PhaseTrace(BaseModel):
    """Cumulative real phase of mode n and its two contributions"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    mesh: np.ndarray
    eps: np.ndarray
    part_invariant: np.ndarray
    part_metric: np.ndarray

    @field_validator("mesh", "eps", "part_invariant", "part_metric", mode="before")
    @classmethod
    def as_array(cls, v):
        return _frozen_array(v, float)


class MeanEnergy(BaseModel):
    """Eta-expectation of H: quadrature value and the closed-form formula"""
    model_config = ConfigDict(frozen=True)

    n: int
    t: float
    value: float
    imaginary: float
    closed_form: float


class PhaseReality(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    max_imag: float
    max_real_deviation: float
    samples: int


# Operator Schemas
class OpMatrix(BaseModel):
    """Dense operator in a truncated Fock basis"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dim: int = Field(ge=16)
    entries: np.ndarray
    t: Optional[float] = None
    label: str
    hermitian: bool = False

    @field_validator("entries", mode="before")
    @classmethod
    def as_array(cls, v):
        return _frozen_array(v, complex)

    @model_validator(mode="after")
    def check_entries(self):
        if self.entries.shape != (self.dim, self.dim):
            raise ValueError(f"{self.label} entries must be {self.dim}x{self.dim}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError(f"{self.label} has non-finite entries")
        if self.hermitian and np.max(np.abs(self.entries - self.entries.conj().T)) >= 1e-12:
            raise ValueError(f"{self.label} is tagged Hermitian but is not")
        return self


class SimilarityResiduals(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    res_invariant: float
    res_hamiltonian: float
    res_rho_h: float
    condition_rho: Optional[float] = None


# Oracle Schemas
class Trajectory(BaseModel):
    """Saved states of a grid propagation with both norms"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: List[WaveSample]
    plain_norm: np.ndarray
    eta_norm: np.ndarray

    @field_validator("times", "plain_norm", "eta_norm", mode="before")
    @classmethod
    def as_array(cls, v):
        return _frozen_array(v, float)

    @model_validator(mode="after")
    def check_times(self):
        if len(self.states) != self.times.shape[0]:
            raise ValueError("one state per saved time is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if len({s.grid for s in self.states}) > 1:
            raise ValueError("states must share one grid")
        return self


# Report Schemas
class ResidualRecord(BaseModel):
    check: str
    t: Optional[float] = None
    n: Optional[int] = None
    dim: Optional[int] = None
    dt: Optional[float] = None
    edge_band: Optional[int] = None
    residual: float
    condition_eta: Optional[float] = None
    condition_rho: Optional[float] = None


class Verdict(BaseModel):
    check: str
    tolerance: float
    value: float
    passed: bool
    detail: Optional[str] = None


class RunReport(BaseModel):
    command: str
    scenario: Dict[str, Any]
    records: List[ResidualRecord] = []
    observables: List[Dict[str, float]] = []
    verdicts: List[Verdict] = []
    timings: Dict[str, float] = {}
    artifacts: List[str] = []

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


# API Schemas
class ScenarioRequest(BaseModel):
    config_text: str


class RunRequest(BaseModel):
    config_text: str
    out_dir: Optional[str] = None
    flip_lambda: bool = False


class RunResponse(BaseModel):
    passed: bool
    report: RunReport
