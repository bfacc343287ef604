"""
Exception hierarchy.
Every error carries the pipeline stage it was raised in so that the CLI and the
HTTP layer can report where a run failed.
"""
from typing import Optional


class SimulationError(ValueError):
    """Base class for all library errors"""
    stage = "simulation"

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ScenarioSyntaxError(SimulationError):
    """Config text does not follow the grammar"""
    stage = "config"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScenarioValidationError(SimulationError):
    """Config parsed but violates a scenario invariant"""
    stage = "config"


class CoefficientRangeError(SimulationError):
    """Table-interpolated coefficient evaluated outside its samples"""
    stage = "config"


class SigmaPositivityError(SimulationError):
    """Ermakov solution lost positivity"""
    stage = "auxiliary"

    def __init__(self, t: float):
        super().__init__(f"sigma became non-positive at t={t!r}")
        self.t = t


class NonFiniteError(SimulationError):
    """Overflow or NaN in a numerical kernel"""


class HermiteOrderError(SimulationError):
    """Hermite order outside the supported recurrence range"""
    stage = "states"


class GridDecayError(SimulationError):
    """Wavefunction does not vanish at the grid walls"""
    stage = "states"


class SpectralCutoffError(SimulationError):
    """State is not band-limited below the requested wavenumber cut-off"""
    stage = "oracle"


class MatrixExpError(SimulationError):
    """Matrix exponential could not be scaled into its convergence region"""
    stage = "operators"


class EtaPositivityError(SimulationError):
    """Truncated metric is not Hermitian positive"""
    stage = "operators"
