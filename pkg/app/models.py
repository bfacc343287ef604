"""
Shared vocabularies.
"""
import enum


class CoefficientKind(str, enum.Enum):
    CONST = "const"
    LINEAR = "linear"
    SIN_MOD = "sin_mod"
    TABLE = "table"


class AlphaInit(str, enum.Enum):
    ZERO = "zero"
    PARTICULAR = "particular"


class CheckName(str, enum.Enum):
    PH_RELATION = "ph_relation"
    FROZEN_PH = "frozen_pseudo_hermiticity"
    LIOUVILLE = "liouville"
    LIOUVILLE_HERMITIAN = "liouville_hermitian"
    SIMILARITY_INVARIANT = "similarity_invariant"
    SIMILARITY_HAMILTONIAN = "similarity_hamiltonian"
    H_HERMITICITY = "h_hermiticity"
    SPECTRUM = "spectrum"
    SPECTRUM_IMAG = "spectrum_imag"
    SPECTRUM_CONSTANCY = "spectrum_constancy"
    TDSE = "tdse"
    PROPAGATION = "propagation"
    PROPAGATION_ORDER = "propagation_order"
    ETA_CONSERVATION = "eta_conservation"
    PLAIN_NORM_DRIFT = "plain_norm_drift"
    PHASE_REALITY = "phase_reality"
    PHASE_EXTRACTION = "phase_extraction"
    ETA_ORTHONORMALITY = "eta_orthonormality"


class SweepParam(str, enum.Enum):
    A = "a"
    OMEGA0 = "omega0"
    N = "n"
    DT = "dt"
    GRID_N = "N"
    FOCK_DIM = "fock_dim"
