"""
Grid helpers shared by the state builders and the propagation oracle.
"""
import numpy as np
from scipy.integrate import trapezoid

from app.exceptions import GridDecayError
from app.schemas import Grid, Scenario

# Amplitude bound at both walls for every sampled state
EDGE_DECAY = 1e-10


def scenario_grid(s: Scenario) -> Grid:
    return Grid(L=s.grid_L, N=s.grid_N)


def integrate(values: np.ndarray, grid: Grid):
    """Trapezoid quadrature over the whole grid"""
    return trapezoid(values, dx=grid.dx)


def inner(bra: np.ndarray, ket: np.ndarray, grid: Grid) -> complex:
    """<bra|ket> by trapezoid quadrature"""
    return complex(integrate(np.conj(bra) * ket, grid))


def wavenumbers(grid: Grid) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(grid.N, d=grid.dx)


def spectral_derivative(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """d^order/dx^order through the FFT; states vanish at the walls so periodic wrap is harmless"""
    k = wavenumbers(grid)
    return np.fft.ifft((1j * k) ** order * np.fft.fft(values))


def check_edge_decay(values: np.ndarray, what: str, edge: int = 2) -> None:
    """Raise unless |values| is below the decay bound on the outer points at both walls"""
    walls = np.abs(np.concatenate([values[:edge], values[-edge:]]))
    worst = float(np.max(walls))
    if not worst < EDGE_DECAY:
        raise GridDecayError(f"{what} reaches the grid wall (|psi|={worst:.3e}); enlarge grid_L")
