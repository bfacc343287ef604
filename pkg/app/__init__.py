"""
Pseudo-Hermitian invariant simulator.

Exact solutions of the time-dependent non-Hermitian oscillator with an
imaginary linear potential, cross-checked by operator algebra in a truncated
Fock basis and by direct Crank-Nicolson propagation on a grid.
"""

__version__ = "1.0.0"
