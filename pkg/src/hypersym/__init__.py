"""Symmetrizer-based energy toolkit for weakly hyperbolic first-order systems.

Subpackages cover pointwise matrix analysis of principal symbols, hyperbolic
polynomial root splitting, Lyapunov symmetrizer construction and verification,
a 1-D periodic Fourier pseudodifferential engine, a spectrally truncated
Cauchy solver with energy diagnostics, and exact-arithmetic parameter
planning.
"""

from hypersym.coeffs import SystemCoefficients
from hypersym.planner import plan
from hypersym.presets import get_preset, preset_names

__version__ = "0.1.0"

__all__ = ["SystemCoefficients", "plan", "get_preset", "preset_names", "__version__"]
