"""Regularized frozen Gaussian approximation for the semiclassical fractional Schrodinger equation."""
from .config import RunConfig
from .fga import FgaSolution, decompose, propagate, reconstruct, solve
from .grid import Grid, WaveField
from .harness import convergence_sweep, l2_error, run_compare, wkb_initial
from .spectral import run_reference
from .symbols import KineticModel, PotentialModel, SymbolSet

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "FgaSolution",
    "decompose",
    "propagate",
    "reconstruct",
    "solve",
    "Grid",
    "WaveField",
    "convergence_sweep",
    "l2_error",
    "run_compare",
    "wkb_initial",
    "run_reference",
    "KineticModel",
    "PotentialModel",
    "SymbolSet",
]
