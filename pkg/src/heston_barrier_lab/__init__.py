"""Strong-approximation experiments for the log-Heston SDE."""

from .model import HestonParams, RegimeError, cir_marginal_moments, feller_index, preset

__version__ = "0.1.0"

__all__ = [
    "HestonParams",
    "RegimeError",
    "cir_marginal_moments",
    "feller_index",
    "preset",
    "__version__",
]
