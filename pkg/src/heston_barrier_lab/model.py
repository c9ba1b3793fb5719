"""Log-Heston model parameters and closed-form CIR marginal statistics.

The variance follows the square-root (CIR) diffusion

    dV = kappa (theta - V) dt + sigma sqrt(V) dW

and the log-price

    dX = (mu - V/2) dt + sqrt(V) (rho dW + sqrt(1 - rho^2) dB)

with W, B independent Brownian motions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

PARAM_KEYS = ("mu", "kappa", "theta", "sigma", "rho", "x0", "v0", "T")
PRESET_NAMES = ("high", "unit", "low")


class RegimeError(ValueError):
    """Raised when an operation's model hypotheses (e.g. nu > 1/2) fail."""


@dataclass(frozen=True)
class HestonParams:
    mu: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    x0: float
    v0: float
    T: float

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma", "v0", "T"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho!r}")
        for name in ("mu", "x0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def nu(self) -> float:
        return feller_index(self)

    @property
    def rho_bar(self) -> float:
        """sqrt(1 - rho^2), the loading of B in the price noise."""
        return math.sqrt(max(1.0 - self.rho * self.rho, 0.0))

    @property
    def lamperti_drift(self) -> float:
        """Coefficient kappa*theta/2 - sigma^2/8 of 1/U in the drift of U = sqrt(V)."""
        return 0.5 * self.kappa * self.theta - self.sigma**2 / 8.0

    def with_overrides(self, **overrides) -> "HestonParams":
        clean = {k: float(v) for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    def as_dict(self) -> dict:
        return asdict(self)

    def require_lamperti(self) -> None:
        """Reject parameter sets outside nu > 1/2."""
        if not self.nu > 0.5:
            raise RegimeError(
                f"operation requires Feller index nu > 1/2, got nu = {self.nu:.6g}"
            )

    def require_imperfect_correlation(self) -> None:
        if abs(self.rho) >= 1.0:
            raise RegimeError(f"operation requires |rho| != 1, got rho = {self.rho!r}")


def feller_index(p: HestonParams) -> float:
    """Return nu = 2 kappa theta / sigma^2."""
    return 2.0 * p.kappa * p.theta / p.sigma**2


def cir_marginal_moments(p: HestonParams, t):
    """Mean and variance of V_t given V_0 = v0.

    Accepts scalar or array ``t``; ``t = np.inf`` gives the stationary moments.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    e1 = np.exp(-p.kappa * t)
    mean = p.theta + (p.v0 - p.theta) * e1
    var = (p.v0 * p.sigma**2 / p.kappa) * (e1 - e1 * e1) + (
        p.theta * p.sigma**2 / (2.0 * p.kappa)
    ) * (1.0 - e1) ** 2
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def parse_params(text: str, base: HestonParams | None = None) -> HestonParams:
    """Parse ``key=value`` lines (``#`` comments allowed) into parameters.

    Keys missing from ``text`` are taken from ``base``.
    """
    values = base.as_dict() if base is not None else {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS:
            raise ValueError(f"line {lineno}: unknown parameter {key!r}")
        values[key] = float(value)
    missing = [k for k in PARAM_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing parameters: {', '.join(missing)}")
    return HestonParams(**{f.name: values[f.name] for f in fields(HestonParams)})


def load_params(path: str | Path, base: HestonParams | None = None) -> HestonParams:
    return parse_params(Path(path).read_text(), base)


def preset(name: str) -> HestonParams:
    """Load one of the shipped parameter presets ('high', 'unit', 'low')."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    text = resources.files(__package__).joinpath("presets", f"{name}.cfg").read_text()
    return parse_params(text)
