"""Two-variable means on positive reals.

A :class:`TwoVarMean` is a small immutable description (kind + optional
exponent).  Calling it evaluates elementwise on numpy arrays without input
checks, which is what the iteration engine uses in its hot loop;
:func:`eval_mean` is the checked scalar entry point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError

KINDS = ("arithmetic", "geometric", "harmonic", "logarithmic", "power")

# |x - y| <= LOG_SERIES_CUTOFF * max(x, y) switches the logarithmic mean to its
# series around the midpoint.
LOG_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class TwoVarMean:
    """A named two-variable mean.

    ``parameter`` is the exponent ``p`` of a power mean and must be ``None``
    for every other kind.
    """

    kind: str
    parameter: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown mean kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "power":
            if self.parameter is None:
                raise ConfigurationError("power mean requires an exponent p")
            p = float(self.parameter)
            if not math.isfinite(p):
                raise ConfigurationError(f"power mean exponent must be finite, got {p}")
            if p == 0.0:
                raise ConfigurationError("power mean with p=0 is the geometric mean; use kind='geometric'")
            object.__setattr__(self, "parameter", p)
        elif self.parameter is not None:
            raise ConfigurationError(f"{self.kind} mean takes no parameter")

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power:{self.parameter:g}"
        return self.kind

    def __str__(self):
        return self.name

    def __call__(self, x, y):
        """Evaluate elementwise on arrays (or floats) of strictly positive values."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lo = np.minimum(x, y)
        hi = np.maximum(x, y)
        kind = self.kind
        if kind == "arithmetic":
            return (x + y) / 2.0
        if kind == "geometric":
            return np.sqrt(x * y)
        if kind == "harmonic":
            return 2.0 * lo * (hi / (hi + lo))
        if kind == "logarithmic":
            return _logarithmic(lo, hi)
        p = self.parameter
        # Scale by the extreme argument so the powered ratio stays in (0, 1].
        if p > 0:
            return hi * ((1.0 + (lo / hi) ** p) / 2.0) ** (1.0 / p)
        return lo * ((1.0 + (hi / lo) ** p) / 2.0) ** (1.0 / p)


def _logarithmic(lo, hi):
    d = hi - lo
    near = d <= LOG_SERIES_CUTOFF * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        # log(hi) - log(lo) == log1p(d / lo), well conditioned because hi >= lo.
        general = d / np.log1p(d / lo)
    mid = (hi + lo) / 2.0
    u = d / (hi + lo)
    series = mid * (1.0 - u * u / 3.0)
    return np.where(near, series, general)


ARITHMETIC = TwoVarMean("arithmetic")
GEOMETRIC = TwoVarMean("geometric")
HARMONIC = TwoVarMean("harmonic")
LOGARITHMIC = TwoVarMean("logarithmic")
BUILTIN_MEANS = (ARITHMETIC, GEOMETRIC, HARMONIC, LOGARITHMIC)


def power_mean(p: float) -> TwoVarMean:
    return TwoVarMean("power", p)


def eval_mean(mean: TwoVarMean, x: float, y: float) -> float:
    """Evaluate ``mean`` at one pair of strictly positive reals."""
    for name, v in (("x", x), ("y", y)):
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise DomainError(f"{mean.name} mean needs finite positive arguments, got {name}={v!r}")
    return float(mean(float(x), float(y)))


def parse_mean_spec(text: str) -> TwoVarMean:
    """Parse ``arithmetic | geometric | harmonic | logarithmic | power:<p>``."""
    spec = text.strip().lower()
    if spec.startswith("power"):
        head, sep, tail = spec.partition(":")
        if head != "power" or not sep or not tail:
            raise ConfigurationError(f"malformed power mean spec {text!r}; expected power:<p>")
        try:
            p = float(tail)
        except ValueError:
            raise ConfigurationError(f"power mean exponent {tail!r} is not a decimal literal") from None
        return TwoVarMean("power", p)
    if spec not in KINDS:
        raise ConfigurationError(f"unknown mean {text!r}; expected one of {KINDS[:-1]} or power:<p>")
    return TwoVarMean(spec)
