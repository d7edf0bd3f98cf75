"""Closed-form n-variable arithmetic, geometric and harmonic means.

These are independent of the iteration engine and serve as its ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, PreconditionError


def _positive(inputs):
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("expected a non-empty flat sequence of positive reals")
    if not (np.isfinite(x) & (x > 0)).all():
        raise DomainError(f"all inputs must be finite and positive, got {x.tolist()}")
    return x


def arithmetic_n(inputs) -> float:
    x = _positive(inputs)
    return float(np.sum(x) / x.size)


def geometric_n(inputs) -> float:
    # Mean of logarithms: no overflow of the raw product.
    x = _positive(inputs)
    return float(np.exp(np.mean(np.log(x))))


def harmonic_n(inputs) -> float:
    x = _positive(inputs)
    return float(x.size / np.sum(1.0 / x))


@dataclass(frozen=True)
class TraceEndpoints:
    x1k: float
    xnk: float
    k: int


def arithmetic_trace_endpoints(sorted_inputs, k: int) -> TraceEndpoints:
    """Smallest and largest element after ``k`` variation steps of the arithmetic mean.

    Uses the explicit parity formula over ``(n-1)**k``::

        k even: x1 = (S*((n-1)^k - 1)/n + x_1) / (n-1)^k,  xn likewise with +x_n
        k odd:  x1 = (S*((n-1)^k + 1)/n - x_n) / (n-1)^k,  xn likewise with -x_1

    where S is the sum of the inputs.  The integer coefficients are formed
    exactly so large ``k`` does not lose precision before the division.
    """
    x = _positive(sorted_inputs)
    if (np.diff(x) < 0).any():
        raise PreconditionError("arithmetic_trace_endpoints needs inputs sorted ascending")
    if k < 0:
        raise PreconditionError(f"k must be non-negative, got {k}")
    n = x.size
    if n < 2:
        raise PreconditionError("need at least two inputs")
    first, last = Fraction(float(x[0])), Fraction(float(x[-1]))
    total = sum(Fraction(float(v)) for v in x)
    scale = (n - 1) ** k
    if k % 2 == 0:
        coef = Fraction(scale - 1, n)
        x1 = (coef * total + first) / scale
        xn = (coef * total + last) / scale
    else:
        coef = Fraction(scale + 1, n)
        x1 = (coef * total - last) / scale
        xn = (coef * total - first) / scale
    return TraceEndpoints(float(x1), float(xn), k)
