"""Randomized checks of the mean axioms.

Two-variable means are probed for idempotence, symmetry, strict internality,
strict joint monotonicity and continuity.  n-variable evaluators get the
n-variable counterparts: idempotence, permutation invariance, internality,
monotonicity in one coordinate, strict monotonicity in all coordinates and
continuity.  A failed axiom always carries a concrete input that reproduces
the violation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, EvaluatorError

TWO_VAR_AXIOMS = ("idempotence", "symmetry", "internality", "monotonicity", "continuity")
N_VAR_AXIOMS = ("idempotence", "symmetry", "internality", "monotonicity", "strict_monotonicity", "continuity")

DEFAULT_BOX = (1e-3, 1e3)
PROBE_STEPS = (1e-6, 1e-5, 1e-4, 1e-3)
# A continuity probe fails when the change over the smallest step exceeds this
# multiple of the Lipschitz-scaled change over the largest step.
BLOWUP_FACTOR = 100.0


@dataclass
class AxiomResult:
    name: str
    passed: bool
    counterexample: Optional[tuple] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "passed": self.passed,
            "counterexample": None if self.counterexample is None else [_jsonable(c) for c in self.counterexample],
            **self.detail,
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass
class AxiomReport:
    results: dict
    samples: int
    domain_box: tuple
    n: int = 2

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def failed(self):
        return [name for name, r in self.results.items() if not r.passed]

    def __getitem__(self, name) -> AxiomResult:
        return self.results[name]

    def lines(self):
        out = []
        for name, r in self.results.items():
            line = f"{name:<20} {'PASS' if r.passed else 'FAIL'}"
            if not r.passed:
                line += f"  counterexample={[_jsonable(c) for c in r.counterexample]}"
            out.append(line)
        return out

    def to_dict(self):
        return {
            "n": self.n,
            "samples": self.samples,
            "domain_box": list(self.domain_box),
            "passed": self.passed,
            "axioms": {k: v.to_dict() for k, v in self.results.items()},
        }


def _box(domain_box):
    lo, hi = (float(v) for v in domain_box)
    if not (0 < lo < hi and math.isfinite(hi)):
        raise ConfigurationError(f"domain box must satisfy 0 < low < high, got {domain_box}")
    return lo, hi


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


# --------------------------------------------------------------------------
# Two variables
# --------------------------------------------------------------------------

def check_two_var_axioms(mean: Callable, samples: int = 1000, domain_box=DEFAULT_BOX, seed=0,
                         tolerance: float = 1e-12, slack: float = 1e-12) -> AxiomReport:
    """Probe ``mean(x, y)`` on ``samples`` log-uniform random pairs from ``domain_box``.

    ``mean`` may be a :class:`~meanext.means.TwoVarMean` or any scalar callable.
    ``tolerance`` is the relative tolerance of the equality checks and
    ``slack`` the absolute rounding allowance of the strict monotonicity check.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    lo, hi = _box(domain_box)
    rng = np.random.default_rng(seed)

    def f(x, y):
        return float(mean(float(x), float(y)))

    xs = _log_uniform(rng, lo, hi, samples)
    ys = _log_uniform(rng, lo, hi, samples)
    results = {}

    cex = None
    for x in xs:
        if abs(f(x, x) - x) > tolerance * x:
            cex = (x, x)
            break
    results["idempotence"] = AxiomResult("idempotence", cex is None, cex)

    cex = None
    for x, y in zip(xs, ys):
        a, b = f(x, y), f(y, x)
        if abs(a - b) > tolerance * max(abs(a), abs(b)):
            cex = (x, y)
            break
    results["symmetry"] = AxiomResult("symmetry", cex is None, cex)

    cex = None
    for x, y in zip(xs, ys):
        x, y = min(x, y), max(x, y)
        if x == y:
            continue
        v = f(x, y)
        if not (x < v < y):
            cex = (x, y)
            break
    results["internality"] = AxiomResult("internality", cex is None, cex)

    cex = None
    dx = _log_uniform(rng, 1e-6, 1e-1, samples)
    dy = _log_uniform(rng, 1e-6, 1e-1, samples)
    for x, y, a, b in zip(xs, ys, dx, dy):
        x2, y2 = x * (1 + a), y * (1 + b)
        if not f(x, y) < f(x2, y2) + slack:
            cex = (x, y, x2, y2)
            break
    results["monotonicity"] = AxiomResult("monotonicity", cex is None, cex)

    results["continuity"] = _continuity_two_var(f, xs, ys)
    return AxiomReport(results, samples, (lo, hi), n=2)


def _continuity_two_var(f, xs, ys):
    worst = 0.0
    for x, y in zip(xs, ys):
        for first in (True, False):
            base = f(x, y)
            changes = []
            for h in PROBE_STEPS:
                v = f(x * (1 + h), y) if first else f(x, y * (1 + h))
                changes.append(abs(v - base))
            step0 = (x if first else y)
            ratios = [c / (h * step0) for c, h in zip(changes, PROBE_STEPS)]
            if not all(math.isfinite(r) for r in ratios) or _blows_up(changes, 1e-15 * abs(base)):
                return AxiomResult("continuity", False, (x, y, "x" if first else "y"),
                                   {"lipschitz_estimate": max(ratios)})
            worst = max(worst, max(ratios))
    return AxiomResult("continuity", True, None, {"lipschitz_estimate": worst})


def _blows_up(changes, noise):
    # changes[k] is |f(p + h_k) - f(p)| for ascending h_k.
    allowed = BLOWUP_FACTOR * (PROBE_STEPS[0] / PROBE_STEPS[-1]) * changes[-1] + 10.0 * noise
    return changes[0] > allowed


# --------------------------------------------------------------------------
# n variables
# --------------------------------------------------------------------------

def permutations_for(n: int, limit: int = 120, rng=None):
    """All permutations of range(n) when n! <= limit, otherwise ``limit`` sampled ones."""
    if math.factorial(n) <= limit:
        return [list(p) for p in itertools.permutations(range(n))]
    rng = np.random.default_rng(rng)
    return [list(range(n))] + [list(rng.permutation(n)) for _ in range(limit - 1)]


def _evaluate(evaluator, rows):
    rows = np.asarray(rows, dtype=float)
    try:
        return np.asarray(evaluator(rows), dtype=float)
    except Exception as exc:
        for row in rows:
            try:
                evaluator(row[None])
            except Exception as inner:
                raise EvaluatorError(f"evaluator failed on input {row.tolist()}: {inner}", row) from inner
        raise EvaluatorError(f"evaluator failed on a batch of {len(rows)} inputs: {exc}", rows) from exc


def check_n_var_axioms(evaluator: Callable, n: int, samples: int = 200, domain_box=DEFAULT_BOX,
                       tolerance: float = 1e-10, seed=0) -> AxiomReport:
    """Probe an n-variable mean.

    ``evaluator`` maps an ``(m, n)`` array of inputs to the ``m`` mean values
    (see :func:`meanext.engine.make_evaluator`).  Equalities and the
    non-strict inequalities hold within ``tolerance`` relative.
    """
    if n < 3:
        raise ConfigurationError(f"n-variable axiom checks need n >= 3, got {n}")
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    lo, hi = _box(domain_box)
    rng = np.random.default_rng(seed)
    X = _log_uniform(rng, lo, hi, (samples, n))
    base = _evaluate(evaluator, X)
    results = {}

    c = _log_uniform(rng, lo, hi, samples)
    vals = _evaluate(evaluator, np.repeat(c[:, None], n, axis=1))
    bad = np.flatnonzero(np.abs(vals - c) > tolerance * c)
    results["idempotence"] = _verdict("idempotence", bad, lambda i: (np.full(n, c[i]),))

    perms = permutations_for(n, rng=rng)
    permuted = np.concatenate([X[:, p] for p in perms])
    pv = _evaluate(evaluator, permuted).reshape(len(perms), samples)
    dev = np.abs(pv - base[None]) > tolerance * np.abs(base)[None]
    hit = np.argwhere(dev)
    results["symmetry"] = _verdict(
        "symmetry", hit[:, 1] if hit.size else hit, lambda i: (X[i], X[i][perms[hit[0, 0]]]),
        {"permutations": len(perms)})

    mn, mx = X.min(axis=1), X.max(axis=1)
    bad = np.flatnonzero((base < mn - tolerance * mx) | (base > mx + tolerance * mx))
    results["internality"] = _verdict("internality", bad, lambda i: (X[i],))

    coord = rng.integers(0, n, samples)
    Y = X.copy()
    Y[np.arange(samples), coord] *= 1 + _log_uniform(rng, 1e-6, 1e-1, samples)
    yv = _evaluate(evaluator, Y)
    bad = np.flatnonzero(base > yv + tolerance * np.abs(yv))
    results["monotonicity"] = _verdict("monotonicity", bad, lambda i: (X[i], Y[i]))

    Z = X * (1 + _log_uniform(rng, 1e-3, 1e-1, (samples, n)))
    zv = _evaluate(evaluator, Z)
    bad = np.flatnonzero(~(base < zv))
    results["strict_monotonicity"] = _verdict("strict_monotonicity", bad, lambda i: (X[i], Z[i]))

    results["continuity"] = _continuity_n_var(evaluator, X, base, rng, tolerance)
    return AxiomReport(results, samples, (lo, hi), n=n)


def _verdict(name, bad, counterexample, detail=None):
    bad = np.asarray(bad)
    if bad.size == 0:
        return AxiomResult(name, True, None, detail or {})
    return AxiomResult(name, False, counterexample(int(bad[0])), detail or {})


def _continuity_n_var(evaluator, X, base, rng, tolerance):
    m, n = X.shape
    coord = rng.integers(0, n, m)
    probes = []
    for h in PROBE_STEPS:
        P = X.copy()
        P[np.arange(m), coord] *= 1 + h
        probes.append(P)
    pv = _evaluate(evaluator, np.concatenate(probes)).reshape(len(PROBE_STEPS), m)
    changes = np.abs(pv - base[None])
    steps = np.array(PROBE_STEPS)[:, None] * X[np.arange(m), coord][None]
    ratios = changes / steps
    lipschitz = float(np.nanmax(ratios)) if np.isfinite(ratios).all() else math.inf
    for i in range(m):
        col = changes[:, i]
        if not np.isfinite(col).all() or _blows_up(col, tolerance * abs(base[i])):
            return AxiomResult("continuity", False, (X[i], int(coord[i])), {"lipschitz_estimate": lipschitz})
    return AxiomResult("continuity", True, None, {"lipschitz_estimate": lipschitz})
