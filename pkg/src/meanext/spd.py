"""Symmetric positive-definite matrices as an element domain.

All kernels act on stacks of shape ``(..., d, d)`` and go through
``numpy.linalg.eigh``; every matrix product is re-symmetrized.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .engine import ConvergenceConfig, ElementDomain, extend_mean_batch
from .errors import ConfigurationError, DomainError, PreconditionError
from .means import TwoVarMean

MAX_DIMENSION = 64
SYMMETRY_TOL = 1e-12
DEFINITENESS_TOL = 1e-12
OPERATOR_KINDS = ("arithmetic", "harmonic", "geometric")


def symmetrize(A):
    return (A + np.swapaxes(A, -1, -2)) / 2.0


def _check_spd(A, what="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"{what} must be square, got shape {A.shape}")
    d = A.shape[0]
    if not 1 <= d <= MAX_DIMENSION:
        raise DomainError(f"{what} has dimension {d}; supported range is 1..{MAX_DIMENSION}")
    if not np.isfinite(A).all():
        raise DomainError(f"{what} has non-finite entries")
    asym = np.abs(A - A.T) > SYMMETRY_TOL * (1.0 + np.abs(A))
    if asym.any():
        i, j = np.argwhere(asym)[0]
        raise DomainError(f"{what} is not symmetric: A[{i},{j}]={A[i, j]!r} vs A[{j},{i}]={A[j, i]!r}")
    w = np.linalg.eigvalsh(A)
    if not w[0] > DEFINITENESS_TOL * abs(w[-1]) or w[-1] <= 0:
        raise DomainError(f"{what} is not positive definite: smallest eigenvalue {w[0]!r}, largest {w[-1]!r}")
    return symmetrize(A)


class SpdMatrix:
    """Validated, immutable dense SPD matrix."""

    __slots__ = ("_data",)

    def __init__(self, entries):
        data = _check_spd(entries)
        data.setflags(write=False)
        self._data = data

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dimension(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self):
        return f"SpdMatrix({self._data.tolist()})"

    def __eq__(self, other):
        return isinstance(other, SpdMatrix) and np.array_equal(self._data, other._data)

    __hash__ = None


def _arr(A):
    return A.data if isinstance(A, SpdMatrix) else _check_spd(A)


def _spectral(A, f):
    w, V = np.linalg.eigh(A)
    return symmetrize((V * f(w)[..., None, :]) @ np.swapaxes(V, -1, -2))


def spd_add(A, B) -> SpdMatrix:
    return SpdMatrix(_arr(A) + _arr(B))


def spd_scale(A, c: float) -> SpdMatrix:
    if not c > 0:
        raise DomainError(f"scale factor must be positive to keep positivity, got {c}")
    return SpdMatrix(c * _arr(A))


def spd_inverse(A) -> SpdMatrix:
    return SpdMatrix(_spectral(_arr(A), lambda w: 1.0 / w))


def spd_sqrt(A) -> SpdMatrix:
    return SpdMatrix(_spectral(_arr(A), np.sqrt))


def spd_norm(A) -> float:
    """Operator (spectral) norm: the largest eigenvalue magnitude."""
    return float(np.abs(np.linalg.eigvalsh(np.asarray(A, dtype=float))).max())


@dataclass(frozen=True)
class OperatorMean:
    kind: str

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ConfigurationError(f"unknown operator mean {self.kind!r}; expected one of {OPERATOR_KINDS}")

    @property
    def name(self):
        return self.kind

    def __call__(self, A, B):
        """Batched evaluation on stacks of SPD matrices."""
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if self.kind == "arithmetic":
            return symmetrize((A + B) / 2.0)
        if self.kind == "harmonic":
            inv_sum = _spectral(A, lambda w: 1.0 / w) + _spectral(B, lambda w: 1.0 / w)
            return 2.0 * _spectral(inv_sum, lambda w: 1.0 / w)
        # A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}
        w, V = np.linalg.eigh(A)
        Vt = np.swapaxes(V, -1, -2)
        root = symmetrize((V * np.sqrt(w)[..., None, :]) @ Vt)
        inv_root = symmetrize((V * (1.0 / np.sqrt(w))[..., None, :]) @ Vt)
        inner = symmetrize(inv_root @ B @ inv_root)
        return symmetrize(root @ _spectral(inner, np.sqrt) @ root)


def as_operator_mean(mean) -> OperatorMean:
    if isinstance(mean, OperatorMean):
        return mean
    if isinstance(mean, TwoVarMean) and mean.kind in OPERATOR_KINDS:
        return OperatorMean(mean.kind)
    raise ConfigurationError(f"no operator version of mean {getattr(mean, 'name', mean)!r}")


def eval_operator_mean(mean, A, B) -> SpdMatrix:
    A, B = _arr(A), _arr(B)
    if A.shape != B.shape:
        raise ConfigurationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return SpdMatrix(as_operator_mean(mean)(A, B))


def loewner_leq(A, B, tol: float = 0.0) -> bool:
    """``A <= B`` in the Loewner order, up to ``tol`` relative to ``||B||``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ConfigurationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    lam = np.linalg.eigvalsh(symmetrize(B - A))[0]
    return bool(lam >= -tol * spd_norm(B))


class SpdDomain(ElementDomain):
    """Stacks of SPD matrices; spread is the largest pairwise operator-norm distance."""

    name = "spd"
    ordered = False
    default_tolerance = 1e-10

    def mean(self, mean, a, b):
        out = as_operator_mean(mean)(a, b)
        lam = np.linalg.eigvalsh(out)[..., 0]
        if not (lam > 0).all():
            raise DomainError(f"operator mean produced a non-positive-definite matrix (eigenvalue {lam.min()!r})")
        return out

    def distance(self, a, b) -> float:
        return spd_norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))

    def spread(self, X):
        n = X.shape[1]
        i, j = np.triu_indices(n, 1)
        diffs = X[:, i] - X[:, j]
        return np.abs(np.linalg.eigvalsh(diffs)).max(axis=(1, 2))

    def magnitude(self, X):
        return np.linalg.eigvalsh(X)[..., -1].max(axis=1)

    def stack(self, inputs):
        mats = [m.data if isinstance(m, SpdMatrix) else _check_spd(m, f"matrix {k}") for k, m in enumerate(inputs)]
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise ConfigurationError(f"matrices must share one dimension, got {sorted(shapes)}")
        return np.stack(mats)

    def element(self, arr):
        return SpdMatrix(arr)


_SPD = SpdDomain()


def spd_domain() -> SpdDomain:
    return _SPD


# --------------------------------------------------------------------------
# Equal-norm sandwich verification
# --------------------------------------------------------------------------

def default_upper(t):
    return 1.0 + 2.0 ** (-t)


def default_lower(t):
    return 1.0 - 2.0 ** (-t - 1)


@dataclass(frozen=True)
class SandwichConfig:
    """``upper(t) >= 1`` scales X_1 up and ``lower(t) <= 1`` scales it down; both tend to 1."""

    t_max: int = 30
    upper: object = default_upper
    lower: object = default_lower
    engine: ConvergenceConfig = field(default_factory=lambda: ConvergenceConfig(tolerance=1e-12))
    loewner_tolerance: float = 1e-10

    def __post_init__(self):
        if self.t_max < 0:
            raise ConfigurationError("t_max must be non-negative")
        prev_hi, prev_lo = np.inf, 0.0
        for t in range(self.t_max + 1):
            hi, lo = self.upper(t), self.lower(t)
            if not (hi >= 1.0 and 0.0 < lo <= 1.0):
                raise ConfigurationError(f"schedule at t={t} gives a_t={hi}, a'_t={lo}; need a_t >= 1 >= a'_t > 0")
            if hi > prev_hi or lo < prev_lo:
                raise ConfigurationError(f"schedule is not monotone toward 1 at t={t}")
            prev_hi, prev_lo = hi, lo


@dataclass
class SandwichReport:
    mean: str
    norm: str
    t: list
    upper_factors: list
    lower_factors: list
    limit: np.ndarray
    upper_limits: list  # limit of the run with X_1 scaled by upper(t)
    lower_limits: list
    converged: bool
    lower_verdicts: list  # lower limit <= unperturbed limit
    upper_verdicts: list  # unperturbed limit <= upper limit
    gaps: list  # ||upper limit - lower limit||
    relative_gaps: list

    @property
    def all_verdicts(self) -> bool:
        return all(self.lower_verdicts) and all(self.upper_verdicts)

    def gaps_nonincreasing(self, slack: float = 0.0) -> bool:
        return all(b <= a + slack for a, b in zip(self.relative_gaps, self.relative_gaps[1:]))

    def to_dict(self):
        return {
            "mean": self.mean,
            "norm": self.norm,
            "converged": self.converged,
            "limit": self.limit.tolist(),
            "rows": [
                {
                    "t": t,
                    "a_t": hi,
                    "a_prime_t": lo,
                    "lower_leq_limit": lv,
                    "limit_leq_upper": uv,
                    "gap": g,
                    "relative_gap": rg,
                }
                for t, hi, lo, lv, uv, g, rg in zip(self.t, self.upper_factors, self.lower_factors,
                                                    self.lower_verdicts, self.upper_verdicts,
                                                    self.gaps, self.relative_gaps)
            ],
        }


def sandwich_verify(mean, inputs, config: SandwichConfig = None) -> SandwichReport:
    """Bracket the neighbor iteration on equal-norm matrices by rescaling the first input.

    For each t the runs on (a_t X_1, X_2, ...) and (a'_t X_1, X_2, ...) should
    have limits Loewner-below and -above the unperturbed one, with their gap
    shrinking as t grows.
    """
    config = config or SandwichConfig()
    mean = as_operator_mean(mean)
    X = _SPD.stack(inputs)
    if X.shape[0] < 2:
        raise PreconditionError("sandwich verification needs at least two matrices")
    norms = np.linalg.eigvalsh(X)[:, -1]
    if np.abs(norms - norms[0]).max() > 1e-10 * norms.max():
        raise PreconditionError(f"inputs must share one operator norm; got {norms.tolist()}")

    ts = list(range(config.t_max + 1))
    ups = [float(config.upper(t)) for t in ts]
    lows = [float(config.lower(t)) for t in ts]
    rows = [X]
    for c in ups + lows:
        Y = X.copy()
        Y[0] = c * X[0]
        rows.append(Y)
    res = extend_mean_batch(mean, rows, "neighbor", config.engine, _SPD)
    limit = res.values[0]
    T = len(ts)
    upper = res.values[1:T + 1]
    lower = res.values[T + 1:]
    tol = config.loewner_tolerance
    scale = spd_norm(limit)
    gaps = [spd_norm(u - l) for u, l in zip(upper, lower)]
    return SandwichReport(
        mean=mean.name,
        norm="operator",
        t=ts,
        upper_factors=ups,
        lower_factors=lows,
        limit=limit,
        upper_limits=list(upper),
        lower_limits=list(lower),
        converged=bool(res.converged.all()),
        lower_verdicts=[loewner_leq(l, limit, tol) for l in lower],
        upper_verdicts=[loewner_leq(limit, u, tol) for u in upper],
        gaps=gaps,
        relative_gaps=[g / scale for g in gaps],
    )


# --------------------------------------------------------------------------
# JSON file format: {"dimension": d, "matrices": [[d*d row-major reals], ...]}
# --------------------------------------------------------------------------

def parse_matrices(doc) -> list:
    if not isinstance(doc, dict) or "dimension" not in doc or "matrices" not in doc:
        raise DomainError('matrix document needs "dimension" and "matrices" keys')
    d = doc["dimension"]
    if not isinstance(d, int) or not 1 <= d <= MAX_DIMENSION:
        raise DomainError(f'"dimension" must be an integer in 1..{MAX_DIMENSION}, got {d!r}')
    out = []
    for k, flat in enumerate(doc["matrices"]):
        if not isinstance(flat, list) or len(flat) != d * d:
            raise DomainError(f"matrix {k}: expected {d * d} row-major entries")
        try:
            A = np.array(flat, dtype=float).reshape(d, d)
        except (TypeError, ValueError):
            raise DomainError(f"matrix {k}: entries must be real numbers") from None
        try:
            out.append(SpdMatrix(A))
        except DomainError as exc:
            raise DomainError(f"matrix {k}: {exc}") from None
    return out


def load_matrices(path) -> list:
    with open(Path(path)) as fh:
        return parse_matrices(json.load(fh))


def dump_matrices(matrices) -> dict:
    mats = [np.asarray(m, dtype=float) for m in matrices]
    d = mats[0].shape[0] if mats else 0
    return {"dimension": d, "matrices": [m.reshape(-1).tolist() for m in mats]}
