"""Iterative extension of a two-variable mean to n variables.

Three update rules are provided, all synchronous (X^{k+1} is computed from
X^k only):

``variation``
    slot i receives the (n-1)-variable mean of every element except the i-th.
``neighbor``
    on a vector sorted once at k=0: slot 0 gets M(x0, x1), the last slot gets
    M(x[n-2], x[n-1]) and every other slot i gets M(x[i-1], x[i+1]).
``cycle``
    a Hamiltonian cycle on the n slots plus a bijection sending each cycle
    edge {j, l} to a target slot i that receives M(x_j, x_l).

States are stored as stacked arrays of shape ``(m, n, *element_shape)`` so
``m`` independent runs advance together; the single-run API is a batch of one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError, PreconditionError
from .means import TwoVarMean

# Lower bound for the denominator of the relative spread.
TINY = 1e-300
# Relative slack used by internal sortedness checks.
ORDER_SLACK = 1e-13


class ElementDomain:
    """What the engine needs to know about the elements it averages.

    Subclasses work on stacked arrays: ``X`` has shape ``(m, n, *shape)``.
    """

    name = "abstract"
    ordered = False
    default_tolerance = 1e-12

    def mean(self, mean, a, b):
        """Batched two-variable mean of equally shaped stacks ``a`` and ``b``."""
        raise NotImplementedError

    def distance(self, a, b) -> float:
        raise NotImplementedError

    def spread(self, X) -> np.ndarray:
        """Per-row spread of ``X``; zero exactly for constant rows."""
        raise NotImplementedError

    def magnitude(self, X) -> np.ndarray:
        """Per-row size of the largest element, used to make the spread relative."""
        raise NotImplementedError

    def stack(self, inputs) -> np.ndarray:
        """Validate user inputs and return an array of shape ``(n, *shape)``."""
        raise NotImplementedError

    def element(self, arr) -> Any:
        """Convert one stored element back to its user-facing form."""
        return arr

    def relative_spread(self, X) -> np.ndarray:
        return self.spread(X) / np.maximum(self.magnitude(X), TINY)


class ScalarDomain(ElementDomain):
    """Strictly positive reals."""

    name = "scalar"
    ordered = True
    default_tolerance = 1e-12

    def mean(self, mean, a, b):
        return mean(a, b)

    def distance(self, a, b) -> float:
        return abs(float(a) - float(b))

    def spread(self, X):
        return X.max(axis=1) - X.min(axis=1)

    def magnitude(self, X):
        return np.abs(X).max(axis=1)

    def stack(self, inputs):
        arr = np.asarray(inputs, dtype=float)
        if arr.ndim != 1:
            raise DomainError(f"scalar inputs must be a flat sequence, got shape {arr.shape}")
        bad = ~(np.isfinite(arr) & (arr > 0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(f"input {i} = {float(arr[i])!r} is not a finite positive real")
        return arr

    def element(self, arr):
        return float(arr)


SCALARS = ScalarDomain()


@dataclass(frozen=True)
class ConvergenceConfig:
    tolerance: Optional[float] = None  # None: the domain default
    max_iterations: int = 10_000
    capture_trace: bool = False

    def __post_init__(self):
        if self.tolerance is not None and not (self.tolerance > 0):
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def tolerance_for(self, domain: ElementDomain) -> float:
        return domain.default_tolerance if self.tolerance is None else self.tolerance


@dataclass
class IterationState:
    elements: np.ndarray  # shape (n, *element_shape)
    step: int = 0

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=float)
        if self.elements.ndim < 1 or self.elements.shape[0] < 2:
            raise ConfigurationError("an iteration state needs at least two elements")

    @property
    def n(self) -> int:
        return self.elements.shape[0]


class CycleMapping:
    """A Hamiltonian cycle on ``n`` slots plus an edge -> target-slot bijection.

    ``cycle`` lists the vertices (0-based) in cycle order; ``assignment`` maps
    each cycle edge, given as a frozenset ``{j, l}``, to the slot it updates.
    """

    def __init__(self, cycle: Sequence[int], assignment: dict):
        cycle = tuple(int(v) for v in cycle)
        n = len(cycle)
        if n < 3:
            raise ConfigurationError(f"a cycle mapping needs n >= 3, got {n}")
        if sorted(cycle) != list(range(n)):
            raise ConfigurationError(f"cycle {cycle} must visit each of 0..{n - 1} exactly once")
        edges = {frozenset((cycle[e], cycle[(e + 1) % n])) for e in range(n)}
        assignment = {frozenset(int(v) for v in k): int(t) for k, t in assignment.items()}
        if set(assignment) != edges:
            raise ConfigurationError("assignment keys must be exactly the edges of the cycle")
        if sorted(assignment.values()) != list(range(n)):
            raise ConfigurationError("assignment must be a bijection from edges onto slots 0..n-1")
        self.n = n
        self.cycle = cycle
        self.assignment = assignment
        left = np.empty(n, dtype=np.intp)
        right = np.empty(n, dtype=np.intp)
        for edge, target in assignment.items():
            j, l = sorted(edge)
            left[target], right[target] = j, l
        self.left = left
        self.right = right

    @classmethod
    def from_edges(cls, cycle, targets):
        """Build from ``targets[e]`` = slot updated by the e-th edge along ``cycle``."""
        n = len(cycle)
        return cls(cycle, {frozenset((cycle[e], cycle[(e + 1) % n])): targets[e] for e in range(n)})

    def edges(self):
        """``(j, l, target)`` triples ordered by target slot."""
        return [(int(self.left[i]), int(self.right[i]), i) for i in range(self.n)]

    def to_dict(self):
        return {"n": self.n, "cycle": list(self.cycle), "edges": [list(e) for e in self.edges()]}

    def __eq__(self, other):
        return isinstance(other, CycleMapping) and self.cycle == other.cycle and self.assignment == other.assignment

    def __hash__(self):
        return hash((self.cycle, frozenset(self.assignment.items())))

    def __repr__(self):
        return f"CycleMapping(cycle={self.cycle}, edges={self.edges()})"


def neighbor_as_cycle(n: int) -> CycleMapping:
    """The cycle mapping under which :func:`step_cycle` equals :func:`step_neighbor`.

    The neighbor rule's pairs {0,1}, {i-1,i+1}, {n-2,n-1} trace the cycle
    0, 1, 3, 5, ..., (evens descending), 2, 0.
    """
    if n < 3:
        raise ConfigurationError(f"neighbor_as_cycle needs n >= 3, got {n}")
    cycle = [0] + list(range(1, n, 2)) + list(range(2, n, 2))[::-1]
    left, right = _neighbor_indices(n)
    assignment = {frozenset((int(left[i]), int(right[i]))): i for i in range(n)}
    return CycleMapping(cycle, assignment)


def random_cycle_mapping(n: int, rng=None) -> CycleMapping:
    """Uniform random Hamiltonian cycle with a uniform random edge -> slot bijection."""
    rng = np.random.default_rng(rng)
    cycle = [int(v) for v in rng.permutation(n)]
    targets = [int(t) for t in rng.permutation(n)]
    return CycleMapping.from_edges(cycle, targets)


def _neighbor_indices(n: int):
    left = np.array([0] + list(range(0, n - 2)) + [n - 2], dtype=np.intp)
    right = np.array([1] + list(range(2, n)) + [n - 1], dtype=np.intp)
    if n == 2:
        left, right = np.array([0, 0]), np.array([1, 1])
    return left, right


# --------------------------------------------------------------------------
# Update rules on stacked arrays
# --------------------------------------------------------------------------

def _gather(X, idx):
    if idx.ndim == 1:
        return X[:, idx]
    return X[np.arange(X.shape[0])[:, None], idx]


class _PairRule:
    """Slot i <- M(x[left[i]], x[right[i]]); indices shared (n,) or per row (m, n)."""

    def __init__(self, left, right, sort_first=False):
        self.left = left
        self.right = right
        self.sort_first = sort_first

    def prepare(self, domain, X):
        if self.sort_first and domain.ordered:
            X = np.sort(X, axis=1)
        return X

    def __call__(self, mean, domain, X, rows):
        left, right = self.left, self.right
        if left.ndim == 2:
            left, right = left[rows], right[rows]
        return domain.mean(mean, _gather(X, left), _gather(X, right))


# Nested runs are held ten times tighter than their caller, but never below a
# few ulps: deeper nesting would ask for a spread the arithmetic cannot reach.
_TOLERANCE_FLOOR = 4 * np.finfo(float).eps


def _inner_tolerance(tol):
    return max(tol / 10.0, _TOLERANCE_FLOOR)


class _VariationRule:
    """Slot i <- M_{n-1}(all elements but the i-th).

    M_{n-1} comes from an inner neighbor run, or from a nested variation run
    when ``recursive`` is set (down to n-1 = 3, where the two coincide).
    """

    def __init__(self, tolerance, max_iterations, recursive=False, depth=1):
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.recursive = recursive
        self.depth = depth

    def prepare(self, domain, X):
        return X

    def __call__(self, mean, domain, X, rows):
        m, n = X.shape[:2]
        omit = np.array([[j for j in range(n) if j != i] for i in range(n)], dtype=np.intp)
        V = X[:, omit].reshape((m * n, n - 1) + X.shape[2:])
        if n - 1 == 2:
            out = domain.mean(mean, V[:, 0], V[:, 1])
            return out.reshape(X.shape)
        if self.recursive and n - 1 > 3:
            inner_rule = _VariationRule(_inner_tolerance(self.tolerance), self.max_iterations, True, self.depth + 1)
        else:
            inner_rule = _neighbor_rule(n - 1)
        inner = _run(mean, domain, V, inner_rule, self.tolerance, self.max_iterations)
        if not inner.converged.all():
            bad = int(np.flatnonzero(~inner.converged)[0])
            raise ConvergenceError(
                f"inner {n - 1}-variable extension at depth {self.depth} did not reach relative "
                f"spread {self.tolerance:g} within {self.max_iterations} steps",
                depth=self.depth,
                sub_input=V[bad],
            )
        return inner.values.reshape(X.shape)


def _neighbor_rule(n):
    left, right = _neighbor_indices(n)
    return _PairRule(left, right, sort_first=True)


def _cycle_rule(mappings, n):
    if isinstance(mappings, CycleMapping):
        mappings = [mappings]
    for mp in mappings:
        if mp.n != n:
            raise PreconditionError(f"cycle mapping for n={mp.n} used on {n} elements")
    if len(mappings) == 1:
        return _PairRule(mappings[0].left, mappings[0].right)
    return _PairRule(np.stack([mp.left for mp in mappings]), np.stack([mp.right for mp in mappings]))


# --------------------------------------------------------------------------
# Batched runner
# --------------------------------------------------------------------------

@dataclass
class BatchResult:
    """Outcome of ``m`` independent extension runs advanced together.

    Histories have one row per step (row 0 is the initial state); a run that
    has converged is frozen, so its later history rows repeat its final values.
    """

    values: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    initial: np.ndarray
    final: np.ndarray
    spread_history: np.ndarray
    rel_spread_history: np.ndarray
    min_history: Optional[np.ndarray] = None
    max_history: Optional[np.ndarray] = None
    trace: Optional[list] = None

    def __len__(self):
        return self.values.shape[0]


def _run(mean, domain, X0, rule, tolerance, max_iterations, capture_trace=False, lockstep=False):
    X = rule.prepare(domain, np.array(X0, dtype=float))
    m = X.shape[0]
    rel = domain.relative_spread(X)
    converged = rel <= tolerance
    iterations = np.zeros(m, dtype=int)
    spreads = [domain.spread(X)]
    rels = [rel]
    mins = [X.min(axis=1)] if domain.ordered else None
    maxs = [X.max(axis=1)] if domain.ordered else None
    trace = [X.copy()] if capture_trace else None
    sorted_rule = isinstance(rule, _PairRule) and rule.sort_first and domain.ordered

    k = 0
    while k < max_iterations and not (converged.all()):
        k += 1
        rows = np.arange(m) if lockstep else np.flatnonzero(~converged)
        X[rows] = rule(mean, domain, X[rows], rows)
        if sorted_rule:
            _check_sorted(X[rows])
        spread = domain.spread(X)
        rel = spread / np.maximum(domain.magnitude(X), TINY)
        newly = (~converged) & (rel <= tolerance)
        iterations[~converged] = k
        converged |= newly
        spreads.append(spread)
        rels.append(rel)
        if domain.ordered:
            mins.append(X.min(axis=1))
            maxs.append(X.max(axis=1))
        if capture_trace:
            trace.append(X.copy())

    return BatchResult(
        values=X[:, 0].copy(),
        iterations=iterations,
        converged=converged,
        initial=np.array(X0, dtype=float),
        final=X,
        spread_history=np.array(spreads),
        rel_spread_history=np.array(rels),
        min_history=np.array(mins) if domain.ordered else None,
        max_history=np.array(maxs) if domain.ordered else None,
        trace=trace,
    )


def _check_sorted(X):
    d = np.diff(X, axis=1)
    if (d < -ORDER_SLACK * np.abs(X).max()).any():
        raise RuntimeError("neighbor iteration lost the ascending order of a scalar state")


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------

Scheme = Union[str, CycleMapping, Sequence[CycleMapping]]


def _infer_domain(mean, domain):
    if domain is not None:
        return domain
    if isinstance(mean, TwoVarMean):
        return SCALARS
    from .spd import spd_domain

    return spd_domain()


def _make_rule(scheme, n, tolerance, max_iterations):
    if n == 2:
        # Every scheme degenerates to one evaluation of the two-variable mean.
        return _neighbor_rule(2)
    if isinstance(scheme, str):
        if scheme == "neighbor":
            return _neighbor_rule(n)
        if scheme == "variation":
            return _VariationRule(_inner_tolerance(tolerance), max_iterations)
        if scheme == "variation-recursive":
            return _VariationRule(_inner_tolerance(tolerance), max_iterations, recursive=True)
        raise ConfigurationError(
            f"unknown scheme {scheme!r}; expected 'variation', 'variation-recursive', 'neighbor' or a CycleMapping")
    return _cycle_rule(scheme, n)


def extend_mean_batch(mean, inputs, scheme: Scheme = "neighbor", config: ConvergenceConfig = None,
                      domain: ElementDomain = None) -> BatchResult:
    """Run ``m`` extensions at once; ``inputs`` has shape ``(m, n, *element_shape)``.

    ``scheme`` may be a list of ``m`` cycle mappings, one per row.
    """
    config = config or ConvergenceConfig()
    domain = _infer_domain(mean, domain)
    X = np.stack([domain.stack(row) for row in inputs])
    if X.shape[1] < 2:
        raise ConfigurationError("extension needs at least two inputs per run")
    if not isinstance(scheme, (str, CycleMapping)) and len(scheme) != X.shape[0]:
        raise ConfigurationError(f"{len(scheme)} cycle mappings given for {X.shape[0]} runs")
    tol = config.tolerance_for(domain)
    rule = _make_rule(scheme, X.shape[1], tol, config.max_iterations)
    return _run(mean, domain, X, rule, tol, config.max_iterations, capture_trace=config.capture_trace)


@dataclass
class ExtensionResult:
    value: Any
    iterations: int
    converged: bool
    spread_history: list
    rel_spread_history: list
    trace: Optional[list] = None
    min_history: Optional[list] = None
    max_history: Optional[list] = None
    tolerance: float = field(default=0.0)

    @property
    def final_rel_spread(self) -> float:
        return self.rel_spread_history[-1]


def extend_mean(mean, inputs, scheme: Scheme = "neighbor", config: ConvergenceConfig = None,
                domain: ElementDomain = None) -> ExtensionResult:
    """Extend ``mean`` to ``len(inputs)`` variables and return the common limit.

    Non-convergence within ``config.max_iterations`` is reported through
    ``converged=False``, not raised.
    """
    config = config or ConvergenceConfig()
    domain = _infer_domain(mean, domain)
    X = domain.stack(inputs)[None]
    if X.shape[1] < 2:
        raise ConfigurationError("extension needs at least two inputs")
    tol = config.tolerance_for(domain)
    rule = _make_rule(scheme, X.shape[1], tol, config.max_iterations)
    res = _run(mean, domain, X, rule, tol, config.max_iterations, capture_trace=config.capture_trace)
    trace = None
    if res.trace is not None:
        trace = [IterationState(s[0], k) for k, s in enumerate(res.trace)]
    return ExtensionResult(
        value=domain.element(res.values[0]),
        iterations=int(res.iterations[0]),
        converged=bool(res.converged[0]),
        spread_history=[float(v) for v in res.spread_history[:, 0]],
        rel_spread_history=[float(v) for v in res.rel_spread_history[:, 0]],
        trace=trace,
        min_history=None if res.min_history is None else [float(v) for v in res.min_history[:, 0]],
        max_history=None if res.max_history is None else [float(v) for v in res.max_history[:, 0]],
        tolerance=tol,
    )


def _step(mean, domain, state, rule):
    X = state.elements[None]
    out = rule(mean, domain, X, np.arange(1))
    return IterationState(out[0], state.step + 1)


def step_variation(mean, domain: ElementDomain, state: IterationState, sub_config: ConvergenceConfig = None):
    """One variation step; inner (n-1)-variable means use ``sub_config``'s tolerance."""
    if state.n < 3:
        raise PreconditionError("the variation step needs n >= 3")
    sub_config = sub_config or ConvergenceConfig()
    tol = _inner_tolerance(sub_config.tolerance_for(domain)) if sub_config.tolerance is None else sub_config.tolerance
    return _step(mean, domain, state, _VariationRule(tol, sub_config.max_iterations))


def step_neighbor(mean, domain: ElementDomain, state: IterationState) -> IterationState:
    """One neighbor step, applied positionally (scalar states must already be sorted)."""
    if state.n < 3:
        raise PreconditionError("the neighbor step needs n >= 3")
    if domain.ordered and (np.diff(state.elements) < 0).any():
        raise PreconditionError("scalar neighbor iteration needs an ascending state")
    left, right = _neighbor_indices(state.n)
    return _step(mean, domain, state, _PairRule(left, right))


def step_cycle(mean, domain: ElementDomain, mapping: CycleMapping, state: IterationState) -> IterationState:
    if mapping.n != state.n:
        raise PreconditionError(f"cycle mapping for n={mapping.n} used on {state.n} elements")
    return _step(mean, domain, state, _PairRule(mapping.left, mapping.right))


def spread(domain: ElementDomain, state: IterationState) -> float:
    return float(domain.spread(state.elements[None])[0])


# --------------------------------------------------------------------------
# Rate comparison
# --------------------------------------------------------------------------

@dataclass
class RateReport:
    """Per-step extrema of the neighbor baseline (row 0) and each cycle mapping.

    ``violations`` lists ``(mapping_index, step, which, baseline, cycle)`` for
    every step where the baseline fails to bracket a cycle iteration.
    """

    mappings: list
    min_table: np.ndarray  # (steps + 1, 1 + len(mappings))
    max_table: np.ndarray
    spread_table: np.ndarray
    steps_to_tolerance: list  # None where the tolerance was never reached
    violations: list

    @property
    def baseline_steps(self):
        return self.steps_to_tolerance[0]

    def slower_than_baseline(self):
        """Indices of mappings needing more steps than the baseline."""
        base = self.baseline_steps
        out = []
        for i, s in enumerate(self.steps_to_tolerance[1:]):
            if base is not None and (s is None or s > base):
                out.append(i)
        return out


def compare_rates(mean: TwoVarMean, inputs, mappings: Sequence[CycleMapping], config: ConvergenceConfig = None,
                  slack: float = 1e-12) -> RateReport:
    """Run the neighbor baseline and every mapping in lockstep from the same sorted start."""
    config = config or ConvergenceConfig()
    x = SCALARS.stack(inputs)
    if (np.diff(x) < 0).any():
        raise PreconditionError("compare_rates needs inputs sorted ascending")
    n = x.shape[0]
    mappings = list(mappings)
    for mp in mappings:
        if mp.n != n:
            raise PreconditionError(f"cycle mapping for n={mp.n} used on {n} inputs")
    base_l, base_r = _neighbor_indices(n)
    left = np.stack([base_l] + [mp.left for mp in mappings])
    right = np.stack([base_r] + [mp.right for mp in mappings])
    X = np.repeat(x[None], len(mappings) + 1, axis=0)
    tol = config.tolerance_for(SCALARS)
    res = _run(mean, SCALARS, X, _PairRule(left, right), tol, config.max_iterations, lockstep=True)

    steps = []
    for j in range(X.shape[0]):
        hit = np.flatnonzero(res.rel_spread_history[:, j] <= tol)
        steps.append(int(hit[0]) if hit.size else None)

    mins, maxs = res.min_history, res.max_history
    violations = []
    low = mins[:, :1] > mins[:, 1:] + slack
    high = maxs[:, :1] < maxs[:, 1:] - slack
    for k, j in zip(*np.nonzero(low)):
        violations.append((int(j), int(k), "min", float(mins[k, 0]), float(mins[k, j + 1])))
    for k, j in zip(*np.nonzero(high)):
        violations.append((int(j), int(k), "max", float(maxs[k, 0]), float(maxs[k, j + 1])))
    violations.sort()
    return RateReport(mappings, mins, maxs, res.spread_history, steps, violations)


def make_evaluator(mean, scheme: Scheme = "variation", config: ConvergenceConfig = None, domain=None):
    """Batched n-variable evaluator: maps an ``(m, n)`` array to the ``m`` limits.

    Raises :class:`ConvergenceError` if any run exhausts its budget.
    """
    config = config or ConvergenceConfig()

    def evaluate(rows):
        rows = np.asarray(rows, dtype=float)
        res = extend_mean_batch(mean, rows, scheme, config, domain)
        if not res.converged.all():
            bad = int(np.flatnonzero(~res.converged)[0])
            raise ConvergenceError(f"extension did not converge for input {rows[bad].tolist()}",
                                   depth=0, sub_input=rows[bad])
        return res.values

    evaluate.mean = mean
    evaluate.scheme = scheme
    return evaluate
