import numpy as np
import pytest

from meanext import (
    ARITHMETIC,
    GEOMETRIC,
    LOGARITHMIC,
    ConfigurationError,
    EvaluatorError,
    check_n_var_axioms,
    check_two_var_axioms,
    make_evaluator,
    power_mean,
)
from meanext.axioms import N_VAR_AXIOMS, TWO_VAR_AXIOMS, permutations_for


@pytest.mark.parametrize("mean", [ARITHMETIC, GEOMETRIC, LOGARITHMIC, power_mean(-2), power_mean(3)])
def test_builtin_means_pass(mean):
    report = check_two_var_axioms(mean, samples=1000, seed=1)
    assert report.passed, report.lines()
    assert set(report.results) == set(TWO_VAR_AXIOMS)
    assert report.samples == 1000


def test_first_argument_double_fails_symmetry_and_internality():
    report = check_two_var_axioms(lambda x, y: x, samples=200)
    assert not report["symmetry"].passed
    assert not report["internality"].passed
    assert report["idempotence"].passed
    # counterexamples reproduce the violation
    x, y = report["symmetry"].counterexample
    assert x != y
    x, y = report["internality"].counterexample
    assert not (x < x < y)


def test_max_double_fails_strict_internality():
    report = check_two_var_axioms(lambda x, y: max(x, y), samples=200)
    assert not report["internality"].passed
    x, y = report["internality"].counterexample
    assert max(x, y) == y
    assert report["symmetry"].passed


def test_discontinuous_double_fails_continuity():
    # Relative jump of 1e-3 that flips every 1e-7 in x: invisible to a Lipschitz bound.
    def jumpy(x, y):
        return (x + y) / 2 * (1 + 1e-3 * ((x * 1e7) % 1 > 0.5))

    report = check_two_var_axioms(jumpy, samples=200, seed=3)
    assert not report["continuity"].passed
    smooth = check_two_var_axioms(ARITHMETIC, samples=200, seed=3)["continuity"]
    assert smooth.passed
    # rounding noise of the tiny probes inflates the estimate a little above 1/2
    assert smooth.detail["lipschitz_estimate"] == pytest.approx(0.5, rel=0.05)


def test_degenerate_box_rejected():
    with pytest.raises(ConfigurationError):
        check_two_var_axioms(ARITHMETIC, 10, (5.0, 5.0))
    with pytest.raises(ConfigurationError):
        check_two_var_axioms(ARITHMETIC, 10, (-1.0, 5.0))
    with pytest.raises(ConfigurationError):
        check_two_var_axioms(ARITHMETIC, 0)


def test_permutations_for():
    assert len(permutations_for(3)) == 6
    assert len(permutations_for(5)) == 120
    sampled = permutations_for(7, rng=0)
    assert len(sampled) == 120 and sampled[0] == list(range(7))


def test_n_var_examples():
    ev = make_evaluator(ARITHMETIC, "variation")
    assert abs(ev(np.array([[5.0, 5.0, 5.0]]))[0] - 5.0) <= 1e-12
    a, b = ev(np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.1]]))
    assert b > a

    geo = make_evaluator(GEOMETRIC, "variation")
    rows = np.array([[1.0, 2.0, 4.0], [1.0, 4.0, 2.0], [2.0, 1.0, 4.0], [2.0, 4.0, 1.0], [4.0, 1.0, 2.0], [4.0, 2.0, 1.0]])
    vals = geo(rows)
    assert np.ptp(vals) <= 1e-12 * 2


@pytest.mark.parametrize("n", [3, 4])
def test_n_var_arithmetic_passes(n):
    report = check_n_var_axioms(make_evaluator(ARITHMETIC, "variation"), n, samples=50, seed=2)
    assert report.passed, report.lines()
    assert set(report.results) == set(N_VAR_AXIOMS)


def test_n_var_detects_order_dependence():
    # Weighted mean: not permutation invariant.
    def weighted(rows):
        w = np.arange(1, rows.shape[1] + 1, dtype=float)
        return rows @ w / w.sum()

    report = check_n_var_axioms(weighted, 3, samples=20)
    assert not report["symmetry"].passed
    x, xp = report["symmetry"].counterexample
    assert weighted(x[None])[0] != pytest.approx(weighted(xp[None])[0], rel=1e-10)


def test_n_var_detects_non_internal():
    report = check_n_var_axioms(lambda rows: rows.sum(axis=1), 3, samples=20)
    assert not report["internality"].passed
    assert not report["idempotence"].passed


def test_evaluator_failure_carries_input():
    def flaky(rows):
        if (rows > 999).any():
            raise ValueError("boom")
        return rows.mean(axis=1)

    with pytest.raises(EvaluatorError) as info:
        check_n_var_axioms(flaky, 3, samples=100, domain_box=(1.0, 1000.0), seed=0)
    assert info.value.offending_input is not None
    assert (np.asarray(info.value.offending_input) > 999).any()


def test_n_var_needs_three():
    with pytest.raises(ConfigurationError):
        check_n_var_axioms(lambda r: r.mean(axis=1), 2)


def test_report_serializes():
    report = check_n_var_axioms(lambda rows: rows.sum(axis=1), 3, samples=5)
    doc = report.to_dict()
    assert doc["passed"] is False
    assert doc["axioms"]["internality"]["counterexample"] is not None
