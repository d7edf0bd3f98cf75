import numpy as np
import pytest

# Relative slack for per-step envelope and internality assertions.
ENVELOPE_SLACK = 1e-13

# Verdict lines from the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def envelope_violations(res, slack=ENVELOPE_SLACK):
    """Rows of a scalar BatchResult whose min decreases, max increases, or limit leaves [min X0, max X0]."""
    scale = np.abs(res.initial).max(axis=1)
    mins, maxs = res.min_history, res.max_history
    bad = set()
    dmin = np.diff(mins, axis=0) < -slack * scale[None]
    dmax = np.diff(maxs, axis=0) > slack * scale[None]
    bad.update(np.flatnonzero(dmin.any(axis=0)).tolist())
    bad.update(np.flatnonzero(dmax.any(axis=0)).tolist())
    lo, hi = res.initial.min(axis=1), res.initial.max(axis=1)
    outside = (res.values < lo - slack * scale) | (res.values > hi + slack * scale)
    bad.update(np.flatnonzero(outside).tolist())
    return sorted(bad)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.abs(b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
