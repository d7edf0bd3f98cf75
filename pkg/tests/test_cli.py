import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from meanext.cli import main
from meanext.spd import dump_matrices


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


def rotated(diag, theta):
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag(diag) @ R.T


@pytest.fixture
def matrix_file(tmp_path):
    path = tmp_path / "mats.json"
    path.write_text(json.dumps(dump_matrices([rotated([1.0, 2.0], t) for t in (0.0, 0.7, 1.9)])))
    return str(path)


# ---------------------------------------------------------------- extend

def test_extend_geometric_neighbor(capsys):
    code, doc, _ = run_json(capsys, "extend", "--mean", "geometric", "--values", "1,2,4", "--scheme", "neighbor")
    assert code == 0
    assert doc["value"] == pytest.approx(2.0, abs=1e-10)
    assert doc["converged"] is True
    assert doc["tolerance"] == 1e-12 and doc["mapping"] is None


def test_extend_constant_input(capsys):
    code, doc, _ = run_json(capsys, "extend", "--mean", "arithmetic", "--values", "5,5,5")
    assert code == 0
    assert doc["value"] == 5 and doc["iterations"] == 0


def test_extend_cycle_echoes_mapping(capsys):
    code, doc, _ = run_json(capsys, "extend", "--mean", "harmonic", "--values", "2,6,12,3", "--scheme", "cycle:9")
    assert code == 0
    mp = doc["mapping"]
    assert sorted(mp["cycle"]) == [0, 1, 2, 3]
    assert sorted(target for _, _, target in mp["edges"]) == [0, 1, 2, 3]
    from meanext import harmonic_n
    assert doc["value"] == pytest.approx(harmonic_n([2, 6, 12, 3]), rel=1e-10)


def test_extend_csv_format(capsys):
    code, out, _ = run(capsys, "extend", "--mean", "power:2", "--values", "1,2,3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["mean"] == "power:2" and rows[0]["converged"] == "true"
    assert float(rows[0]["value"]) == pytest.approx(np.sqrt(14 / 3), rel=1e-10)


def test_extend_reads_csv_input(tmp_path, capsys):
    path = tmp_path / "x.csv"
    path.write_text("1\n2\n4\n\n")
    code, doc, _ = run_json(capsys, "extend", "--mean", "geometric", "--input", str(path))
    assert code == 0 and doc["n"] == 3
    assert doc["value"] == pytest.approx(2.0, rel=1e-10)


def test_extend_matrices(matrix_file, capsys):
    code, doc, _ = run_json(capsys, "extend", "--mean", "arithmetic", "--matrices", matrix_file)
    assert code == 0
    assert doc["domain"] == "spd" and doc["tolerance"] == 1e-10
    expected = np.mean([rotated([1.0, 2.0], t) for t in (0.0, 0.7, 1.9)], axis=0)
    assert np.allclose(doc["value"], expected, atol=1e-9)


def test_extend_writes_output_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "extend", "--mean", "arithmetic", "--values", "1,2,3", "--output", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["value"] == pytest.approx(2.0)


def test_nonconvergence_exit_code(capsys):
    code, doc, _ = run_json(capsys, "extend", "--mean", "arithmetic", "--values", "1,2,3,4,9",
                            "--max-iterations", "2")
    assert code == 2
    assert doc["converged"] is False and doc["iterations"] == 2


def test_tolerance_environment_variable(capsys, monkeypatch):
    monkeypatch.setenv("MEANEXT_TOLERANCE", "1e-4")
    _, loose, _ = run_json(capsys, "extend", "--mean", "geometric", "--values", "1,2,4,8")
    assert loose["tolerance"] == 1e-4
    _, tight, _ = run_json(capsys, "extend", "--mean", "geometric", "--values", "1,2,4,8", "--tolerance", "1e-12")
    assert tight["tolerance"] == 1e-12 and tight["iterations"] > loose["iterations"]
    monkeypatch.setenv("MEANEXT_TOLERANCE", "abc")
    code, _, err = run(capsys, "extend", "--mean", "geometric", "--values", "1,2,4,8")
    assert code == 1 and "MEANEXT_TOLERANCE" in err


@pytest.mark.parametrize("argv,field", [
    (["extend", "--mean", "median", "--values", "1,2"], "--mean"),
    (["extend", "--mean", "power:0", "--values", "1,2"], "--mean"),
    (["extend", "--mean", "arithmetic", "--values", "1,x,2"], "--values"),
    (["extend", "--mean", "arithmetic", "--values", "1,-2,3"], "--values"),
    (["extend", "--mean", "arithmetic", "--values", "1"], "--values"),
    (["extend", "--mean", "arithmetic", "--values", "1,2,3", "--scheme", "zigzag"], "--scheme"),
    (["extend", "--mean", "arithmetic", "--values", "1,2,3", "--scheme", "cycle:x"], "--scheme"),
    (["extend", "--mean", "arithmetic", "--values", "1,2,3", "--tolerance", "-1"], "--tolerance"),
    (["extend", "--mean", "arithmetic", "--input", "/nonexistent/x.csv"], "--input"),
    (["axioms", "--mean", "arithmetic", "--low", "5", "--high", "1"], "--low/--high"),
    (["axioms", "--mean", "arithmetic", "--n", "1"], "--n"),
])
def test_input_errors_name_the_field(capsys, argv, field):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert out == ""
    assert f"error: {field}:" in err


def test_matrix_errors_name_the_matrix(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"dimension": 2, "matrices": [[1, 0, 0, 1], [1, 3, 3, 1]]}))
    code, _, err = run(capsys, "extend", "--mean", "geometric", "--matrices", str(path))
    assert code == 1 and "--matrices: matrix 1:" in err
    code, _, err = run(capsys, "extend", "--mean", "logarithmic", "--matrices", str(path))
    assert code == 1 and "--mean" in err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["extend", "--mean", "arithmetic"])
    assert info.value.code == 1


# ---------------------------------------------------------------- trace

@pytest.mark.parametrize("scheme", ["variation", "neighbor", "cycle:3"])
def test_trace_rows(capsys, scheme):
    code, doc, _ = run_json(capsys, "trace", "--mean", "logarithmic", "--values", "1,5,2,9", "--scheme", scheme)
    assert code == 0
    head, recs = doc["header"], doc["records"]
    assert len(recs) == head["iterations"] + 1
    assert [r["step"] for r in recs] == list(range(len(recs)))
    assert recs[-1]["rel_spread"] <= head["tolerance"]
    # the neighbor scheme sorts once before its first step
    assert recs[0]["elements"] == ([1, 2, 5, 9] if scheme == "neighbor" else [1, 5, 2, 9])


def test_trace_csv_long_format(capsys):
    code, out, _ = run(capsys, "trace", "--mean", "arithmetic", "--values", "1,2,3", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# iterations=") for l in header)
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    assert list(rows[0]) == ["step", "index", "value", "spread", "rel_spread"]
    iterations = int(next(l for l in header if l.startswith("# iterations=")).split("=")[1])
    assert len(rows) == 3 * (iterations + 1)


def test_trace_matrix_csv_columns(matrix_file, capsys):
    code, out, _ = run(capsys, "trace", "--mean", "geometric", "--matrices", matrix_file, "--format", "csv")
    assert code == 0
    body = [l for l in out.splitlines() if not l.startswith("#")]
    assert body[0].split(",") == ["step", "index", "value_0_0", "value_0_1", "value_1_0", "value_1_1",
                                  "spread", "rel_spread"]


# ---------------------------------------------------------------- compare / axioms / sandwich

def test_compare_schemes_quasi_arithmetic(capsys):
    code, doc, _ = run_json(capsys, "compare-schemes", "--mean", "geometric", "--values", "1,2,4,8,3",
                            "--mappings", "5", "--seed", "1")
    assert code == 0
    vals = [s["value"] for s in doc["schemes"].values()]
    assert max(vals) - min(vals) <= 1e-9 * max(vals)
    assert set(doc["schemes"]) == {"neighbor", "variation", *(f"cycle:{i}" for i in range(5))}
    assert doc["sandwich_violations"] == []


def test_compare_schemes_reports_logarithmic_violations(capsys):
    code, doc, _ = run_json(capsys, "compare-schemes", "--mean", "logarithmic", "--values", "1,2,5,9",
                            "--mappings", "10")
    assert code == 3
    assert doc["sandwich_violations"]
    v = doc["sandwich_violations"][0]
    assert set(v) == {"scheme", "step", "extremum", "baseline", "cycle"}


def test_compare_schemes_csv(capsys):
    code, out, _ = run(capsys, "compare-schemes", "--mean", "arithmetic", "--values", "1,2,3,4",
                       "--mappings", "2", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {r["scheme"] for r in rows} == {"neighbor", "cycle:0", "cycle:1"}


def test_axioms_logarithmic_n3(capsys):
    code, doc, _ = run_json(capsys, "axioms", "--mean", "logarithmic", "--n", "3", "--samples", "500", "--seed", "7")
    assert code == 0
    assert doc["passed"] is True
    assert len(doc["axioms"]) == 6


def test_axioms_two_variable(capsys):
    code, doc, _ = run_json(capsys, "axioms", "--mean", "harmonic", "--samples", "300")
    assert code == 0 and len(doc["axioms"]) == 5


def test_sandwich_command(matrix_file, capsys):
    code, doc, _ = run_json(capsys, "sandwich", "--mean", "geometric", "--matrices", matrix_file, "--t-max", "20")
    assert code == 0
    assert doc["converged"] is True and len(doc["rows"]) == 21
    assert all(r["lower_leq_limit"] and r["limit_leq_upper"] for r in doc["rows"])


def test_sandwich_unequal_norms(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(dump_matrices([np.eye(2), 2 * np.eye(2), np.eye(2)])))
    code, _, err = run(capsys, "sandwich", "--mean", "arithmetic", "--matrices", str(path))
    assert code == 1 and "norm" in err


# ---------------------------------------------------------------- determinism

@pytest.mark.parametrize("argv", [
    ["extend", "--mean", "logarithmic", "--values", "1,2,5,9", "--scheme", "cycle:4"],
    ["trace", "--mean", "power:-0.5", "--values", "3,1,4,1.5", "--scheme", "variation"],
    ["axioms", "--mean", "geometric", "--n", "3", "--samples", "30", "--seed", "5"],
])
def test_byte_identical_output(argv):
    cmd = [sys.executable, "-m", "meanext", *argv]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first
