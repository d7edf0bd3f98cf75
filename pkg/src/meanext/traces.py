"""Per-step trace records (JSON objects or CSV rows)."""
from __future__ import annotations

import csv
import io

import numpy as np


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def trace_records(result):
    """One dict per step of an :class:`~meanext.engine.ExtensionResult` captured with a trace."""
    if result.trace is None:
        raise ValueError("result has no trace; run with ConvergenceConfig(capture_trace=True)")
    records = []
    for state, spread, rel in zip(result.trace, result.spread_history, result.rel_spread_history):
        X = state.elements
        rec = {"step": state.step}
        if X.ndim == 1:
            rec["elements"] = [float(v) for v in X]
        else:
            rec["dimension"] = int(X.shape[-1])
            rec["elements"] = [[float(v) for v in A.reshape(-1)] for A in X]
        rec["spread"] = float(spread)
        rec["rel_spread"] = float(rel)
        records.append(rec)
    return records


def trace_csv(records, header_lines=()) -> str:
    """Long format: one row per (step, element index); matrices flatten row-major into value columns."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    if not records:
        return buf.getvalue()
    matrix = "dimension" in records[0]
    if matrix:
        d = records[0]["dimension"]
        value_cols = [f"value_{r}_{c}" for r in range(d) for c in range(d)]
    else:
        value_cols = ["value"]
    w.writerow(["step", "index", *value_cols, "spread", "rel_spread"])
    for rec in records:
        for i, el in enumerate(rec["elements"]):
            vals = [fmt(v) for v in np.ravel(el)]
            w.writerow([rec["step"], i, *vals, fmt(rec["spread"]), fmt(rec["rel_spread"])])
    return buf.getvalue()
