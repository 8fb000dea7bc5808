"""Evaluation: phase-aligned reconstruction error and sweep aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_complex_vector

__all__ = ["relative_error", "RunSummary", "aggregate", "write_summary_csv"]


def relative_error(x, x_hat) -> float:
    """Relative reconstruction error minimized over a global phase.

    Computes ``min_theta |x - exp(i theta) x_hat|_2 / |x|_2`` in closed
    form: the cross term is maximized at ``theta = -arg(<x, x_hat>)``, so
    the minimum equals ``sqrt(|x|^2 + |x_hat|^2 - 2 |<x, x_hat>|) / |x|``.
    """
    x = as_complex_vector(x, name="x")
    x_hat = as_complex_vector(x_hat, x.shape[0], name="x_hat")
    nx_sq = float(np.real(np.vdot(x, x)))
    if nx_sq == 0.0:
        raise ValueError("reference vector x has zero norm")
    nh_sq = float(np.real(np.vdot(x_hat, x_hat)))
    cross = abs(np.vdot(x, x_hat))
    err_sq = max(nx_sq + nh_sq - 2.0 * cross, 0.0)
    return float(np.sqrt(err_sq / nx_sq))


@dataclass
class RunSummary:
    """One solve's outcome, keyed for aggregation."""

    loss: str
    params: str
    dose: float
    seed: int
    relative_error: float
    iterations: int
    final_grad_norm: float
    stop_reason: str = ""


def aggregate(summaries) -> list[dict]:
    """Per-(loss, params, dose) mean and standard deviation of the
    relative error. Rows come back sorted by (loss, params, dose)."""
    groups: dict[tuple, list[float]] = {}
    for s in summaries:
        groups.setdefault((s.loss, s.params, s.dose), []).append(
            s.relative_error)
    rows = []
    for (loss, params, dose) in sorted(groups):
        errs = np.asarray(groups[(loss, params, dose)], dtype=np.float64)
        rows.append({
            "loss": loss,
            "params": params,
            "dose": dose,
            "mean_rel_err": float(np.mean(errs)),
            "std_rel_err": float(np.std(errs)),
            "n_runs": int(errs.shape[0]),
        })
    return rows


def write_summary_csv(rows, path) -> None:
    """Write aggregate rows with the canonical column order."""
    path = Path(path)
    columns = ["loss", "params", "dose", "mean_rel_err", "std_rel_err",
               "n_runs"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
