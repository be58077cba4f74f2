"""Dual-norm estimator, convergence records and report emission.

The convergence metric is a lower bound on the dual Sobolev norm: the
difference of two density operators is paired with a finite family of
weighted plane-wave observables exp(i(alpha x + beta xi)) / w(alpha, beta),
w = max(1, |alpha|, |beta|)^n. Enlarging the family can only grow the
estimate, and the saturation of the estimate in the frequency cutoff is
reported alongside the value.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .phasespace import FourierSymbol, as_matrix, quantize

__all__ = [
    "DualNormFamily",
    "ConvergenceRecord",
    "dual_norm_estimate",
    "loglog_slope",
    "trace_distance",
    "records_content_hash",
    "emit_report",
    "read_records_csv",
    "CSV_COLUMNS",
]


@dataclass(frozen=True)
class DualNormFamily:
    """Weighted plane-wave test family for the dual-norm estimate.

    Modes are integer lattice points (a, b) with |a| <= alpha_max,
    |b| <= beta_max, mapped to frequencies (2*pi*a/L, 2*pi*b/L); the family
    is symmetric under (a, b) -> (-a, -b) by construction.
    """

    grid: object
    order: int = 6  # d + 5 for d = 1
    alpha_max: int = 4
    beta_max: int = 4

    def __post_init__(self):
        if self.alpha_max < 0 or self.beta_max < 0:
            raise ValueError("cutoffs must be nonnegative")

    def modes(self):
        for a in range(-self.alpha_max, self.alpha_max + 1):
            for b in range(-self.beta_max, self.beta_max + 1):
                yield a, b

    def weight(self, a, b):
        alpha = 2.0 * np.pi * a / self.grid.L
        beta = 2.0 * np.pi * b / self.grid.L
        return max(1.0, abs(alpha), abs(beta)) ** self.order

    def symbol(self, a, b):
        return FourierSymbol.plane_wave(
            self.grid, 2.0 * np.pi * a / self.grid.L, 2.0 * np.pi * b / self.grid.L
        )

    def size(self):
        return (2 * self.alpha_max + 1) * (2 * self.beta_max + 1)


def dual_norm_estimate(delta_K, hbar, family):
    """max over the family of |trace(dK quantize(a))| / weight(a).

    A lower bound on the dual C^n norm of the Wigner-transform difference;
    returns (value, (argmax_a, argmax_b)).
    """
    if family.size() == 0:
        raise ValueError("empty dual-norm family")
    dK = as_matrix(delta_K)
    best, arg = -1.0, (0, 0)
    for a, b in family.modes():
        Q = quantize(family.grid, hbar, family.symbol(a, b)).mat
        val = abs(np.trace(dK @ Q)) / family.weight(a, b)
        if val > best:
            best, arg = float(val), (a, b)
    return best, arg


def loglog_slope(points):
    """Least squares in log-log coordinates: (slope, intercept, r^2)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("log-log fit needs positive coordinates")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def trace_distance(K1, K2):
    """Sum of singular values of the difference (twice the usual distance
    for orthogonal pure states, matching the operator 1-norm)."""
    return float(np.linalg.svd(as_matrix(K1) - as_matrix(K2), compute_uv=False).sum())


# ---------------------------------------------------------------------------
# records and reports
# ---------------------------------------------------------------------------

CSV_COLUMNS = [
    "N",
    "hbar",
    "t",
    "M",
    "dt",
    "error",
    "argmax_alpha",
    "argmax_beta",
    "wall_ms",
]


@dataclass
class ConvergenceRecord:
    N: int
    hbar: float
    t: float
    M: int
    dt: float
    error: float
    argmax_alpha: int
    argmax_beta: int
    wall_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be nonnegative")

    def row(self):
        return [
            str(self.N),
            repr(float(self.hbar)),
            repr(float(self.t)),
            str(self.M),
            repr(float(self.dt)),
            repr(float(self.error)),
            str(self.argmax_alpha),
            str(self.argmax_beta),
            repr(float(self.wall_ms)),
        ]


def records_content_hash(records):
    """sha256 over the canonical CSV rows; changes iff any field changes."""
    payload = "\n".join(",".join(r.row()) for r in records)
    return hashlib.sha256(payload.encode()).hexdigest()


def emit_report(records, path, fmt="csv", config_echo=None):
    """Write records as CSV (exact column contract) or JSON with a hash."""
    path = str(path)
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            for r in records:
                w.writerow(r.row())
    elif fmt == "json":
        doc = {
            "config": config_echo or {},
            "records": [dict(zip(CSV_COLUMNS, r.row())) for r in records],
            "content_hash": records_content_hash(records),
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def read_records_csv(path):
    records = []
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if rows and rows[0] == CSV_COLUMNS:
        rows = rows[1:]
    for row in rows:
        records.append(
            ConvergenceRecord(
                N=int(row[0]),
                hbar=float(row[1]),
                t=float(row[2]),
                M=int(row[3]),
                dt=float(row[4]),
                error=float(row[5]),
                argmax_alpha=int(row[6]),
                argmax_beta=int(row[7]),
                wall_ms=float(row[8]),
            )
        )
    return records


class StopWatch:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self._t0) * 1000.0
