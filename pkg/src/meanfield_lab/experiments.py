"""The mean-field convergence experiment and its configuration schema.

One scan cell evolves the factorized N-body state and the matching
mean-field trajectory to time T with the same step, extracts the
one-particle marginal, and scores the difference in the weighted dual norm.
The scan is deterministic given its configuration; cells are independent
and can run in a process pool.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import ConvergenceRecord, DualNormFamily, StopWatch, dual_norm_estimate
from .phasespace import make_grid
from .potentials import PotentialSeries
from .qdyn import NBodyState, hartree_evolve, marginal1, nbody_evolve

__all__ = [
    "ConvergeConfig",
    "gaussian_on_torus",
    "converge_cell",
    "converge_run",
    "uniformity_report",
]


@dataclass
class ConvergeConfig:
    """Parsed experiment configuration; mirrors the JSON schema."""

    d: int = 1
    M: int = 16
    L: float = 2.0 * np.pi
    cos_coeffs: tuple = (0.0, 0.5)  # V(x) = sum_k c_k cos(2 pi k x / L)
    initial_kind: str = "gaussian"
    initial_width: float = 0.5
    initial_center: tuple = (np.pi,)
    T: float = 1.0
    dt: float = 0.0025
    N_list: tuple = (2, 3, 4, 5)
    hbar_list: tuple = (1.0, 0.5, 0.25)
    dual_order: int = 6
    alpha_max: int = 4
    beta_max: int = 4
    seed: int = 7
    timing: bool = True  # False freezes wall_ms to 0 for byte-stable reports

    @staticmethod
    def from_dict(doc):
        grid = doc.get("grid", {})
        pot = doc.get("potential", {})
        init = doc.get("initial", {})
        tim = doc.get("time", {})
        scan = doc.get("scan", {})
        dn = doc.get("dual_norm", {})
        cfg = ConvergeConfig(
            d=int(grid.get("d", 1)),
            M=int(grid.get("M", 16)),
            L=float(grid.get("L", 2.0 * np.pi)),
            cos_coeffs=tuple(pot.get("coeffs", (0.0, 0.5))),
            initial_kind=str(init.get("kind", "gaussian")),
            initial_width=float(init.get("width", 0.5)),
            initial_center=tuple(init.get("center", (np.pi,))),
            T=float(tim.get("T", 1.0)),
            dt=float(tim.get("dt", 0.0025)),
            N_list=tuple(int(n) for n in scan.get("N", (2, 3, 4, 5))),
            hbar_list=tuple(float(h) for h in scan.get("hbar", (1.0, 0.5, 0.25))),
            dual_order=int(dn.get("order", 6)),
            alpha_max=int(dn.get("alpha_max", 4)),
            beta_max=int(dn.get("beta_max", 4)),
            seed=int(doc.get("seed", 7)),
            timing=bool(doc.get("timing", True)),
        )
        cfg.validate()
        return cfg

    def to_dict(self):
        return {
            "grid": {"d": self.d, "M": self.M, "L": self.L},
            "potential": {"coeffs": list(self.cos_coeffs)},
            "initial": {
                "kind": self.initial_kind,
                "width": self.initial_width,
                "center": list(self.initial_center),
            },
            "time": {"T": self.T, "dt": self.dt},
            "scan": {"N": list(self.N_list), "hbar": list(self.hbar_list)},
            "dual_norm": {
                "order": self.dual_order,
                "alpha_max": self.alpha_max,
                "beta_max": self.beta_max,
            },
            "seed": self.seed,
            "timing": self.timing,
        }

    def validate(self):
        if self.d != 1:
            raise ValueError("the experiment harness ships for d = 1")
        if self.initial_kind != "gaussian":
            raise ValueError(f"unknown initial kind {self.initial_kind!r}")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("time parameters must be positive")
        if not self.N_list or not self.hbar_list:
            raise ValueError("scan lists must be nonempty")
        for N in self.N_list:
            if self.M**N > 2**26:
                raise ValueError(
                    f"N={N} at M={self.M} needs {self.M**N} amplitudes, over budget"
                )
        for h in self.hbar_list:
            if not (0 < h <= 1):
                raise ValueError("hbar values must lie in (0, 1]")

    def grid(self):
        return make_grid(self.d, self.M, self.L)

    def potential(self):
        return PotentialSeries.from_cos_coeffs(self.grid(), self.cos_coeffs)

    def family(self, grid=None):
        return DualNormFamily(
            grid=grid or self.grid(),
            order=self.dual_order,
            alpha_max=self.alpha_max,
            beta_max=self.beta_max,
        )


def gaussian_on_torus(grid, center, width):
    """Wrapped, dx-normalized Gaussian; width is hbar-independent."""
    x = grid.x
    psi = np.zeros(grid.M, dtype=complex)
    for w in range(-4, 5):
        psi += np.exp(-((x - center + w * grid.L) ** 2) / (4.0 * width**2))
    return psi / np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))


def converge_cell(cfg_doc, N, hbar):
    """One (N, hbar) cell; module-level so process pools can pickle it."""
    cfg = cfg_doc if isinstance(cfg_doc, ConvergeConfig) else ConvergeConfig.from_dict(cfg_doc)
    grid = cfg.grid()
    V = cfg.potential()
    psi0 = gaussian_on_torus(grid, cfg.initial_center[0], cfg.initial_width)
    family = cfg.family(grid)

    with StopWatch() as sw:
        state = NBodyState.product(grid, psi0, N, hbar)
        evolved = nbody_evolve(state, V, cfg.T, cfg.dt)
        F1 = marginal1(evolved).mat
        traj = hartree_evolve(psi0, V, cfg.T, cfg.dt, hbar)
        R_T = traj.density(index=len(traj.times) - 1).mat
        error, (aa, ab) = dual_norm_estimate(F1 - R_T, hbar, family)
        # cutoff-saturation diagnostic: the same estimate at smaller families
        sat = {}
        for cut in sorted({max(1, cfg.alpha_max - 1), cfg.alpha_max}):
            fam = DualNormFamily(
                grid=grid, order=cfg.dual_order, alpha_max=cut, beta_max=cut
            )
            sat[cut] = dual_norm_estimate(F1 - R_T, hbar, fam)[0]
    wall = sw.ms if cfg.timing else 0.0
    return ConvergenceRecord(
        N=N,
        hbar=hbar,
        t=cfg.T,
        M=cfg.M,
        dt=cfg.dt,
        error=error,
        argmax_alpha=aa,
        argmax_beta=ab,
        wall_ms=wall,
        extra={"saturation": sat},
    )


def converge_run(cfg, workers=1):
    """Run every (N, hbar) cell of the scan; deterministic given the config."""
    if not isinstance(cfg, ConvergeConfig):
        cfg = ConvergeConfig.from_dict(cfg)
    cfg.validate()
    cells = [(N, h) for N in cfg.N_list for h in cfg.hbar_list]
    if workers > 1:
        doc = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(converge_cell, doc, N, h) for N, h in cells]
            records = [f.result() for f in futs]
    else:
        records = [converge_cell(cfg, N, h) for N, h in cells]
    records.sort(key=lambda r: (r.N, -r.hbar))
    return records


def uniformity_report(records, ceiling=5.0):
    """Per-N spread of the error across hbar; the scan's uniformity check."""
    by_N = {}
    for r in records:
        by_N.setdefault(r.N, []).append(r)
    rows = []
    for N in sorted(by_N):
        errs = [r.error for r in by_N[N]]
        if len(errs) < 2 or max(errs) <= 1e-12:
            ratio = 1.0  # single point, or all errors at rounding level
        elif min(errs) <= 0:
            ratio = float("inf")
        else:
            ratio = max(errs) / min(errs)
        rows.append(
            {
                "N": N,
                "n_hbar": len(errs),
                "max_error": max(errs),
                "min_error": min(errs),
                "ratio": ratio,
                "pass": ratio < ceiling,
            }
        )
    return {
        "per_N": rows,
        "ceiling": ceiling,
        "pass": all(r["pass"] for r in rows),
    }
