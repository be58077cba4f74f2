"""Interaction potentials as finite Fourier series on the torus.

A potential is stored through its coefficients V_m for x-frequencies
omega_m = 2*pi*m/L, so V(x) = sum_m V_m exp(i*omega_m*x). Real potentials
satisfy V_{-m} = conj(V_m); even ones additionally have real V_m with
V_{-m} = V_m. Keeping the series closed-form makes convolutions, forces and
the Fourier-mode decomposition of the pair interaction exact finite sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phasespace import Grid

__all__ = ["PotentialSeries", "PotentialTimeline"]


@dataclass(frozen=True)
class PotentialSeries:
    """V(x) = sum_{|m| <= m_max} coeffs[m] * exp(2i*pi*m*x/L)."""

    grid: Grid
    coeffs: dict  # integer mode -> complex coefficient

    def __post_init__(self):
        clean = {}
        for m, c in self.coeffs.items():
            c = complex(c)
            if c != 0:
                clean[int(m)] = c
        object.__setattr__(self, "coeffs", clean)

    @staticmethod
    def zero(grid):
        return PotentialSeries(grid, {})

    @staticmethod
    def cosine(grid, amplitude, mode=1):
        """amplitude * cos(2*pi*mode*x/L), the workhorse even potential."""
        a = float(amplitude)
        return PotentialSeries(grid, {mode: a / 2.0, -mode: a / 2.0})

    @staticmethod
    def from_cos_coeffs(grid, cos_coeffs):
        """V(x) = sum_k cos_coeffs[k] * cos(2*pi*k*x/L); even and real."""
        coeffs = {}
        for k, a in enumerate(cos_coeffs):
            a = float(a)
            if a == 0.0:
                continue
            if k == 0:
                coeffs[0] = coeffs.get(0, 0.0) + a
            else:
                coeffs[k] = coeffs.get(k, 0.0) + a / 2.0
                coeffs[-k] = coeffs.get(-k, 0.0) + a / 2.0
        return PotentialSeries(grid, coeffs)

    # -- structure ------------------------------------------------------------

    def omega(self, m):
        return 2.0 * np.pi * m / self.grid.L

    @property
    def modes(self):
        return sorted(self.coeffs)

    def is_real(self, tol=1e-12):
        return all(
            abs(np.conj(c) - self.coeffs.get(-m, 0.0)) <= tol
            for m, c in self.coeffs.items()
        )

    def is_even(self, tol=1e-12):
        return self.is_real(tol) and all(
            abs(c.imag) <= tol and abs(c - self.coeffs.get(-m, 0.0)) <= tol
            for m, c in self.coeffs.items()
        )

    def require_even_real(self):
        if not self.is_even():
            raise ValueError("potential must be even and real-valued")

    # -- evaluation -----------------------------------------------------------

    def values(self, x=None):
        """Sample V on given points (default: the grid nodes); real output."""
        x = self.grid.x if x is None else np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=complex)
        for m, c in self.coeffs.items():
            out += c * np.exp(1j * self.omega(m) * x)
        return out.real if self.is_real() else out

    def gradient(self, x):
        """V'(x) from the series; exact and periodic."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=complex)
        for m, c in self.coeffs.items():
            om = self.omega(m)
            out += c * (1j * om) * np.exp(1j * om * x)
        return out.real if self.is_real() else out

    def pair_values(self):
        """Matrix V(x_j - x_l) over grid nodes, for the two-particle term."""
        x = self.grid.x
        return self.values(x[:, None] - x[None, :])

    # -- derived bounds --------------------------------------------------------

    def fourier_weight(self, order=None):
        """sum_m |V_m| (1+|omega_m|)^(d+6), the integrability weight of the series."""
        p = (self.grid.d + 6) if order is None else order
        return float(
            sum(abs(c) * (1.0 + abs(self.omega(m))) ** p for m, c in self.coeffs.items())
        )

    def hessian_bound(self):
        """sum_m |V_m| omega_m^2 >= ||V''||_inf (exact for a single cosine)."""
        return float(sum(abs(c) * self.omega(m) ** 2 for m, c in self.coeffs.items()))

    def coeff_l1(self):
        return float(sum(abs(c) for c in self.coeffs.values()))

    def scaled(self, factor):
        return PotentialSeries(
            self.grid, {m: factor * c for m, c in self.coeffs.items()}
        )


@dataclass(frozen=True)
class PotentialTimeline:
    """Time-dependent potential: uniform time nodes, one series per node,
    piecewise-linear interpolation of the coefficients."""

    grid: Grid
    times: np.ndarray
    coeff_table: np.ndarray  # shape (n_times, n_modes), complex
    mode_list: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        steps = np.diff(t)
        if len(t) > 1 and not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
            raise ValueError("timeline nodes must be uniformly spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(
            self, "coeff_table", np.asarray(self.coeff_table, dtype=complex)
        )

    @staticmethod
    def constant(series, t0, t1):
        return PotentialTimeline(
            grid=series.grid,
            times=np.array([t0, t1], dtype=float),
            coeff_table=np.array(
                [[series.coeffs[m] for m in series.modes]] * 2, dtype=complex
            ),
            mode_list=tuple(series.modes),
        )

    @staticmethod
    def zero(grid, t0, t1):
        return PotentialTimeline.constant(PotentialSeries.zero(grid), t0, t1)

    @staticmethod
    def from_series_list(times, series_list):
        modes = sorted({m for s in series_list for m in s.modes})
        table = np.array(
            [[s.coeffs.get(m, 0.0) for m in modes] for s in series_list],
            dtype=complex,
        )
        return PotentialTimeline(
            grid=series_list[0].grid,
            times=np.asarray(times, dtype=float),
            coeff_table=table,
            mode_list=tuple(modes),
        )

    def covers(self, t0, t1):
        lo, hi = min(t0, t1), max(t0, t1)
        eps = 1e-9 * max(1.0, abs(hi), abs(lo))
        return self.times[0] <= lo + eps and hi <= self.times[-1] + eps

    def require_coverage(self, t0, t1):
        if not self.covers(t0, t1):
            raise ValueError(
                f"timeline [{self.times[0]}, {self.times[-1]}] does not cover "
                f"[{min(t0, t1)}, {max(t0, t1)}]"
            )

    def coeffs_at(self, t):
        """Linearly interpolated coefficient vector at time t."""
        ts = self.times
        if len(ts) == 1:
            return self.coeff_table[0]
        t = float(np.clip(t, ts[0], ts[-1]))
        dt = ts[1] - ts[0]
        i = int(np.clip(np.floor((t - ts[0]) / dt), 0, len(ts) - 2))
        w = (t - ts[i]) / dt
        return (1.0 - w) * self.coeff_table[i] + w * self.coeff_table[i + 1]

    def series_at(self, t):
        c = self.coeffs_at(t)
        return PotentialSeries(
            self.grid, {m: c[i] for i, m in enumerate(self.mode_list)}
        )

    def values_at(self, t, x=None):
        return self.series_at(t).values(x)

    def gradient_at(self, t, x):
        return self.series_at(t).gradient(x)

    def sup_fourier_weight(self, order=None):
        """sum_m sup_t |V_m(t)| (1+|omega_m|)^(d+6)."""
        p = (self.grid.d + 6) if order is None else order
        total = 0.0
        for i, m in enumerate(self.mode_list):
            om = 2.0 * np.pi * m / self.grid.L
            total += np.max(np.abs(self.coeff_table[:, i])) * (1.0 + abs(om)) ** p
        return float(total)

    def hessian_bound(self):
        """sup_t sum_m |V_m(t)| omega_m^2, controlling the flow's Lipschitz rate."""
        per_node = [
            sum(
                abs(self.coeff_table[i, j]) * (2.0 * np.pi * m / self.grid.L) ** 2
                for j, m in enumerate(self.mode_list)
            )
            for i in range(len(self.times))
        ]
        return float(max(per_node)) if per_node else 0.0
