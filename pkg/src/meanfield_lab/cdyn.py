"""Classical side: interacting particles, empirical measures, characteristics.

Forces come from the exact Fourier series of grad V, so they are periodic
and smooth with no minimum-image bookkeeping, and the self-interaction term
vanishes identically because V is even. The N-body flow uses velocity
Verlet (good long-time energy behavior); pointwise characteristic queries
of the single-particle flow use classical RK4.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .phasespace import symbol_eval

__all__ = [
    "ParticleEnsemble",
    "ClassicalTrajectory",
    "ProductDensity",
    "newton_flow",
    "empirical_pair",
    "empirical_map_value",
    "vlasov_residual",
    "characteristics",
    "flow_derivative_probe",
    "sample_product",
    "product_expectation",
    "save_ensemble_csv",
    "load_ensemble_csv",
]


@dataclass
class ParticleEnsemble:
    """N phase points (x_k, xi_k); positions wrapped into [0, L)."""

    L: float
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.mod(np.asarray(self.x, dtype=float), self.L)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.x.shape != self.xi.shape:
            raise ValueError("position and momentum arrays differ in shape")

    @property
    def N(self):
        return len(self.x)


def _forces(x, V):
    """F_k = -(1/N) sum_l V'(x_k - x_l), via sum_l exp(-i w x_l) per mode."""
    N = len(x)
    out = np.zeros(N, dtype=complex)
    for m, c in V.coeffs.items():
        om = V.omega(m)
        s = np.sum(np.exp(-1j * om * x))
        out -= c * (1j * om) * np.exp(1j * om * x) * s
    return out.real / N


@dataclass
class ClassicalTrajectory:
    """Verlet output: one ensemble per time node."""

    L: float
    dt: float
    scheme: str
    times: np.ndarray
    positions: np.ndarray  # (n_times, N)
    momenta: np.ndarray

    def at(self, t):
        i = int(round((t - self.times[0]) / self.dt))
        if not (0 <= i < len(self.times)) or abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"t={t} is not a stored node")
        return ParticleEnsemble(self.L, self.positions[i], self.momenta[i])


def newton_flow(Z, V, T, dt):
    """Velocity-Verlet integration of the pairwise mean-field system."""
    V.require_even_real()
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(T / dt))
    if abs(T - n * dt) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide T={T}")
    x = Z.x.copy()
    xi = Z.xi.copy()
    f = _forces(x, V)
    xs = [x.copy()]
    ps = [xi.copy()]
    for _ in range(n):
        x = np.mod(x + dt * xi + 0.5 * dt**2 * f, Z.L)
        f_new = _forces(x, V)
        xi = xi + 0.5 * dt * (f + f_new)
        f = f_new
        xs.append(x.copy())
        ps.append(xi.copy())
    return ClassicalTrajectory(
        L=Z.L,
        dt=dt,
        scheme="velocity-verlet",
        times=np.arange(n + 1) * dt,
        positions=np.array(xs),
        momenta=np.array(ps),
    )


def empirical_pair(Z, phi):
    """(1/N) sum_k phi(x_k, xi_k) for a test function phi."""
    return complex(np.mean(symbol_eval(phi, Z.x, Z.xi)))


def empirical_map_value(traj, t, phi):
    """The transported test observable evaluated on initial data: identical
    by construction to pairing the evolved ensemble with phi."""
    return empirical_pair(traj.at(t), phi)


def vlasov_residual(traj, phi, t, delta, V):
    """Weak-form transport residual at an interior node.

    Central difference of t -> <mu_t, phi> minus
    <mu_t, xi . grad_x phi - (grad V * rho_t)(x) . grad_xi phi>; the k = l
    force term vanishes because V is even. Second order in both delta and
    the trajectory step.
    """
    steps = delta / traj.dt
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError("delta must be a multiple of the trajectory dt")
    h = float(delta)
    lo, hi = traj.times[0], traj.times[-1]
    if t - h < lo - 1e-12 or t + h > hi + 1e-12:
        raise ValueError("t must be interior: need [t-delta, t+delta] inside")

    dleft = empirical_pair(traj.at(t - h), phi)
    dright = empirical_pair(traj.at(t + h), phi)
    dh = (dright - dleft) / (2.0 * h)

    Z = traj.at(t)
    conv_grad = -_forces(Z.x, V)  # (grad V * rho_t)(x_k)
    transport = 0j
    for alpha, beta, c in phi.terms:
        vals = c * np.exp(1j * (alpha[0] * Z.x + beta[0] * Z.xi))
        transport += np.mean(
            Z.xi * (1j * alpha[0]) * vals - conv_grad * (1j * beta[0]) * vals
        )
    return float(abs(dh - transport))


# ---------------------------------------------------------------------------
# characteristics of the time-dependent single-particle flow
# ---------------------------------------------------------------------------


def _rk4(timeline, t0, t1, x, xi, n_steps):
    h = (t1 - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        k1x, k1p = xi, -timeline.gradient_at(t, x)
        k2x = xi + 0.5 * h * k1p
        k2p = -timeline.gradient_at(t + 0.5 * h, x + 0.5 * h * k1x)
        k3x = xi + 0.5 * h * k2p
        k3p = -timeline.gradient_at(t + 0.5 * h, x + 0.5 * h * k2x)
        k4x = xi + h * k3p
        k4p = -timeline.gradient_at(t + h, x + h * k3x)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        xi = xi + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        t += h
    return x, xi


def characteristics(timeline, t, s, point, n_steps=None):
    """Flow map Phi(t, s): data (x, xi) at time s, state at time t.

    RK4 with steps short enough that the local error sits near 1e-10;
    vectorized over arrays of phase points (last shapes broadcast).
    """
    timeline.require_coverage(s, t)
    x, xi = point
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if t == s:
        return x.copy(), xi.copy()
    if n_steps is None:
        n_steps = max(4, int(np.ceil(abs(t - s) * 256.0)))
    return _rk4(timeline, s, t, x.copy(), xi.copy(), n_steps)


_FD_STEP = {1: 1e-4, 2: 1e-3, 3: 5e-3}


def flow_derivative_probe(timeline, t, s, nu, point):
    """Central finite-difference magnitude of a mixed flow derivative.

    nu = (order in x, order in xi), total order <= 3; returns the Euclidean
    norm over the two flow components of the estimated derivative at the
    given phase point.
    """
    nx, np_ = int(nu[0]), int(nu[1])
    order = nx + np_
    if order > 3:
        raise ValueError("finite differences are too noisy beyond order 3")
    if order == 0:
        x, xi = characteristics(timeline, t, s, point)
        return float(np.hypot(x, xi))
    h = _FD_STEP[order]

    def stencil(n):
        # coefficients of the n-th central difference, offsets in units of h
        from math import comb

        return [((-1) ** k * comb(n, k), n / 2.0 - k) for k in range(n + 1)]

    total_x, total_xi = 0.0, 0.0
    for cx, ox in stencil(nx):
        for cp, op in stencil(np_):
            p = (point[0] + ox * h, point[1] + op * h)
            X, XI = characteristics(timeline, t, s, p)
            total_x += cx * cp * X
            total_xi += cx * cp * XI
    scale = h**order
    return float(np.hypot(total_x / scale, total_xi / scale))


# ---------------------------------------------------------------------------
# sampling of product initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductDensity:
    """f1(x, xi) = p(x) * gaussian(xi); p is a nonnegative Fourier density."""

    L: float
    x_cos_coeffs: tuple  # p(x) = (1/L) * (1 + sum_k c_k cos(2 pi k x / L)), k >= 1
    xi_mean: float
    xi_sigma: float

    def x_density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for k, c in enumerate(self.x_cos_coeffs, start=1):
            out += c * np.cos(2.0 * np.pi * k * x / self.L)
        return out / self.L

    def x_mode_integral(self, alpha):
        """Exact integral of exp(i*alpha*x) against p(x) for a grid frequency."""
        m = int(round(alpha * self.L / (2.0 * np.pi)))
        if abs(alpha * self.L / (2.0 * np.pi) - m) > 1e-9:
            raise ValueError("alpha must be a grid frequency")
        if m == 0:
            return 1.0 + 0j
        k = abs(m)
        if k <= len(self.x_cos_coeffs):
            return complex(self.x_cos_coeffs[k - 1] / 2.0)
        return 0j


def sample_product(f1, N, count, seed):
    """count i.i.d. ensembles Z_N ~ f1^(x N), rejection in x, Gaussian in xi."""
    rng = np.random.default_rng(seed)
    xs_fine = np.linspace(0.0, f1.L, 4096, endpoint=False)
    p_max = float(f1.x_density(xs_fine).max()) * 1.0001
    if p_max <= 0:
        raise ValueError("x-density is not positive")

    out = []
    for _ in range(count):
        xs = np.empty(N)
        filled = 0
        while filled < N:
            cand = rng.uniform(0.0, f1.L, size=2 * (N - filled))
            acc = rng.uniform(0.0, p_max, size=cand.size) < f1.x_density(cand)
            good = cand[acc][: N - filled]
            xs[filled : filled + len(good)] = good
            filled += len(good)
        xis = rng.normal(f1.xi_mean, f1.xi_sigma, size=N)
        out.append(ParticleEnsemble(f1.L, xs, xis))
    return out


def product_expectation(f1, phi):
    """Closed-form integral of a Fourier test function against f1."""
    total = 0j
    for alpha, beta, c in phi.terms:
        xpart = f1.x_mode_integral(alpha[0])
        xipart = np.exp(1j * beta[0] * f1.xi_mean - 0.5 * (beta[0] * f1.xi_sigma) ** 2)
        total += c * xpart * xipart
    return complex(total)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_ensemble_csv(prefix, Z, manifest_extra=None):
    """CSV of (k, x, xi) plus a JSON manifest recording L and any metadata."""
    with open(f"{prefix}.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", "x", "xi"])
        for k in range(Z.N):
            w.writerow([k, repr(float(Z.x[k])), repr(float(Z.xi[k]))])
    manifest = {"N": int(Z.N), "L": float(Z.L)}
    if manifest_extra:
        manifest.update(manifest_extra)
    with open(f"{prefix}.json", "w") as f:
        json.dump(manifest, f, indent=1)


def load_ensemble_csv(prefix):
    with open(f"{prefix}.json") as f:
        manifest = json.load(f)
    xs, xis = [], []
    with open(f"{prefix}.csv", newline="") as f:
        for row in list(csv.reader(f))[1:]:
            xs.append(float(row[1]))
            xis.append(float(row[2]))
    return ParticleEnsemble(manifest["L"], np.array(xs), np.array(xis)), manifest
