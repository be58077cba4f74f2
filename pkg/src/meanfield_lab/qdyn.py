"""Quantum propagators and marginals.

Single-particle propagation with a time-dependent potential, the
self-consistent mean-field (Hartree) flow, and the N-body flow on the full
tensor grid. Sign conventions, fixed once here:

* wavefunctions evolve by the physical Schrodinger flow,
  ``i*hbar dpsi/dt = H(t) psi``, so a time step multiplies by
  ``exp(-i*H*dt/hbar)``;
* the N-body unitary group is ``U_N(t) = exp(+i*t*H_N/hbar)`` and densities
  evolve as ``F_N(t) = U_N(t)^* F_N^in U_N(t)``, which is the same statement
  for ``F = |Psi><Psi|``.

The N-body solver works on wavefunctions only (M^N amplitudes); mixed
states enter through low-rank ensembles in the Hartree flow and as dense
matrices in the small identity-check regime.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .phasespace import Grid, GridOperator
from .potentials import PotentialSeries, PotentialTimeline

__all__ = [
    "NBodyState",
    "HartreeTrajectory",
    "propagate_single",
    "hartree_evolve",
    "check_tensor_budget",
    "nbody_evolve",
    "nbody_hamiltonian",
    "NBodyPropagator",
    "nbody_propagator",
    "marginal1",
    "marginal2",
    "kinetic_matrix",
    "save_state_checkpoint",
    "load_state_checkpoint",
]

DENSE_LIMIT = 2**13  # largest M^N for dense N-body linear algebra
TENSOR_LIMIT = 2**26  # largest amplitude count for split-step propagation


def _check_steps(t0, t1, dt):
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    span = t1 - t0
    n = int(round(abs(span) / dt))
    if n == 0 and span != 0:
        raise ValueError(f"dt={dt} larger than the interval {span}")
    if abs(abs(span) - n * dt) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"dt={dt} does not divide t1-t0={span}")
    return n, (dt if span >= 0 else -dt)


def propagate_single(psi, timeline, t0, t1, dt, hbar):
    """Strang split-step propagation of one or many column states.

    Half potential phase (sampled at the step midpoint), full spectral
    kinetic step exp(-i*hbar*xi^2*dt/2), half potential phase. Norm is
    preserved to rounding; global accuracy is O(dt^2).
    """
    grid = timeline.grid
    timeline.require_coverage(t0, t1)
    n, h = _check_steps(t0, t1, dt)
    psi = np.asarray(psi, dtype=complex).copy()
    kin = np.exp(-0.5j * hbar * grid.xi**2 * h)
    if psi.ndim == 2:
        kin = kin[:, None]
    t = t0
    for _ in range(n):
        v = timeline.values_at(t + 0.5 * h)
        half = np.exp(-0.5j * v * h / hbar)
        if psi.ndim == 2:
            half = half[:, None]
        psi *= half
        psi = np.fft.ifft(kin * np.fft.fft(psi, axis=0), axis=0)
        psi *= half
        t += h
    return psi


# ---------------------------------------------------------------------------
# Hartree flow
# ---------------------------------------------------------------------------


@dataclass
class HartreeTrajectory:
    """Recorded mean-field evolution: states and the induced potential.

    states[i, j] is the j-th ensemble member at time node i; weights sum to
    one. mean_field is the timeline of V * rho(t) Fourier coefficients,
    ready to drive single-particle comparison runs.
    """

    grid: Grid
    hbar: float
    dt: float
    times: np.ndarray
    weights: np.ndarray
    states: np.ndarray  # (n_times, rank, M)
    potential: PotentialSeries
    mean_field: PotentialTimeline

    def index_of(self, t):
        i = int(round((t - self.times[0]) / self.dt))
        if not (0 <= i < len(self.times)) or abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"t={t} is not a stored node of the trajectory")
        return i

    def density(self, t=None, index=None):
        """Density operator R(t) = sum_j w_j |psi_j><psi_j| (plain trace 1)."""
        if index is None:
            index = self.index_of(t)
        mats = np.zeros((self.grid.M, self.grid.M), dtype=complex)
        for w, psi in zip(self.weights, self.states[index]):
            mats += w * np.outer(psi, psi.conj()) * self.grid.dx
        return GridOperator(self.grid, mats, "density")

    def density_profile(self, index):
        """rho(t, x) = sum_j w_j |psi_j(x)|^2."""
        return np.einsum(
            "j,jx->x", self.weights, np.abs(self.states[index]) ** 2
        ).real

    def total_energy(self, index):
        """Kinetic plus half the doubled interaction energy at a node."""
        grid, h = self.grid, self.hbar
        kin_mult = 0.5 * h**2 * grid.xi**2
        e_kin = 0.0
        for w, psi in zip(self.weights, self.states[index]):
            ph = np.fft.fft(psi)
            e_kin += w * (grid.dx / grid.M) * np.sum(kin_mult * np.abs(ph) ** 2)
        rho = self.density_profile(index)
        vmf = _mean_field_series(self.potential, rho, grid).values()
        e_int = 0.5 * grid.dx * np.sum(rho * vmf)
        return float(e_kin + e_int)


def _mean_field_series(V, rho, grid):
    """(V * rho) as a PotentialSeries: coefficients V_m * rho_m * L."""
    coeffs = {}
    for m, c in V.coeffs.items():
        om = 2.0 * np.pi * m / grid.L
        rho_m = grid.dx * np.sum(rho * np.exp(-1j * om * grid.x))
        coeffs[m] = c * rho_m
    return PotentialSeries(grid, coeffs)


def hartree_evolve(psi_in, V, T, dt, hbar, weights=None):
    """Self-consistent split-step integration of the mean-field flow.

    Accepts a single wavefunction or a low-rank ensemble (list of states
    plus weights). The potential phase leaves |psi_j| invariant, so each
    half potential step solves its nonlinear subflow exactly and the scheme
    stays second order; rank-1 input stays rank-1 by construction.
    """
    V.require_even_real()
    grid = V.grid
    if isinstance(psi_in, (list, tuple)):
        states = np.array([np.asarray(p, dtype=complex) for p in psi_in])
    else:
        # copy: the integration loop multiplies in place
        states = np.asarray(psi_in, dtype=complex).copy()[None, :]
    if weights is None:
        weights = np.full(len(states), 1.0 / len(states))
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(states) or abs(weights.sum() - 1.0) > 1e-10 or (
        weights < 0
    ).any():
        raise ValueError("ensemble weights must be nonnegative and sum to 1")
    if len(states) > 8:
        raise ValueError("mixed states are supported as ensembles of rank <= 8")
    for psi in states:
        nrm = grid.dx * np.sum(np.abs(psi) ** 2)
        if abs(nrm - 1.0) > 1e-8:
            raise ValueError("ensemble members must be dx-normalized")

    n, h = _check_steps(0.0, T, dt)
    kin = np.exp(-0.5j * hbar * grid.xi**2 * h)

    def rho_of(st):
        return np.einsum("j,jx->x", weights, np.abs(st) ** 2).real

    times = [0.0]
    snapshots = [states.copy()]
    mf_series = [_mean_field_series(V, rho_of(states), grid)]
    t = 0.0
    for _ in range(n):
        vmf = _mean_field_series(V, rho_of(states), grid).values()
        states *= np.exp(-0.5j * vmf * h / hbar)[None, :]
        states = np.fft.ifft(kin[None, :] * np.fft.fft(states, axis=1), axis=1)
        vmf = _mean_field_series(V, rho_of(states), grid).values()
        states *= np.exp(-0.5j * vmf * h / hbar)[None, :]
        t += h
        times.append(t)
        snapshots.append(states.copy())
        mf_series.append(_mean_field_series(V, rho_of(states), grid))

    times = np.array(times)
    return HartreeTrajectory(
        grid=grid,
        hbar=hbar,
        dt=h,
        times=times,
        weights=weights,
        states=np.array(snapshots),
        potential=V,
        mean_field=PotentialTimeline.from_series_list(times, mf_series),
    )


# ---------------------------------------------------------------------------
# N-body flow
# ---------------------------------------------------------------------------


@dataclass
class NBodyState:
    """Wavefunction of N particles on the tensor grid, shape (M,)*N.

    Setting ``bosonic=True`` asserts exchange symmetry at construction
    (checked on adjacent transpositions, which generate the full group).
    """

    grid: Grid
    N: int
    psi: np.ndarray
    hbar: float
    bosonic: bool = False

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != (self.grid.M,) * self.N:
            raise ValueError(
                f"state shape {self.psi.shape} != {(self.grid.M,) * self.N}"
            )
        if self.bosonic and self.swap_residual() > 1e-10:
            raise ValueError(
                f"state flagged bosonic but swap residual is {self.swap_residual():.2e}"
            )

    @staticmethod
    def product(grid, psi_single, N, hbar):
        psi = np.asarray(psi_single, dtype=complex)
        psi = psi / np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))
        out = psi
        for _ in range(N - 1):
            out = np.multiply.outer(out, psi)
        return NBodyState(grid=grid, N=N, psi=out, hbar=hbar, bosonic=True)

    def norm(self):
        return float(
            np.sqrt(self.grid.dx**self.N * np.sum(np.abs(self.psi) ** 2))
        )

    def vec(self):
        return self.psi.reshape(-1)

    def density_matrix(self):
        """Dense |Psi><Psi| with plain trace 1; dense-regime sizes only."""
        if self.grid.M**self.N > DENSE_LIMIT:
            raise ValueError("state too large for a dense density matrix")
        v = self.vec()
        return np.outer(v, v.conj()) * self.grid.dx**self.N

    def swap_residual(self):
        """Largest relative asymmetry over all adjacent transpositions."""
        worst = 0.0
        for k in range(self.N - 1):
            swapped = np.swapaxes(self.psi, k, k + 1)
            worst = max(worst, float(np.max(np.abs(self.psi - swapped))))
        scale = float(np.max(np.abs(self.psi)))
        return worst / scale if scale > 0 else 0.0


def _pair_sum_tensor(grid, N, V):
    """(1/N) sum_{k<l} V(x_k - x_l) sampled on the tensor grid."""
    pv = V.pair_values().real
    M = grid.M
    W = np.zeros((M,) * N)
    for k in range(N):
        for l in range(k + 1, N):
            shape = [1] * N
            shape[k] = M
            shape[l] = M
            W += pv.reshape(shape)
    return W / N


def check_tensor_budget(grid, N):
    """Reject runs whose amplitude count exceeds the split-step budget."""
    amplitudes = grid.M**N
    if amplitudes > TENSOR_LIMIT:
        raise ValueError(
            f"N={N} at M={grid.M} needs {amplitudes} amplitudes "
            f"({amplitudes * 16 / 2**30:.1f} GiB), over the budget of "
            f"{TENSOR_LIMIT}"
        )


def nbody_evolve(state, V, T, dt):
    """Strang split-step for the N-body flow: interaction is diagonal on the
    tensor grid, kinetic energy is a spectral multiplier along each axis."""
    V.require_even_real()
    grid, N, hbar = state.grid, state.N, state.hbar
    check_tensor_budget(grid, N)
    n, h = _check_steps(0.0, T, dt)
    if N > 1:
        half = np.exp(-0.5j * _pair_sum_tensor(grid, N, V) * h / hbar)
    else:
        half = np.ones((grid.M,))
    kin = np.exp(-0.5j * hbar * grid.xi**2 * h)
    psi = state.psi.copy()
    for _ in range(n):
        psi *= half
        psi = np.fft.fftn(psi)
        for ax in range(N):
            shape = [1] * N
            shape[ax] = grid.M
            psi *= kin.reshape(shape)
        psi = np.fft.ifftn(psi)
        psi *= half
    return NBodyState(grid=grid, N=N, psi=psi, hbar=hbar, bosonic=state.bosonic)


def kinetic_matrix(grid, hbar):
    """Dense single-particle kinetic operator -hbar^2/2 * Laplacian (spectral)."""
    mult = 0.5 * hbar**2 * grid.xi**2
    T = np.fft.ifft(np.fft.fft(np.eye(grid.M), axis=0) * mult[:, None], axis=0)
    return 0.5 * (T + T.conj().T)


def nbody_hamiltonian(grid, N, V, hbar):
    """Dense H_N = sum_k kinetic_k + (1/N) sum_{k<l} V(x_k - x_l)."""
    dim = grid.M**N
    if dim > DENSE_LIMIT:
        raise ValueError(
            f"dense Hamiltonian of dimension {dim} exceeds the limit {DENSE_LIMIT}"
        )
    T1 = kinetic_matrix(grid, hbar)
    H = np.zeros((dim, dim), dtype=complex)
    for k in range(1, N + 1):
        H += np.kron(
            np.eye(grid.M ** (k - 1)),
            np.kron(T1, np.eye(grid.M ** (N - k))),
        )
    if N > 1:
        H += np.diag(_pair_sum_tensor(grid, N, V).reshape(-1))
    return 0.5 * (H + H.conj().T)


class NBodyPropagator:
    """U_N(t) = exp(+i*t*H_N/hbar) through one Hermitian eigendecomposition."""

    def __init__(self, grid, N, V, hbar):
        self.grid, self.N, self.hbar = grid, N, hbar
        H = nbody_hamiltonian(grid, N, V, hbar)
        self.evals, self.evecs = np.linalg.eigh(H)

    def at(self, t):
        phase = np.exp(1j * t * self.evals / self.hbar)
        return (self.evecs * phase) @ self.evecs.conj().T

    def evolve_density(self, F_in, t):
        """F_N(t) = U_N(t)^* F_N^in U_N(t)."""
        U = self.at(t)
        return U.conj().T @ F_in @ U


def nbody_propagator(grid, N, V, t, hbar):
    return NBodyPropagator(grid, N, V, hbar).at(t)


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


def marginal1(obj, grid=None, N=None):
    """One-particle marginal of a state or of a dense N-body density.

    Contraction over the other N-1 slots with the dx^(d(N-1)) volume weight,
    returned as a plain matrix of trace 1 (density role).
    """
    if isinstance(obj, NBodyState):
        grid, N = obj.grid, obj.N
        A = obj.psi.reshape(grid.M, -1)
        F1 = (A @ A.conj().T) * grid.dx**N
    else:
        F = np.asarray(obj, dtype=complex)
        if grid is None or N is None:
            raise ValueError("marginal1 of a dense operator needs grid and N")
        R = grid.M ** (N - 1)
        F1 = np.einsum("arbr->ab", F.reshape(grid.M, R, grid.M, R))
    return GridOperator(grid, F1, "density")


def marginal2(obj, grid=None, N=None):
    """Two-particle marginal (dense M^2 x M^2 matrix, plain trace 1)."""
    if isinstance(obj, NBodyState):
        grid, N = obj.grid, obj.N
        if N < 2:
            raise ValueError("marginal2 needs at least two particles")
        A = obj.psi.reshape(grid.M**2, -1)
        return (A @ A.conj().T) * grid.dx**N
    F = np.asarray(obj, dtype=complex)
    if grid is None or N is None:
        raise ValueError("marginal2 of a dense operator needs grid and N")
    if N < 2:
        raise ValueError("marginal2 needs at least two particles")
    R = grid.M ** (N - 2)
    return np.einsum("arbr->ab", F.reshape(grid.M**2, R, grid.M**2, R))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_state_checkpoint(prefix, state, t, dt, V):
    """Binary amplitudes plus a JSON manifest next to them."""
    manifest = {
        "t": float(t),
        "hbar": float(state.hbar),
        "N": int(state.N),
        "M": int(state.grid.M),
        "L": float(state.grid.L),
        "dt": float(dt),
        "potential": {str(m): [c.real, c.imag] for m, c in V.coeffs.items()},
    }
    with open(f"{prefix}.bin", "wb") as f:
        header = {"format": "meanfield-lab-tensor", "shape": list(state.psi.shape)}
        f.write(json.dumps(header).encode() + b"\n")
        f.write(np.ascontiguousarray(state.psi.astype("<c16")).tobytes())
    with open(f"{prefix}.json", "w") as f:
        json.dump(manifest, f, indent=1)


def load_state_checkpoint(prefix):
    with open(f"{prefix}.json") as f:
        manifest = json.load(f)
    with open(f"{prefix}.bin", "rb") as f:
        header = json.loads(f.readline().decode())
        psi = np.frombuffer(f.read(), dtype="<c16").reshape(header["shape"])
    from .phasespace import make_grid

    grid = make_grid(1, manifest["M"], manifest["L"])
    state = NBodyState(
        grid=grid, N=manifest["N"], psi=psi.astype(complex), hbar=manifest["hbar"]
    )
    V = PotentialSeries(
        grid,
        {int(m): complex(re, im) for m, (re, im) in manifest["potential"].items()},
    )
    return state, manifest["t"], manifest["dt"], V
