"""Operator-valued empirical measure and its interaction algebra.

The central object maps a single-particle observable A to an N-particle
operator. Maps are lazy (apply(A) -> dense matrix): a stored representation
would hold M^(2N+2) numbers, while every statement we verify is quantified
over probe observables A, so probing a finite family is the natural
finitization. Dense N-body algebra is restricted to M^N <= 2^13.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .phasespace import GridOperator, as_matrix, mod_op, op_norm
from .qdyn import (
    DENSE_LIMIT,
    NBodyPropagator,
    NBodyState,
    kinetic_matrix,
    marginal1,
    marginal2,
)

__all__ = [
    "ObservableMap",
    "EmpiricalIn",
    "EmpiricalT",
    "RMap",
    "AdStar",
    "Interaction",
    "MapSum",
    "jk_embed",
    "empirical_in",
    "empirical_t",
    "rmap",
    "ad_star",
    "interaction",
    "prop32_check",
    "lemma34_check",
    "eq32_residual",
    "hartree_as_special_case",
    "initial_fluctuation_identity",
    "initial_fluctuation_sup",
    "random_symmetric_density",
    "permutation_matrix",
    "symmetry_residual",
    "pair_multiplication",
]


def _guard(grid, N):
    if grid.M**N > DENSE_LIMIT:
        raise ValueError(
            f"dense N-body algebra limited to {DENSE_LIMIT} dimensions, "
            f"got M^N = {grid.M**N}"
        )


def jk_embed(A, k, N):
    """J_k A = I x ... x A x ... x I with A in slot k (1-based)."""
    A = as_matrix(A)
    M = A.shape[0]
    if not (1 <= k <= N):
        raise ValueError(f"slot k={k} outside 1..{N}")
    if M**N > DENSE_LIMIT:
        raise ValueError(f"embedding dimension {M**N} over the dense limit")
    return np.kron(np.eye(M ** (k - 1)), np.kron(A, np.eye(M ** (N - k))))


class ObservableMap:
    """Lazy linear map from single-particle observables to N-body operators.

    Subclasses carry ``grid`` and ``N`` attributes and implement ``apply``.
    """

    def apply(self, A):
        raise NotImplementedError

    def __add__(self, other):
        return MapSum(((1.0, self), (1.0, other)))

    def __sub__(self, other):
        return MapSum(((1.0, self), (-1.0, other)))

    def __rmul__(self, scalar):
        return MapSum(((complex(scalar), self),))


@dataclass
class EmpiricalIn(ObservableMap):
    """A -> (1/N) sum_k J_k A, the time-zero empirical measure."""

    grid: object
    N: int

    def __post_init__(self):
        _guard(self.grid, self.N)

    def apply(self, A):
        A = as_matrix(A)
        out = jk_embed(A, 1, self.N)
        for k in range(2, self.N + 1):
            out += jk_embed(A, k, self.N)
        return out / self.N


@dataclass
class EmpiricalT(ObservableMap):
    """A -> U (M_in A) U^*, the empirical measure carried by a unitary."""

    grid: object
    N: int
    U: np.ndarray

    def __post_init__(self):
        _guard(self.grid, self.N)
        self.U = as_matrix(self.U)
        n = self.grid.M**self.N
        defect = np.linalg.norm(self.U @ self.U.conj().T - np.eye(n), 2)
        if defect > 1e-10:
            raise ValueError(f"conjugating operator is not unitary: defect {defect:.1e}")
        self._inner = EmpiricalIn(self.grid, self.N)

    def apply(self, A):
        return self.U @ self._inner.apply(A) @ self.U.conj().T


@dataclass
class RMap(ObservableMap):
    """A -> trace(R A) * I, the mean-field (constant-in-Z) solution class."""

    grid: object
    N: int
    R: np.ndarray

    def __post_init__(self):
        if isinstance(self.R, GridOperator):
            if self.R.role != "density":
                GridOperator(self.R.grid, self.R.mat, "density")  # validate
            self.R = self.R.mat
        else:
            GridOperator(self.grid, self.R, "density")  # validate
            self.R = as_matrix(self.R)
        _guard(self.grid, self.N)

    def apply(self, A):
        return complex(np.trace(self.R @ as_matrix(A))) * np.eye(self.grid.M**self.N)


@dataclass
class MapSum(ObservableMap):
    terms: tuple  # (coefficient, ObservableMap)

    def __post_init__(self):
        self.grid = self.terms[0][1].grid
        self.N = self.terms[0][1].N

    def apply(self, A):
        out = None
        for c, lam in self.terms:
            piece = c * lam.apply(A)
            out = piece if out is None else out + piece
        return out


@dataclass
class AdStar(ObservableMap):
    """ad*(D) Lambda : A -> -Lambda([D, A])."""

    D: np.ndarray
    inner: ObservableMap

    def __post_init__(self):
        self.D = as_matrix(self.D)
        self.grid = self.inner.grid
        self.N = self.inner.N

    def apply(self, A):
        A = as_matrix(A)
        return -self.inner.apply(self.D @ A - A @ self.D)


@dataclass
class Interaction(ObservableMap):
    """The twisted interaction C[V, L1, L2], a finite sum over V's modes."""

    V: object
    lam1: ObservableMap
    lam2: ObservableMap

    def __post_init__(self):
        self.V.require_even_real()
        self.grid = self.lam1.grid
        self.N = self.lam1.N

    def apply(self, A):
        A = as_matrix(A)
        out = np.zeros((self.grid.M**self.N,) * 2, dtype=complex)
        for m, c in self.V.coeffs.items():
            E = mod_op(self.grid, self.V.omega(m)).mat
            Edag = E.conj().T
            out += c * (
                self.lam1.apply(Edag) @ self.lam2.apply(E @ A)
                - self.lam2.apply(A @ E) @ self.lam1.apply(Edag)
            )
        return out


# functional aliases matching the operation names


def empirical_in(grid, N):
    return EmpiricalIn(grid, N)


def empirical_t(grid, N, U):
    return EmpiricalT(grid, N, U)


def rmap(R, N):
    if not isinstance(R, GridOperator):
        raise ValueError("rmap needs a GridOperator carrying its grid")
    return RMap(grid=R.grid, N=N, R=R)


def ad_star(D, lam, A):
    return AdStar(D=D, inner=lam).apply(A)


def interaction(V, lam1, lam2, A):
    return Interaction(V=V, lam1=lam1, lam2=lam2).apply(A)


# ---------------------------------------------------------------------------
# permutation action and random symmetric densities
# ---------------------------------------------------------------------------


def _perm_index(M, N, sigma):
    idx = np.arange(M**N).reshape((M,) * N)
    # slot j of the output reads slot sigma^{-1}(j) of the input
    inv = np.argsort(sigma)
    return np.transpose(idx, axes=inv).reshape(-1)


def permutation_matrix(M, N, sigma):
    """Unitary U_sigma permuting tensor slots."""
    P = np.zeros((M**N, M**N))
    P[np.arange(M**N), _perm_index(M, N, sigma)] = 1.0
    return P


def symmetry_residual(F, M, N):
    """max over transpositions of |U F U^* - F| (operator sup entrywise)."""
    worst = 0.0
    for k in range(N - 1):
        sigma = list(range(N))
        sigma[k], sigma[k + 1] = sigma[k + 1], sigma[k]
        idx = _perm_index(M, N, sigma)
        worst = max(worst, float(np.max(np.abs(F[np.ix_(idx, idx)] - F))))
    return worst


def random_symmetric_density(grid, N, rng):
    """Symmetrized Wishart density: G^dagger G averaged over the slot action."""
    _guard(grid, N)
    dim = grid.M**N
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    F = G.conj().T @ G
    out = np.zeros_like(F)
    for sigma in itertools.permutations(range(N)):
        idx = _perm_index(grid.M, N, np.array(sigma))
        out += F[np.ix_(idx, idx)]
    out /= np.trace(out)
    return out


def pair_multiplication(grid, V):
    """V_12 = multiplication by V(x_1 - x_2) on the two-particle space."""
    return np.diag(V.pair_values().reshape(-1))


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------


@dataclass
class NBodySetup:
    """Shared ingredients of the dense-propagator identity checks."""

    grid: object
    N: int
    V: object
    hbar: float
    psi_single: np.ndarray

    def __post_init__(self):
        _guard(self.grid, self.N)
        self.psi_single = np.asarray(self.psi_single, dtype=complex)
        nrm = np.sqrt(self.grid.dx * np.sum(np.abs(self.psi_single) ** 2))
        self.psi_single = self.psi_single / nrm
        self._prop = None

    @property
    def propagator(self):
        if self._prop is None:
            self._prop = NBodyPropagator(self.grid, self.N, self.V, self.hbar)
        return self._prop

    def product_state(self):
        return NBodyState.product(self.grid, self.psi_single, self.N, self.hbar)

    def f_in(self):
        return self.product_state().density_matrix()

    def empirical_at(self, t):
        return EmpiricalT(self.grid, self.N, self.propagator.at(t))


def prop32_check(setup, A, t):
    """Interaction-term identity: marginal route against the map route.

    lhs: (N-1)/N trace_H2([V12, A (x) I] F_{N:2}(t)) from the propagated
    state; rhs: trace_HN((C[V, M_N(t), M_N(t)] A) F_N^in). Returns
    (lhs, rhs, |lhs - rhs|).
    """
    grid, N = setup.grid, setup.N
    A = as_matrix(A)
    F_in = setup.f_in()
    F_t = setup.propagator.evolve_density(F_in, t)
    F2 = marginal2(F_t, grid, N)
    V12 = pair_multiplication(grid, setup.V)
    AI = np.kron(A, np.eye(grid.M))
    lhs = (N - 1) / N * np.trace((V12 @ AI - AI @ V12) @ F2)
    Mt = setup.empirical_at(t)
    rhs = np.trace(interaction(setup.V, Mt, Mt, A) @ F_in)
    return complex(lhs), complex(rhs), float(abs(lhs - rhs))


def lemma34_check(grid, N, A, B, F_N):
    """Pair-correlation expansion of a product of empirical values."""
    A, B = as_matrix(A), as_matrix(B)
    F_N = np.asarray(F_N, dtype=complex)
    if symmetry_residual(F_N, grid.M, N) > 1e-8:
        raise ValueError("F_N must be slot-symmetric")
    Min = EmpiricalIn(grid, N)
    lhs = np.trace(Min.apply(A) @ Min.apply(B) @ F_N)
    F1 = marginal1(F_N, grid, N).mat
    rhs = np.trace(A @ B @ F1) / N
    if N > 1:
        F2 = marginal2(F_N, grid, N)
        rhs += (N - 1) / N * np.trace(np.kron(A, B) @ F2)
    return float(abs(lhs - rhs))


def eq32_residual(setup, A, t, delta_t):
    """Finite-difference residual of the evolution equation of the
    empirical measure; exact in the map terms, O(delta_t^2) in time."""
    grid, hbar = setup.grid, setup.hbar
    A = as_matrix(A)
    lam_p = setup.empirical_at(t + delta_t)
    lam_m = setup.empirical_at(t - delta_t)
    lam_0 = setup.empirical_at(t)
    fd = 1j * hbar * (lam_p.apply(A) - lam_m.apply(A)) / (2.0 * delta_t)
    kin = AdStar(kinetic_matrix(grid, hbar), lam_0).apply(A)
    inter = interaction(setup.V, lam_0, lam_0, A)
    return op_norm(fd - kin + inter)


def hartree_as_special_case(traj, A, t, delta_t):
    """Residual of the evolution equation along the constant-in-Z class.

    With Lambda = rmap(R(t)) every term is a scalar times the identity, so
    the residual equals |trace((i*hbar dR/dt - [H_mf, R]) A)| up to the
    finite-difference and trajectory errors.
    """
    grid, hbar = traj.grid, traj.hbar
    A = as_matrix(A)
    i0 = traj.index_of(t)
    steps = int(round(delta_t / traj.dt))
    if steps < 1 or abs(steps * traj.dt - delta_t) > 1e-9:
        raise ValueError("delta_t must be a positive multiple of the stored dt")
    lam = lambda i: rmap(traj.density(index=i), 1)
    fd = (
        1j
        * hbar
        * (lam(i0 + steps).apply(A) - lam(i0 - steps).apply(A))
        / (2.0 * delta_t)
    )
    lam0 = lam(i0)
    kin = AdStar(kinetic_matrix(grid, hbar), lam0).apply(A)
    inter = interaction(traj.potential, lam0, lam0, A)
    return op_norm(fd - kin + inter)


def initial_fluctuation_identity(grid, N, B, F_N, R):
    """Exact expansion of the squared initial fluctuation.

    lhs = ||((M_N^in - rmap(R)) B) sqrt(F_N)||_HS^2; rhs is the marginal
    expansion with the pair-correlation, variance and bias terms. Returns
    (lhs, rhs, |lhs - rhs|).
    """
    B = as_matrix(B)
    F_N = np.asarray(F_N, dtype=complex)
    Rm = as_matrix(R)
    ev, Q = np.linalg.eigh(0.5 * (F_N + F_N.conj().T))
    sqrtF = (Q * np.sqrt(np.clip(ev, 0.0, None))) @ Q.conj().T
    X = EmpiricalIn(grid, N).apply(B) - complex(np.trace(Rm @ B)) * np.eye(
        grid.M**N
    )
    lhs = float(np.linalg.norm(X @ sqrtF, "fro") ** 2)

    F1 = marginal1(F_N, grid, N).mat
    tB = np.trace(B @ F1)
    rhs = (np.trace(B.conj().T @ B @ F1) - abs(tB) ** 2) / N
    rhs += abs(np.trace(B @ (F1 - Rm))) ** 2
    if N > 1:
        F2 = marginal2(F_N, grid, N)
        rhs += (
            (N - 1)
            / N
            * np.trace(np.kron(B.conj().T, B) @ (F2 - np.kron(F1, F1)))
        )
    rhs = float(np.real(rhs))
    return lhs, rhs, abs(lhs - rhs)


def initial_fluctuation_sup(R, N, probes):
    """sup over unit-norm probes of the initial fluctuation for factorized
    data F_N = R^(x N): closed form (var_R(B)/N)^(1/2) per probe."""
    Rm = as_matrix(R)
    worst = 0.0
    for B in probes:
        B = as_matrix(B)
        nrm = op_norm(B)
        if nrm == 0:
            continue
        B = B / nrm
        var = np.trace(B.conj().T @ B @ Rm).real - abs(np.trace(B @ Rm)) ** 2
        worst = max(worst, np.sqrt(max(var, 0.0) / N))
    return float(worst)
