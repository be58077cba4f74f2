"""Quantum transport of observables against classical symbol transport.

Compares the conjugated observable U(t,s) OP[b] U(s,t) with the
quantization of the classically transported symbol. The conjugation by the
forward propagator corresponds to composing the symbol with the flow *from
t back to s* (pulling phase points back to where the observable was
defined); the free flow makes this pairing exact, which pins the
orientation. Defects are measured on the band-limited subspace, where the
discretization is spectrally clean.
"""

from __future__ import annotations

import numpy as np

from .phasespace import (
    FourierSymbol,
    GridOperator,
    band_restricted_norm,
    mod_op,
    quantize,
    spectral_shift,
)
from .cdyn import characteristics
from .potentials import PotentialSeries
from .qdyn import kinetic_matrix, propagate_single

__all__ = [
    "heisenberg_obs",
    "transported_symbol_values",
    "transported_quantization",
    "egorov_defect",
    "commutator_ratio",
    "uniformity_scan",
    "remainder_symbol",
    "lemma55_identity_check",
    "momentum_matrix",
    "quantize_xi_times",
]


def heisenberg_obs(b, timeline, t, s, hbar, dt):
    """U(t,s) OP[b] U(s,t): quantize, then conjugate by the propagator.

    The propagator matrix is built by pushing the identity columns from s
    to t with the split-step integrator; its adjoint is the reverse leg.
    """
    grid = timeline.grid
    Q = quantize(grid, hbar, b).mat
    if t == s:
        return GridOperator(grid, Q)
    U = propagate_single(np.eye(grid.M, dtype=complex), timeline, s, t, dt, hbar)
    return GridOperator(grid, U @ Q @ U.conj().T)


def transported_symbol_values(b, timeline, t, s, x, xi):
    """Pointwise values of b(Phi(t, s)(x, xi)) via the characteristic flow."""
    X, XI = characteristics(timeline, t, s, (x, xi))
    from .phasespace import symbol_eval

    return symbol_eval(b, X, XI)


def generic_quantization(grid, hbar, symbol_values):
    """Weyl quantization of a sampled symbol by the momentum midpoint rule.

    symbol_values(x_array, p_array) -> values of c on a meshgrid. The
    plane-wave matrix element of the Weyl operator is
    <k'| OP[c] |k> = c^hat_{k'-k}(hbar*(xi_k + xi_k')/2), so the symbol is
    analyzed in x on the half grid (2M points resolve every mode gap
    |k'-k| <= M-1) and read at the half-grid momentum midpoints. Exact for
    band-limited symbols; Hermitian for real ones.
    """
    h = float(hbar)
    M = grid.M
    ys = grid.half_x
    qs = np.arange(-M, M)  # xi_k + xi_k' in units of 2*pi/L
    ps = h * np.pi * qs / grid.L
    X, P = np.meshgrid(ys, ps, indexing="ij")
    C = symbol_values(X, P)  # (2M, 2M)
    Chat = np.fft.fft(C, axis=0) / (2 * M)  # x-mode analysis, fft order on 2M
    k_ord = grid.modes  # fft-order integer modes of the M grid
    gap = (k_ord[:, None] - k_ord[None, :]) % (2 * M)
    qidx = k_ord[:, None] + k_ord[None, :] + M
    Kt = Chat[gap, qidx]
    F = np.exp(-1j * np.outer(grid.xi, grid.x)) / np.sqrt(M)
    return GridOperator(grid, F.conj().T @ Kt @ F)


def transported_quantization(b, timeline, t, s, hbar):
    """Weyl quantization of the transported symbol b o Phi(t, s).

    The composite is no longer a finite Fourier series, so this takes the
    generic-symbol path: spectral x-analysis on the half grid combined with
    the momentum midpoint rule, with the flow evaluated pointwise.
    """
    grid = timeline.grid

    def values(x, p):
        return transported_symbol_values(b, timeline, t, s, x, p)

    return generic_quantization(grid, hbar, values)


def egorov_defect(b, timeline, t, s, hbar, dt, kmax=None):
    """Band-restricted gap between quantum transport and classical transport.

    Pairs heisenberg_obs(t, s) with the quantization of b o Phi(s, t): the
    conjugated observable acts at time t like OP[b] did at time s, so the
    matching symbol rides the flow from t back to s. Scales as hbar^2.

    The default band is M/8: the flow moves band modes by Dp/hbar, and the
    probe band plus that transfer must stay inside the frequency window for
    the comparison to see the semiclassical defect instead of window
    clipping.
    """
    grid = timeline.grid
    B_q = heisenberg_obs(b, timeline, t, s, hbar, dt).mat
    B_c = transported_quantization(b, timeline, s, t, hbar).mat
    return band_restricted_norm(B_q - B_c, grid, kmax or grid.M // 8)


def commutator_ratio(omega, Op, hbar, kmax=None):
    """||[E_omega, Op]|| / hbar on the band-limited subspace."""
    grid = Op.grid if isinstance(Op, GridOperator) else None
    if grid is None:
        raise ValueError("commutator_ratio needs a GridOperator")
    E = mod_op(grid, omega).mat
    O = Op.mat
    return band_restricted_norm(E @ O - O @ E, grid, kmax or grid.M // 4) / float(
        hbar
    )


def uniformity_scan(b, timeline, T, omegas, hbars, dt, kmax=None):
    """Commutator ratios across (omega, hbar) with the analytic denominator.

    For each pair, reports ratio / (|w| e^{(d+5) G2 T} + hbar^2 W / ((d+5) G2));
    boundedness of the normalized column across hbar is the desk-scale
    uniformity statement.
    """
    grid = timeline.grid
    d = grid.d
    G2 = timeline.hessian_bound()
    Wsum = timeline.sup_fourier_weight()
    rows = []
    for h in hbars:
        Bq = heisenberg_obs(b, timeline, T, 0.0, h, dt)
        for om in omegas:
            ratio = commutator_ratio(om, Bq, h, kmax)
            if G2 > 0:
                denom = abs(om) * np.exp((d + 5) * G2 * T) + h**2 * Wsum / (
                    (d + 5) * G2
                )
            else:
                denom = abs(om) if om != 0 else 1.0
            rows.append(
                {
                    "hbar": float(h),
                    "omega": float(om),
                    "t": float(T),
                    "s": 0.0,
                    "ratio": float(ratio),
                    "bound_denominator": float(denom),
                    "normalized": float(ratio / denom) if denom > 0 else 0.0,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# third-order remainder of the semiclassical expansion
# ---------------------------------------------------------------------------


def _phase_factor(theta):
    """2*(theta - sin theta)/theta^3, evenly extended, series near zero."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-3
    t2 = theta * theta
    series = 1.0 / 3.0 - t2 / 60.0 + t2 * t2 / 2520.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(
            small, series, 2.0 * (theta - np.sin(theta)) / np.where(small, 1.0, theta**3)
        )
    return direct if direct.shape else float(direct)


def remainder_symbol(vmode, amode, hbar, grid):
    """Closed form of the expansion remainder for one potential mode pair
    and one symbol term.

    For V(x) = v exp(i*w*x) + conj(v) exp(-i*w*x) and
    a = c exp(i(alpha x + beta xi)), the tau integral of the third-order
    term collapses to (2/h^3)(theta - sin theta) with theta = beta*h*w/2,
    giving a two-term exact symbol at x-frequencies alpha +- w.
    """
    w, v = float(vmode[0]), complex(vmode[1])
    alpha, beta, c = float(amode[0]), float(amode[1]), complex(amode[2])
    h = float(hbar)
    theta = 0.5 * beta * h * w
    amp = (w**3 * beta**3 / 8.0) * _phase_factor(theta) * c
    return FourierSymbol(
        grid,
        (
            (alpha + w, beta, v * amp),
            (alpha - w, beta, -np.conj(v) * amp),
        ),
    )


def momentum_matrix(grid):
    """Dense Fourier multiplier by xi (momentum over hbar)."""
    return np.fft.ifft(
        np.fft.fft(np.eye(grid.M), axis=0) * grid.xi[:, None], axis=0
    )


def quantize_xi_times(grid, hbar, alpha, beta):
    """Weyl operator of xi * exp(i(alpha x + beta xi)): the symmetrized
    product (hbar/2)(P Q + Q P) with P the xi-multiplier."""
    Q = quantize(grid, hbar, FourierSymbol.plane_wave(grid, alpha, beta)).mat
    P = momentum_matrix(grid)
    return 0.5 * hbar * (P @ Q + Q @ P)


def poisson_with_hamiltonian(grid, hbar, vseries, amode):
    """Quantization of {xi^2/2 + V, a} for one plane-wave term a."""
    alpha, beta, c = float(amode[0]), float(amode[1]), complex(amode[2])
    out = (1j * alpha * c) * quantize_xi_times(grid, hbar, alpha, beta)
    # -V'(x) * d_xi a: still a finite series
    terms = []
    for m, vc in vseries.coeffs.items():
        om = vseries.omega(m)
        terms.append((alpha + om, beta, -vc * (1j * om) * (1j * beta) * c))
    if terms:
        out += quantize(grid, hbar, FourierSymbol(grid, tuple(terms))).mat
    return out


def lemma55_identity_check(vmode, amode, hbar, grid, kmax=None):
    """Commutator-plus-transport residual against the closed-form remainder.

    Builds (1/(i*hbar))[-h^2/2 Lap + V, OP[a]] + OP[{xi^2/2 + V, a}]
    from dense matrices and subtracts hbar^2 OP[remainder]; the band
    residual is zero up to rounding, and stays so when V vanishes (kinetic
    exactness).
    """
    w, v = float(vmode[0]), complex(vmode[1])
    alpha, beta, c = float(amode[0]), float(amode[1]), complex(amode[2])
    h = float(hbar)
    vseries = (
        PotentialSeries(grid, {grid.mode_of(w): v, -grid.mode_of(w): np.conj(v)})
        if v != 0
        else PotentialSeries.zero(grid)
    )
    H = kinetic_matrix(grid, h) + np.diag(vseries.values().astype(complex))
    Q = quantize(grid, h, FourierSymbol.plane_wave(grid, alpha, beta, c)).mat
    lhs = (H @ Q - Q @ H) / (1j * h)
    lhs += poisson_with_hamiltonian(grid, h, vseries, (alpha, beta, c))
    if v != 0:
        R = quantize(grid, h, remainder_symbol(vmode, amode, h, grid)).mat
        lhs -= h**2 * R
    return band_restricted_norm(lhs, grid, kmax or grid.M // 4)
