"""Verification suites: each runs a block of identity and scaling checks
and returns a JSON-ready report {check, value, tolerance, pass}.

Tolerances are pinned here, not in the callers. Suites are deterministic
given their seed/config.
"""

from __future__ import annotations

import time

import numpy as np

from . import cdyn, egorov, qemp
from .experiments import ConvergeConfig, converge_run, gaussian_on_torus, uniformity_report
from .metrics import loglog_slope, records_content_hash
from .phasespace import (
    FourierSymbol,
    Grid,
    GridOperator,
    band_restricted_norm,
    make_grid,
    mod_op,
    moyal,
    op_norm,
    pure_state_density,
    quantize,
    wigner_field,
    wigner_pair,
)
from .potentials import PotentialSeries, PotentialTimeline
from .qdyn import hartree_evolve, kinetic_matrix, marginal1

__all__ = [
    "run_phasespace_suite",
    "run_algebra_suite",
    "run_classical_suite",
    "run_egorov_suite",
    "run_converge_suite",
]


def _check(name, value, tol, mode="max"):
    ok = bool(value <= tol) if mode == "max" else bool(value >= tol)
    return {
        "check": name,
        "value": float(value),
        "tolerance": float(tol),
        "mode": mode,
        "pass": ok,
    }


def _report(suite, checks, config_echo=None, t0=None):
    rep = {
        "suite": suite,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
        "n_checks": len(checks),
    }
    if config_echo is not None:
        rep["config"] = config_echo
    if t0 is not None:
        rep["runtime_s"] = round(time.time() - t0, 3)
    return rep


def _random_symbol(grid, rng, n_terms=3, max_mode=None, beta_scale=1.5, real=False):
    max_mode = max_mode or grid.M // 8
    terms = []
    for _ in range(n_terms):
        m = int(rng.integers(-max_mode, max_mode + 1))
        beta = float(rng.uniform(-beta_scale, beta_scale))
        c = complex(rng.normal(), rng.normal())
        terms.append((grid.freq_of(m), beta, c))
    sym = FourierSymbol(grid, tuple(terms))
    return (sym + sym.conj()) * 0.5 if real else sym


def _random_hermitian(rng, n, norm_one=True):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = A + A.conj().T
    if norm_one:
        A /= np.linalg.norm(A, 2)
    return A


# ---------------------------------------------------------------------------
# phase-space calculus suite (acceptance 1)
# ---------------------------------------------------------------------------


def run_phasespace_suite(seed=7, M=64):
    t0 = time.time()
    rng = np.random.default_rng(seed)
    grid = make_grid(1, M, 2.0 * np.pi)
    kmax = M // 8  # products of two M/8-band symbols stay inside the window
    checks = []

    # Moyal morphism, adjoint symmetry, unit element
    worst_morph, worst_adj, worst_unit = 0.0, 0.0, 0.0
    for _ in range(20):
        a = _random_symbol(grid, rng)
        b = _random_symbol(grid, rng)
        h = float(rng.uniform(0.05, 1.0))
        Qa, Qb = quantize(grid, h, a).mat, quantize(grid, h, b).mat
        Qab = quantize(grid, h, moyal(a, b, h)).mat
        scale = max(a.coeff_sum() * b.coeff_sum(), 1e-30)
        worst_morph = max(
            worst_morph, band_restricted_norm(Qa @ Qb - Qab, grid, kmax) / scale
        )
        worst_adj = max(
            worst_adj,
            float(np.max(np.abs(quantize(grid, h, a.conj()).mat - Qa.conj().T))),
        )
        one = FourierSymbol.constant(grid)
        worst_unit = max(
            worst_unit,
            float(
                np.max(
                    np.abs(
                        quantize(grid, h, moyal(a, one, h)).mat
                        - quantize(grid, h, moyal(one, a, h)).mat
                    )
                )
            ),
        )
    checks.append(_check("moyal_morphism", worst_morph, 1e-10))
    checks.append(_check("quantize_adjoint", worst_adj, 1e-12))
    checks.append(_check("moyal_unit", worst_unit, 1e-12))

    # modulation operators: group law and conjugation shift identity
    worst_group, worst_shift = 0.0, 0.0
    for m in range(1, M // 4 + 1):
        om = grid.freq_of(m)
        E = mod_op(grid, om).mat
        Em = mod_op(grid, -om).mat
        worst_group = max(
            worst_group, float(np.max(np.abs(E @ Em - np.eye(M))))
        )
    for _ in range(10):
        m = int(rng.integers(1, M // 4 + 1))
        om = grid.freq_of(m)
        h = float(rng.uniform(0.05, 1.0))
        # band budget: kmax + omega-mode + symbol mode must stay below M/2
        b = _random_symbol(grid, rng, n_terms=1, max_mode=M // 16)
        E = mod_op(grid, om).mat
        lhs = E @ quantize(grid, h, b).mat @ E.conj().T
        shifted = FourierSymbol(
            grid,
            tuple(
                (al, be, c * np.exp(-1j * be[0] * h * om)) for al, be, c in b.terms
            ),
        )
        rhs = quantize(grid, h, shifted).mat
        worst_shift = max(
            worst_shift, band_restricted_norm(lhs - rhs, grid, kmax)
        )
    checks.append(_check("mod_op_group", worst_group, 1e-13))
    checks.append(_check("mod_op_conjugation_shift", worst_shift, 1e-10))

    # Wigner pairing and field contracts
    psi = gaussian_on_torus(grid, np.pi, 0.6) * np.exp(2j * grid.x)
    K = pure_state_density(grid, psi)
    h = 0.5
    W = wigner_field(K, h, resolution=2)
    a1 = FourierSymbol.plane_wave(grid, grid.freq_of(1), 0.0)
    quad = np.sum(np.exp(1j * grid.x) * np.abs(psi) ** 2 * grid.dx)
    checks.append(
        _check(
            "pair_position_quadrature",
            abs(wigner_pair(K, a1, h) - quad),
            1e-12,
        )
    )
    worst_field = 0.0
    for _ in range(10):
        a = _random_symbol(grid, rng, n_terms=2, max_mode=M // 4)
        worst_field = max(
            worst_field, abs(W.pair_with_symbol(a) - wigner_pair(K, a, h))
        )
    checks.append(_check("field_pairing_contract", worst_field, 1e-6))
    checks.append(_check("field_mass", abs(W.integrate() - 1.0), 1e-8))
    checks.append(
        _check("field_reality", float(np.max(np.abs(W.values.imag))), 1e-10)
    )
    psi2 = gaussian_on_torus(grid, 2.0, 0.8)
    K2 = pure_state_density(grid, psi2)
    W2 = wigner_field(K2, h, resolution=2)
    plancherel = abs(
        2.0 * np.pi * h * np.sum(W.values.conj() * W2.values) * W.cell_measure
        - np.trace(K.mat.conj().T @ K2.mat)
    )
    checks.append(_check("plancherel", plancherel, 1e-6))

    # pairing sesquilinearity under adjoints
    worst_conj = 0.0
    for _ in range(5):
        G = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
        a = _random_symbol(grid, rng, n_terms=2)
        worst_conj = max(
            worst_conj,
            abs(
                wigner_pair(GridOperator(grid, G.conj().T), a.conj(), h)
                - np.conj(wigner_pair(GridOperator(grid, G), a, h))
            ),
        )
    checks.append(_check("pair_adjoint_symmetry", worst_conj, 1e-10))

    return _report("phasespace", checks, {"seed": seed, "M": M}, t0)


# ---------------------------------------------------------------------------
# empirical-measure algebra suite (acceptance 2, 3, 9)
# ---------------------------------------------------------------------------


def _matrix_units(M):
    units = []
    for i in range(M):
        for j in range(M):
            E = np.zeros((M, M), dtype=complex)
            E[i, j] = 1.0
            units.append(E)
    return units


def run_algebra_suite(seed=7):
    t0 = time.time()
    rng = np.random.default_rng(seed)
    # M=4 sits below the quantization floor but the algebra needs no
    # quantization; the Grid constructor is used directly.
    g4 = Grid(d=1, M=4, L=2.0 * np.pi)
    g8 = make_grid(1, 8, 8.0 * np.pi)
    checks = []

    # Lemma 3.3 on the complete matrix-unit family (all 16 x 16 pairs), N=3
    worst_jk, worst_min = 0.0, 0.0
    units = _matrix_units(4)
    N = 3
    Min = qemp.EmpiricalIn(g4, N)
    emb = {
        (i, k): qemp.jk_embed(A, k, N)
        for i, A in enumerate(units)
        for k in (1, 2, 3)
    }
    min_applied = [Min.apply(A) for A in units]
    for i, A in enumerate(units):
        for j, B in enumerate(units):
            for k in (1, 2, 3):
                for l in (1, 2, 3):
                    JA, JB = emb[(i, k)], emb[(j, l)]
                    comm = JA @ JB - JB @ JA
                    target = qemp.jk_embed(A @ B - B @ A, k, N) if k == l else 0.0
                    worst_jk = max(worst_jk, float(np.max(np.abs(comm - target))))
            lhs = min_applied[i] @ min_applied[j] - min_applied[j] @ min_applied[i]
            rhs = Min.apply(A @ B - B @ A) / N
            worst_min = max(worst_min, float(np.max(np.abs(lhs - rhs))))
    checks.append(_check("lemma33_jk", worst_jk, 1e-12))
    checks.append(_check("lemma33_empirical", worst_min, 1e-12))

    # Lemma 3.4 with symmetrized Wishart inputs
    worst = 0.0
    for _ in range(5):
        F = qemp.random_symmetric_density(g4, 3, rng)
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        worst = max(worst, qemp.lemma34_check(g4, 3, A, B, F))
    checks.append(_check("lemma34", worst, 1e-11))

    # propagated product state: Lemma 2.3 duality, isometry, Prop. 3.2
    V4 = PotentialSeries.cosine(g4, 0.5)
    psi = np.exp(-((g4.x - np.pi) ** 2)) + 0.3j * np.sin(g4.x)
    setup = qemp.NBodySetup(grid=g4, N=3, V=V4, hbar=0.5, psi_single=psi)
    F_in = setup.f_in()
    F_t = setup.propagator.evolve_density(F_in, 0.3)
    Mt = setup.empirical_at(0.3)
    worst_dual, worst_iso = 0.0, 0.0
    for _ in range(10):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        lhs = np.trace(A @ marginal1(F_t, g4, 3).mat)
        rhs = np.trace(Mt.apply(A) @ F_in)
        worst_dual = max(worst_dual, abs(lhs - rhs))
        worst_iso = max(
            worst_iso,
            abs(
                op_norm(Mt.apply(A))
                - op_norm(qemp.EmpiricalIn(g4, 3).apply(A))
            ),
        )
        # boundedness witness of the empirical map
        if op_norm(Mt.apply(A)) > op_norm(A) + 1e-12:
            worst_iso = max(worst_iso, 1.0)
    checks.append(_check("lemma23_duality", worst_dual, 1e-10))
    checks.append(_check("empirical_isometry", worst_iso, 1e-12))

    # map-level interaction identity over the complete matrix-unit basis
    worst = 0.0
    for A in units:
        _, _, diff = qemp.prop32_check(setup, A, 0.3)
        worst = max(worst, diff)
    checks.append(_check("prop32_unit_M4", worst, 1e-9))

    # Lemma 3.8 and the interaction norm bound
    Rop = pure_state_density(g4, np.exp(-((g4.x - 2.0) ** 2)) + 0.1j * g4.x)
    lamR = qemp.rmap(Rop, 2)
    rho = np.real(np.diag(Rop.mat)) / g4.dx
    vr = np.zeros(4, dtype=complex)
    for m, c in V4.coeffs.items():
        om = V4.omega(m)
        vr += c * np.exp(1j * om * g4.x) * (
            g4.dx * np.sum(rho * np.exp(-1j * om * g4.x))
        )
    VR = np.diag(vr.real)
    worst, worst_bound = 0.0, 0.0
    Min2 = qemp.EmpiricalIn(g4, 2)
    for _ in range(6):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        lhs = qemp.interaction(V4, lamR, lamR, A)
        rhs = -qemp.AdStar(VR, lamR).apply(A)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        bound = 2.0 * op_norm(A) * V4.coeff_l1()
        worst_bound = max(
            worst_bound, op_norm(qemp.interaction(V4, Min2, Min2, A)) - bound
        )
    checks.append(_check("lemma38", worst, 1e-12))
    checks.append(_check("interaction_norm_bound", worst_bound, 1e-12))

    # bilinearity of the interaction in both map slots
    lamM = Min2
    a1, a2 = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    combo = qemp.MapSum(((a1, lamM), (a2, lamR)))
    lhs = qemp.interaction(V4, combo, lamM, A)
    rhs = a1 * qemp.interaction(V4, lamM, lamM, A) + a2 * qemp.interaction(
        V4, lamR, lamM, A
    )
    bil1 = float(np.max(np.abs(lhs - rhs)))
    lhs = qemp.interaction(V4, lamM, combo, A)
    rhs = a1 * qemp.interaction(V4, lamM, lamM, A) + a2 * qemp.interaction(
        V4, lamM, lamR, A
    )
    bil = max(bil1, float(np.max(np.abs(lhs - rhs))))
    checks.append(_check("interaction_bilinearity", bil, 1e-12))

    # random-probe block at M=8, N=2 (gentle grid: L=8*pi)
    V8 = PotentialSeries.cosine(g8, 0.25)
    psi8 = np.exp(-((g8.x - 4.0 * np.pi) ** 2) / 4.0)
    s2 = qemp.NBodySetup(grid=g8, N=2, V=V8, hbar=0.5, psi_single=psi8)
    worst32, worst34, worst49 = 0.0, 0.0, 0.0
    F8 = qemp.random_symmetric_density(g8, 2, rng)
    R8 = pure_state_density(g8, psi8)
    for _ in range(20):
        A = _random_hermitian(rng, 8)
        _, _, diff = qemp.prop32_check(s2, A, 0.25)
        worst32 = max(worst32, diff)
        B = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        worst34 = max(worst34, qemp.lemma34_check(g8, 2, A, B, F8))
        _, _, d49 = qemp.initial_fluctuation_identity(g8, 2, B, F8, R8.mat)
        worst49 = max(worst49, d49)
    checks.append(_check("prop32_random_M8", worst32, 1e-8))
    checks.append(_check("lemma34_random_M8", worst34, 1e-8))
    checks.append(_check("initial_fluctuation_identity", worst49, 1e-8))

    # factorized initial data: identity collapses to the variance term
    B = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    F_fact = s2.f_in()
    Rfact = marginal1(F_fact, g8, 2)
    lhs, rhs, _ = qemp.initial_fluctuation_identity(g8, 2, B, F_fact, Rfact.mat)
    var = (
        np.trace(B.conj().T @ B @ Rfact.mat).real
        - abs(np.trace(B @ Rfact.mat)) ** 2
    ) / 2.0
    checks.append(
        _check("initial_fluctuation_factorized", abs(lhs - var), 1e-10)
    )

    # acceptance 9: fluctuation sup below 1/sqrt(N) for N = 2..6
    probes = [
        rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)) for _ in range(20)
    ]
    worst_gap = -np.inf
    for N in (2, 3, 4, 5, 6):
        sup = qemp.initial_fluctuation_sup(R8, N, probes)
        worst_gap = max(worst_gap, sup - 1.0 / np.sqrt(N))
    checks.append(_check("initial_fluctuation_bound", worst_gap, 1e-10))

    # acceptance 3: evolution-equation residuals, second order, < 1e-6
    Ah = _random_hermitian(rng, 8)
    res = {dt: qemp.eq32_residual(s2, Ah, 0.3, dt) for dt in (4e-3, 2e-3, 1e-3)}
    checks.append(_check("eq32_residual_1e-3", res[1e-3], 1e-6))
    ratio1, ratio2 = res[4e-3] / res[2e-3], res[2e-3] / res[1e-3]
    worst_ratio = max(abs(ratio1 - 4.0), abs(ratio2 - 4.0))
    checks.append(_check("eq32_second_order", worst_ratio, 1.0))

    # kicked state: visibly non-stationary so the delta_t^2 law is observable
    psi_kick = psi8 * np.exp(2j * g8.freq_of(2) * g8.x)
    psi_kick /= np.sqrt(g8.dx * np.sum(np.abs(psi_kick) ** 2))
    traj = hartree_evolve(psi_kick, V8, 0.6, 1e-3, 0.5)
    checks.append(
        _check(
            "thm37_residual_1e-3",
            qemp.hartree_as_special_case(traj, Ah, 0.3, 1e-3),
            1e-5,
        )
    )
    traj_fine = hartree_evolve(psi_kick, V8, 0.6, 2.5e-4, 0.5)
    res_h = {
        dt: qemp.hartree_as_special_case(traj_fine, Ah, 0.3, dt)
        for dt in (8e-3, 4e-3, 2e-3)
    }
    ratio1 = res_h[8e-3] / res_h[4e-3]
    ratio2 = res_h[4e-3] / res_h[2e-3]
    worst_ratio = max(abs(ratio1 - 4.0), abs(ratio2 - 4.0))
    checks.append(_check("thm37_second_order", worst_ratio, 1.0))

    # error-evolution consistency: the difference map obeys the mean-field
    # conjugated equation built from already-tested pieces
    s2_kick = qemp.NBodySetup(grid=g8, N=2, V=V8, hbar=0.5, psi_single=psi_kick)
    worst_eq36 = _eq36_residual(s2_kick, traj, Ah, 0.3, 1e-3)
    checks.append(_check("eq36_residual", worst_eq36, 1e-5))

    return _report("algebra", checks, {"seed": seed}, t0)


def _eq36_residual(setup, traj, A, t, delta_t):
    """Residual of the error-evolution equation for M_N(t) - R(t)."""
    grid, hbar = setup.grid, setup.hbar
    steps = int(round(delta_t / traj.dt))
    i0 = traj.index_of(t)

    def diff_map(i, tau):
        return qemp.MapSum(
            (
                (1.0, setup.empirical_at(tau)),
                (-1.0, qemp.rmap(traj.density(index=i), setup.N)),
            )
        )

    lam_p = diff_map(i0 + steps, t + delta_t)
    lam_m = diff_map(i0 - steps, t - delta_t)
    lam_0 = diff_map(i0, t)
    fd = 1j * hbar * (lam_p.apply(A) - lam_m.apply(A)) / (2.0 * delta_t)
    vmf = traj.mean_field.series_at(t)
    D = kinetic_matrix(grid, hbar) + np.diag(vmf.values().astype(complex))
    kin = qemp.AdStar(D, lam_0).apply(A)
    inter = qemp.interaction(setup.V, lam_0, setup.empirical_at(t), A)
    return op_norm(fd - kin + inter)


# ---------------------------------------------------------------------------
# classical suite (acceptance 8)
# ---------------------------------------------------------------------------


def run_classical_suite(seed=7, mc_samples=10000, mc_N=8):
    t0 = time.time()
    rng = np.random.default_rng(seed)
    grid = make_grid(1, 16, 2.0 * np.pi)
    V = PotentialSeries.cosine(grid, 0.5)
    checks = []

    Z = cdyn.ParticleEnsemble(
        grid.L, rng.uniform(0, grid.L, 16), rng.normal(0.0, 1.0, 16)
    )

    # free flow is exact
    trf = cdyn.newton_flow(Z, PotentialSeries.zero(grid), 1.0, 0.01)
    Zf = trf.at(1.0)
    err = max(
        float(np.max(np.abs(Zf.x - np.mod(Z.x + Z.xi, grid.L)))),
        float(np.max(np.abs(Zf.xi - Z.xi))),
    )
    checks.append(_check("free_flow_exact", err, 1e-12))

    # momentum conservation over a long run
    tr = cdyn.newton_flow(Z, V, 2.0, 0.002)
    drift = abs(float(tr.momenta[-1].sum() - tr.momenta[0].sum()))
    checks.append(_check("momentum_conservation", drift, 1e-12))

    # Vlasov weak residual: 10-function family, second order under refinement
    family = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (-1, 1),
              (2, 2), (-2, 1)]

    def worst_residual(dt, delta, t_mid):
        traj = cdyn.newton_flow(Z, V, 0.8, dt)
        worst = 0.0
        for al, be in family:
            phi = FourierSymbol.real_mode(grid, float(al), float(be))
            worst = max(
                worst, cdyn.vlasov_residual(traj, phi, t_mid, delta, V)
            )
        return worst

    r0 = worst_residual(0.01, 0.04, 0.4)
    r1 = worst_residual(0.005, 0.02, 0.4)
    r2 = worst_residual(0.0025, 0.01, 0.4)
    slope, _, _ = loglog_slope([(0.04, r0), (0.02, r1), (0.01, r2)])
    checks.append(_check("vlasov_second_order_slope", abs(slope - 2.0), 0.3))

    # transported-test-function tautology
    phi = FourierSymbol.real_mode(grid, 1.0, 0.7)
    taut = abs(
        cdyn.empirical_map_value(tr, 1.0, phi)
        - cdyn.empirical_pair(tr.at(1.0), phi)
    )
    checks.append(_check("transport_tautology", taut, 0.0))

    # symplectic volume of the Verlet flow (finite differences)
    def flow_map(z):
        Z0 = cdyn.ParticleEnsemble(grid.L, np.array([z[0], 2.0]), np.array([z[1], -0.3]))
        out = cdyn.newton_flow(Z0, V, 0.5, 1e-3).at(0.5)
        return np.array([out.x[0], out.xi[0], out.x[1], out.xi[1]])

    h = 1e-5
    base = np.array([1.0, 0.4])
    J = np.zeros((2, 2))
    for i in range(2):
        dp = np.zeros(2)
        dp[i] = h
        J[:, i] = (flow_map(base + dp)[:2] - flow_map(base - dp)[:2]) / (2 * h)
    # the particle-1 block is not symplectic alone; check the full 4x4 map
    J4 = np.zeros((4, 4))
    base4 = np.array([1.0, 0.4, 2.0, -0.3])

    def flow4(z):
        Z0 = cdyn.ParticleEnsemble(
            grid.L, np.array([z[0], z[2]]), np.array([z[1], z[3]])
        )
        out = cdyn.newton_flow(Z0, V, 0.5, 1e-3).at(0.5)
        return np.array([out.x[0], out.xi[0], out.x[1], out.xi[1]])

    for i in range(4):
        dp = np.zeros(4)
        dp[i] = h
        J4[:, i] = (flow4(base4 + dp) - flow4(base4 - dp)) / (2 * h)
    checks.append(
        _check("verlet_volume", abs(float(np.linalg.det(J4)) - 1.0), 1e-5)
    )

    # characteristics: group property and unit Jacobian
    tl = PotentialTimeline.constant(V, 0.0, 3.5)
    a = cdyn.characteristics(tl, 1.2, 0.3, (2.0, -0.4))
    b0 = cdyn.characteristics(tl, 0.8, 0.3, (2.0, -0.4))
    b = cdyn.characteristics(tl, 1.2, 0.8, b0)
    checks.append(
        _check(
            "characteristics_group",
            float(np.hypot(a[0] - b[0], a[1] - b[1])),
            1e-8,
        )
    )
    jd = _characteristics_jet_det(tl, 1.5, 0.0, (2.0, -0.4))
    checks.append(_check("characteristics_jacobian_det", abs(jd - 1.0), 1e-6))

    # flow-derivative growth against the exponential envelope
    G2 = V.hessian_bound()
    base_q = (1.5, 0.2)
    rate_ok = 0.0
    d0 = cdyn.flow_derivative_probe(tl, 0.5, 0.0, (1, 0), base_q)
    for tt in (1.0, 2.0, 3.0):
        dv = cdyn.flow_derivative_probe(tl, tt, 0.0, (1, 0), base_q)
        envelope = d0 * np.exp(1.1 * G2 * (tt - 0.5))
        rate_ok = max(rate_ok, dv - envelope)
    checks.append(_check("flow_derivative_envelope", rate_ok, 0.0))

    # Monte-Carlo marginal identity at t = 0 (sampled data vs quadrature)
    f1 = cdyn.ProductDensity(
        L=grid.L, x_cos_coeffs=(0.4,), xi_mean=0.0, xi_sigma=1.0
    )
    ensembles = cdyn.sample_product(f1, mc_N, mc_samples, seed=seed)
    phi = FourierSymbol.real_mode(grid, 1.0, 0.7)
    vals = np.array(
        [cdyn.empirical_pair(Zs, phi).real for Zs in ensembles]
    )
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    gap = abs(float(vals.mean()) - cdyn.product_expectation(f1, phi).real)
    checks.append(_check("mc_marginal_sigmas", gap / se, 4.0))

    return _report(
        "classical", checks, {"seed": seed, "mc_samples": mc_samples}, t0
    )


def _characteristics_jet_det(tl, t, s, p):
    h = 1e-5
    J = np.zeros((2, 2))
    for i, dp in enumerate([(h, 0.0), (0.0, h)]):
        Xp = cdyn.characteristics(tl, t, s, (p[0] + dp[0], p[1] + dp[1]))
        Xm = cdyn.characteristics(tl, t, s, (p[0] - dp[0], p[1] - dp[1]))
        J[0, i] = (Xp[0] - Xm[0]) / (2 * h)
        J[1, i] = (Xp[1] - Xm[1]) / (2 * h)
    return float(np.linalg.det(J))


# ---------------------------------------------------------------------------
# Egorov suite (acceptance 6, 7)
# ---------------------------------------------------------------------------


def run_egorov_suite(seed=7, M=64, dt=1.0 / 8192.0, hbars=(0.4, 0.2, 0.1, 0.05)):
    t0 = time.time()
    rng = np.random.default_rng(seed)
    grid = make_grid(1, M, 2.0 * np.pi)
    V = PotentialSeries.cosine(grid, 0.5)
    tl_static = PotentialTimeline.constant(V, 0.0, 2.5)
    traj = hartree_evolve(
        gaussian_on_torus(grid, np.pi, 0.5), V, 1.0, 1.0 / 512.0, 0.25
    )
    tl_hartree = traj.mean_field
    checks = []

    table = []
    configs = [
        ("cosx_static", FourierSymbol.real_mode(grid, 1.0, 0.0), tl_static),
        ("cosxpxi_static", FourierSymbol.real_mode(grid, 1.0, 1.0), tl_static),
        ("cosxi_hartree", FourierSymbol.real_mode(grid, 0.0, 1.0), tl_hartree),
    ]
    for name, b, tl in configs:
        ds = [egorov.egorov_defect(b, tl, 1.0, 0.0, h, dt) for h in hbars]
        for h, d in zip(hbars, ds):
            table.append(
                {
                    "hbar": float(h),
                    "omega": "",
                    "t": 1.0,
                    "s": 0.0,
                    "defect": float(d),
                    "ratio": "",
                    "bound_denominator": "",
                    "config": name,
                }
            )
        slope, _, _ = loglog_slope(list(zip(hbars, ds)))
        checks.append(
            {
                "check": f"defect_slope_{name}",
                "value": float(slope),
                "tolerance": [1.7, 2.3],
                "mode": "interval",
                "pass": bool(1.7 <= slope <= 2.3),
            }
        )

    # free flow: the kinetic transport identity is exact
    tl0 = PotentialTimeline.zero(grid, 0.0, 2.0)
    b = FourierSymbol.real_mode(grid, 1.0, 0.0)
    checks.append(
        _check(
            "free_defect",
            egorov.egorov_defect(b, tl0, 1.0, 0.0, 0.2, 1.0 / 1024.0),
            1e-6,
        )
    )

    # exponential-in-time envelope, shape check with fitted prefactor: the
    # defect grows monotonically and its late-time log-slope stays under the
    # envelope rate G2*(d+5); the prefactor c = max d/(e^{rt}-1) is recorded
    ts = (0.5, 1.0, 1.5, 2.0)
    denv = [egorov.egorov_defect(b, tl_static, tt, 0.0, 0.2, dt) for tt in ts]
    G2 = V.hessian_bound()
    rate = (grid.d + 5) * G2
    c_fit = max(
        d_ / (np.exp(rate * tt) - 1.0) for tt, d_ in zip(ts, denv)
    )
    mono = all(denv[i] < denv[i + 1] for i in range(3))
    tail_slope = np.log(denv[-1] / denv[-2]) / (ts[-1] - ts[-2])
    checks.append(
        {
            "check": "defect_time_envelope",
            "value": {
                "defects": denv,
                "fitted_c": float(c_fit),
                "tail_rate": float(tail_slope),
            },
            "tolerance": f"increasing, tail rate <= 1.2 * {rate}",
            "mode": "bool",
            "pass": bool(mono and tail_slope <= 1.2 * rate),
        }
    )

    # Lemma 5.5: closed-form remainder against the commutator route
    worst55, worst55_free = 0.0, 0.0
    for _ in range(6):
        m = int(rng.integers(1, 4))
        vhat = complex(rng.normal(), rng.normal()) * 0.3
        alpha = grid.freq_of(int(rng.integers(-3, 4)))
        beta = float(rng.uniform(-1.5, 1.5))
        c = complex(rng.normal(), rng.normal())
        h = float(rng.uniform(0.1, 1.0))
        worst55 = max(
            worst55,
            egorov.lemma55_identity_check(
                (grid.freq_of(m), vhat), (alpha, beta, c), h, grid
            ),
        )
        worst55_free = max(
            worst55_free,
            egorov.lemma55_identity_check(
                (grid.freq_of(m), 0.0), (alpha, beta, c), h, grid
            ),
        )
    checks.append(_check("lemma55_identity", worst55, 1e-8))
    checks.append(_check("lemma55_kinetic_exact", worst55_free, 1e-10))

    # commutator-ratio closed form for a pure shift operator
    bshift = FourierSymbol.plane_wave(grid, 0.0, 0.9)
    Op = quantize(grid, 0.5, bshift)
    r = egorov.commutator_ratio(1.0, Op, 0.5)
    closed = abs(2.0 * np.sin(1.0 * 0.5 * 0.9 / 2.0)) / 0.5
    checks.append(_check("commutator_closed_form", abs(r - closed), 1e-10))

    # acceptance 7: uniformity across hbar and linearity in omega
    rows = egorov.uniformity_scan(
        b,
        tl_static,
        1.0,
        omegas=[1.0, 2.0, 3.0],
        hbars=[1.0, 0.5, 0.25, 0.125],
        dt=1.0 / 4096.0,
    )
    for r_ in rows:
        table.append(
            {
                "hbar": r_["hbar"],
                "omega": r_["omega"],
                "t": r_["t"],
                "s": r_["s"],
                "defect": "",
                "ratio": r_["ratio"],
                "bound_denominator": r_["bound_denominator"],
                "config": "uniformity_scan",
            }
        )
    worst_spread = 0.0
    for om in (1.0, 2.0, 3.0):
        vals = [r_["normalized"] for r_ in rows if r_["omega"] == om]
        worst_spread = max(worst_spread, max(vals) / min(vals))
    checks.append(_check("commutator_hbar_uniformity", worst_spread, 3.0))

    gridL = make_grid(1, M, 4.0 * np.pi)
    VL = PotentialSeries.cosine(gridL, 0.5, mode=2)
    tlL = PotentialTimeline.constant(VL, 0.0, 2.0)
    bL = FourierSymbol.real_mode(gridL, gridL.freq_of(2), 0.0)
    Bq = egorov.heisenberg_obs(bL, tlL, 1.0, 0.0, 0.25, 1.0 / 4096.0)
    rats = [
        egorov.commutator_ratio(gridL.freq_of(mm), Bq, 0.25) for mm in (1, 2, 3, 4)
    ]
    lin_slope, _, _ = loglog_slope(
        [(gridL.freq_of(mm), rats[mm - 1]) for mm in (1, 2, 3, 4)]
    )
    checks.append(
        {
            "check": "commutator_omega_linearity",
            "value": float(lin_slope),
            "tolerance": [0.8, 1.2],
            "mode": "interval",
            "pass": bool(0.8 <= lin_slope <= 1.2),
        }
    )

    report = _report("egorov", checks, {"seed": seed, "M": M, "dt": dt}, t0)
    report["table"] = table
    report["slopes"] = {
        c["check"]: c["value"] for c in checks if c["check"].startswith("defect_slope")
    }
    return report


# ---------------------------------------------------------------------------
# convergence suite (acceptance 4, 5, 10)
# ---------------------------------------------------------------------------


def run_converge_suite(cfg=None, workers=1, slope_ceiling=-0.45, ratio_ceiling=5.0):
    t0 = time.time()
    if cfg is None:
        cfg = ConvergeConfig()
    elif not isinstance(cfg, ConvergeConfig):
        cfg = ConvergeConfig.from_dict(cfg)
    records = converge_run(cfg, workers=workers)
    checks = []
    for h in cfg.hbar_list:
        pts = sorted(
            [(r.N, r.error) for r in records if r.hbar == h], key=lambda p: p[0]
        )
        decreasing = all(pts[i][1] > pts[i + 1][1] for i in range(len(pts) - 1))
        checks.append(
            {
                "check": f"error_decreasing_hbar_{h}",
                "value": [p[1] for p in pts],
                "tolerance": "strictly decreasing in N",
                "mode": "bool",
                "pass": bool(decreasing),
            }
        )
        if len(pts) >= 3:
            slope, _, _ = loglog_slope(pts)
            checks.append(
                _check(f"slope_hbar_{h}", slope, slope_ceiling, mode="max")
            )
    uni = uniformity_report(records, ceiling=ratio_ceiling)
    checks.append(
        {
            "check": "hbar_uniformity",
            "value": [r["ratio"] for r in uni["per_N"]],
            "tolerance": ratio_ceiling,
            "mode": "max-list",
            "pass": uni["pass"],
        }
    )
    # shape of the a-priori bound: with the prefactor fitted on the smallest
    # N, the N-independent double-exponential factor cancels and the bound
    # reduces to err_N <= err_N0 * sqrt(N0/N); the fitted log-prefactor
    # (relative to the analytic envelope) is recorded, never asserted
    V = cfg.potential()
    G2 = max(V.hessian_bound(), 1e-12)
    VV = V.fourier_weight()
    shape_ok = True
    fitted_log = {}
    for h in cfg.hbar_list:
        rows = sorted(
            [(r.N, r.error) for r in records if r.hbar == h], key=lambda p: p[0]
        )
        N0, err0 = rows[0]
        if err0 <= 0:
            continue
        log_envelope = cfg.T * np.exp(6.0 * G2 * cfg.T) * VV * (
            1.0 + h**2 * VV / (6.0 * G2)
        )
        fitted_log[h] = float(np.log(err0) + 0.5 * np.log(N0) - log_envelope)
        shape_ok = shape_ok and all(
            err <= err0 * np.sqrt(N0 / N) * (1.0 + 1e-9) for N, err in rows
        )
    checks.append(
        {
            "check": "eq5_shape_bound",
            "value": [fitted_log.get(h, 0.0) for h in cfg.hbar_list],
            "tolerance": "errors under fitted c/sqrt(N) envelope (log prefactors)",
            "mode": "bool",
            "pass": bool(shape_ok),
        }
    )
    # saturation of the dual-norm lower bound in the cutoff
    worst_sat = 0.0
    for r in records:
        sat = r.extra.get("saturation", {})
        if len(sat) >= 2:
            cuts = sorted(sat)
            lo, hi = sat[cuts[0]], sat[cuts[-1]]
            if hi > 0:
                worst_sat = max(worst_sat, (hi - lo) / hi)
    checks.append(_check("dual_norm_saturation", worst_sat, 0.05))

    report = _report("converge", checks, cfg.to_dict(), t0)
    report["records"] = records
    report["content_hash"] = records_content_hash(records)
    return report
