import numpy as np
import pytest
import scipy.linalg as sla

from conftest import gaussian_state
from meanfield_lab import qdyn
from meanfield_lab.phasespace import make_grid, pure_state_density
from meanfield_lab.potentials import PotentialSeries, PotentialTimeline


@pytest.fixture
def V16(grid16):
    return PotentialSeries.cosine(grid16, 0.5)


class TestPotentialSeries:
    def test_even_real_checks(self, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        assert V.is_real() and V.is_even()
        odd = PotentialSeries(grid16, {1: 0.5j, -1: -0.5j})  # sin mode
        assert odd.is_real() and not odd.is_even()
        with pytest.raises(ValueError):
            odd.require_even_real()

    def test_hessian_bound_exact_for_cosine(self, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        vals = V.values(np.linspace(0, grid16.L, 1000))
        d2 = np.gradient(np.gradient(vals, 1e-3), 1e-3)  # rough check only
        assert V.hessian_bound() == pytest.approx(0.5)

    def test_fourier_weight(self, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        # both modes at |omega|=1: 2 * 0.25 * 2^7
        assert V.fourier_weight() == pytest.approx(2 * 0.25 * 2.0**7)

    def test_timeline_interpolation(self, grid16):
        Va = PotentialSeries.cosine(grid16, 1.0)
        Vb = PotentialSeries.cosine(grid16, 2.0)
        tl = PotentialTimeline.from_series_list([0.0, 1.0], [Va, Vb])
        mid = tl.series_at(0.5)
        assert mid.coeffs[1] == pytest.approx(0.75)
        with pytest.raises(ValueError):
            tl.require_coverage(0.0, 2.0)

    def test_timeline_uniform_spacing_required(self, grid16):
        Va = PotentialSeries.cosine(grid16, 1.0)
        with pytest.raises(ValueError):
            PotentialTimeline.from_series_list([0.0, 0.5, 2.0], [Va, Va, Va])


class TestPropagateSingle:
    def test_free_momentum_mode(self, grid16):
        tl = PotentialTimeline.zero(grid16, 0.0, 1.0)
        hbar, k = 0.5, 3
        xi_k = grid16.freq_of(k)
        psi0 = np.exp(1j * xi_k * grid16.x) / np.sqrt(grid16.L)
        psi1 = qdyn.propagate_single(psi0, tl, 0.0, 1.0, 0.01, hbar)
        exact = np.exp(-0.5j * hbar * xi_k**2) * psi0
        assert np.abs(psi1 - exact).max() < 1e-12

    def test_unitarity(self, grid16, V16, rng):
        tl = PotentialTimeline.constant(V16, 0.0, 1.0)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.sqrt(grid16.dx * np.sum(np.abs(psi) ** 2))
        out = qdyn.propagate_single(psi, tl, 0.0, 1.0, 0.005, 0.5)
        assert abs(grid16.dx * np.sum(np.abs(out) ** 2) - 1.0) < 1e-12

    def test_matches_matrix_exponential(self, grid16, V16, rng):
        # static potential: dense expm oracle, second-order refinement
        hbar = 0.5
        tl = PotentialTimeline.constant(V16, 0.0, 0.5)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.sqrt(grid16.dx * np.sum(np.abs(psi) ** 2))
        H = qdyn.kinetic_matrix(grid16, hbar) + np.diag(V16.values().astype(complex))
        ref = sla.expm(-1j * H * 0.5 / hbar) @ psi
        errs = [
            np.abs(qdyn.propagate_single(psi, tl, 0.0, 0.5, dt, hbar) - ref).max()
            for dt in (0.01, 0.005)
        ]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_rejects_bad_steps(self, grid16, V16):
        tl = PotentialTimeline.constant(V16, 0.0, 1.0)
        psi = np.ones(16, dtype=complex)
        with pytest.raises(ValueError):
            qdyn.propagate_single(psi, tl, 0.0, 1.0, -0.1, 0.5)
        with pytest.raises(ValueError):
            qdyn.propagate_single(psi, tl, 0.0, 1.0, 0.3, 0.5)
        with pytest.raises(ValueError):
            qdyn.propagate_single(psi, tl, 0.0, 2.0, 0.01, 0.5)


class TestHartree:
    def test_free_preserves_mode_amplitudes(self, grid16, rng):
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.sqrt(grid16.dx * np.sum(np.abs(psi) ** 2))
        traj = qdyn.hartree_evolve(psi, PotentialSeries.zero(grid16), 0.5, 0.005, 0.5)
        drift = np.abs(
            np.abs(np.fft.fft(traj.states[-1][0])) - np.abs(np.fft.fft(psi))
        ).max()
        assert drift < 1e-12

    def test_uniform_state_stays_uniform(self, grid16, V16):
        psi = np.ones(16, dtype=complex) / np.sqrt(grid16.L)
        traj = qdyn.hartree_evolve(psi, V16, 0.5, 0.005, 0.5)
        dens = np.abs(traj.states[-1][0]) ** 2
        assert np.abs(dens - 1.0 / grid16.L).max() < 1e-10

    def test_mass_conserved_exactly(self, grid16, V16):
        psi = gaussian_state(grid16, np.pi, 0.6)
        traj = qdyn.hartree_evolve(psi, V16, 0.5, 0.01, 0.5)
        nrm = grid16.dx * np.sum(np.abs(traj.states[-1][0]) ** 2)
        assert abs(nrm - 1.0) < 1e-12

    def test_energy_drift_second_order(self, grid16, V16):
        psi = gaussian_state(grid16, np.pi, 0.6)
        drifts = []
        for dt in (0.01, 0.005):
            traj = qdyn.hartree_evolve(psi, V16, 0.5, dt, 0.5)
            drifts.append(
                abs(traj.total_energy(len(traj.times) - 1) - traj.total_energy(0))
            )
        assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.25)

    def test_rank_one_stays_rank_one(self, grid16, V16):
        psi = gaussian_state(grid16, np.pi, 0.6)
        traj = qdyn.hartree_evolve(psi, V16, 0.3, 0.005, 0.5)
        R = traj.density(index=len(traj.times) - 1).mat
        ev = np.linalg.eigvalsh(R)
        assert ev[-1] == pytest.approx(1.0, abs=1e-10)
        assert np.abs(ev[:-1]).max() < 1e-10

    def test_ensemble_weights_validated(self, grid16, V16):
        psi = gaussian_state(grid16, np.pi, 0.6)
        with pytest.raises(ValueError):
            qdyn.hartree_evolve([psi, psi], V16, 0.1, 0.01, 0.5, weights=[0.9, 0.9])

    def test_rejects_odd_potential(self, grid16):
        odd = PotentialSeries(grid16, {1: 0.5j, -1: -0.5j})
        psi = gaussian_state(grid16, np.pi, 0.6)
        with pytest.raises(ValueError):
            qdyn.hartree_evolve(psi, odd, 0.1, 0.01, 0.5)

    def test_mixed_ensemble_evolves(self, grid16, V16):
        psic = gaussian_state(grid16, np.pi, 0.6)
        psis = gaussian_state(grid16, 1.0, 0.5)
        traj = qdyn.hartree_evolve(
            [psic, psis], V16, 0.2, 0.005, 0.5, weights=[0.7, 0.3]
        )
        R = traj.density(index=len(traj.times) - 1)
        assert abs(np.trace(R.mat) - 1.0) < 1e-10


class TestNBody:
    def test_single_particle_reduces_to_free(self, grid16):
        hbar = 0.5
        psi = gaussian_state(grid16, np.pi, 0.6)
        st = qdyn.NBodyState.product(grid16, psi, 1, hbar)
        out = qdyn.nbody_evolve(st, PotentialSeries.zero(grid16), 0.3, 0.005)
        tl = PotentialTimeline.zero(grid16, 0.0, 0.3)
        ref = qdyn.propagate_single(psi, tl, 0.0, 0.3, 0.005, hbar)
        assert np.abs(out.psi - ref).max() < 1e-12

    def test_free_product_state_factorizes(self, grid16):
        hbar = 0.5
        psi = gaussian_state(grid16, np.pi, 0.6, kick=1.0)
        st = qdyn.NBodyState.product(grid16, psi, 3, hbar)
        out = qdyn.nbody_evolve(st, PotentialSeries.zero(grid16), 0.3, 0.005)
        tl = PotentialTimeline.zero(grid16, 0.0, 0.3)
        single = qdyn.propagate_single(psi, tl, 0.0, 0.3, 0.005, hbar)
        ref = qdyn.NBodyState.product(grid16, single, 3, hbar)
        assert np.abs(out.psi - ref.psi).max() < 1e-10

    def test_dense_exponential_oracle(self, rng):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        V8 = PotentialSeries.cosine(g8, 0.5)
        hbar = 0.5
        psi = np.exp(-((g8.x - np.pi) ** 2)) + 0.2j * np.sin(g8.x)
        st = qdyn.NBodyState.product(g8, psi, 2, hbar)
        H = qdyn.nbody_hamiltonian(g8, 2, V8, hbar)
        ref = (sla.expm(-1j * H * 0.4 / hbar) @ st.vec()).reshape(8, 8)
        errs = [
            np.abs(qdyn.nbody_evolve(st, V8, 0.4, dt).psi - ref).max()
            for dt in (0.01, 0.005)
        ]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_unitarity_and_symmetry(self, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        psi = gaussian_state(grid16, np.pi, 0.6, kick=1.0)
        st = qdyn.NBodyState.product(grid16, psi, 3, 0.5)
        out = qdyn.nbody_evolve(st, V, 0.5, 0.005)
        assert abs(out.norm() - 1.0) < 1e-10
        assert out.swap_residual() < 1e-10

    def test_memory_guard(self, grid16):
        with pytest.raises(ValueError, match="amplitudes"):
            qdyn.check_tensor_budget(grid16, 8)

    def test_propagator_group_properties(self):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        V8 = PotentialSeries.cosine(g8, 0.5)
        prop = qdyn.NBodyPropagator(g8, 2, V8, 0.5)
        U0 = prop.at(0.0)
        assert np.abs(U0 - np.eye(64)).max() < 1e-12
        U = prop.at(0.4)
        assert np.abs(U @ prop.at(-0.4) - np.eye(64)).max() < 1e-10
        assert np.abs(U @ U.conj().T - np.eye(64)).max() < 1e-10

    def test_propagator_matches_split_step(self):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        V8 = PotentialSeries.cosine(g8, 0.5)
        psi = np.exp(-((g8.x - np.pi) ** 2))
        st = qdyn.NBodyState.product(g8, psi, 2, 0.5)
        # wavefunctions ride U(t)^dagger for the +itH/hbar convention
        U = qdyn.nbody_propagator(g8, 2, V8, 0.4, 0.5)
        ref = (U.conj().T @ st.vec()).reshape(8, 8)
        errs = [
            np.abs(qdyn.nbody_evolve(st, V8, 0.4, dt).psi - ref).max()
            for dt in (0.01, 0.005)
        ]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_dense_guard(self, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        with pytest.raises(ValueError):
            qdyn.nbody_hamiltonian(grid16, 4, V, 0.5)


class TestMarginals:
    def test_product_state_marginal(self, grid16):
        psi = gaussian_state(grid16, np.pi, 0.6, kick=1.0)
        st = qdyn.NBodyState.product(grid16, psi, 3, 0.5)
        F1 = qdyn.marginal1(st)
        R = pure_state_density(grid16, psi)
        assert np.abs(F1.mat - R.mat).max() < 1e-12

    def test_trace_one(self, grid16, rng):
        psi = rng.normal(size=(16, 16, 16)) + 1j * rng.normal(size=(16, 16, 16))
        psi = psi + psi.transpose(1, 0, 2) + psi.transpose(2, 1, 0)  # symmetrize some
        psi /= np.sqrt(grid16.dx**3 * np.sum(np.abs(psi) ** 2))
        st = qdyn.NBodyState(grid=grid16, N=3, psi=psi, hbar=0.5)
        assert abs(np.trace(qdyn.marginal1(st).mat) - 1.0) < 1e-12

    def test_explicit_loop_oracle(self, rng):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        psi = rng.normal(size=(8, 8, 8)) + 1j * rng.normal(size=(8, 8, 8))
        psi /= np.sqrt(g8.dx**3 * np.sum(np.abs(psi) ** 2))
        st = qdyn.NBodyState(grid=g8, N=3, psi=psi, hbar=0.5)
        F1 = qdyn.marginal1(st).mat
        oracle = np.zeros((8, 8), dtype=complex)
        for a in range(8):
            for b in range(8):
                for r1 in range(8):
                    for r2 in range(8):
                        oracle[a, b] += psi[a, r1, r2] * np.conj(psi[b, r1, r2])
        oracle *= g8.dx**3
        assert np.abs(F1 - oracle).max() < 1e-13

    def test_marginal2_product(self, grid16):
        psi = gaussian_state(grid16, np.pi, 0.6)
        st = qdyn.NBodyState.product(grid16, psi, 3, 0.5)
        F2 = qdyn.marginal2(st)
        R = pure_state_density(grid16, psi).mat
        assert np.abs(F2 - np.kron(R, R)).max() < 1e-12

    def test_marginal2_partial_trace_consistency(self, rng):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        psi = rng.normal(size=(8, 8, 8)) + 1j * rng.normal(size=(8, 8, 8))
        psi /= np.sqrt(g8.dx**3 * np.sum(np.abs(psi) ** 2))
        st = qdyn.NBodyState(grid=g8, N=3, psi=psi, hbar=0.5)
        F2 = qdyn.marginal2(st).reshape(8, 8, 8, 8)
        F1b = np.einsum("arbr->ab", F2)
        assert np.abs(F1b - qdyn.marginal1(st).mat).max() < 1e-12

    def test_marginal2_duality(self, rng):
        g8 = make_grid(1, 8, 2.0 * np.pi)
        V8 = PotentialSeries.cosine(g8, 0.5)
        psi = np.exp(-((g8.x - np.pi) ** 2))
        st = qdyn.NBodyState.product(g8, psi, 3, 0.5)
        ev = qdyn.nbody_evolve(st, V8, 0.2, 0.005)
        F2 = qdyn.marginal2(ev)
        for _ in range(20):
            A2 = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
            lhs = np.trace(A2 @ F2)
            rhs = np.vdot(ev.vec(), np.kron(A2, np.eye(8)) @ ev.vec()) * g8.dx**3
            assert abs(lhs - rhs) < 1e-11

    def test_marginal2_needs_two_particles(self, grid16):
        st = qdyn.NBodyState.product(grid16, gaussian_state(grid16, 1.0, 0.5), 1, 0.5)
        with pytest.raises(ValueError):
            qdyn.marginal2(st)


class TestConvergenceOrder:
    def test_all_three_propagators_second_order(self, grid16):
        # halve dt, compare against a dt/8 reference: factor 4 +- 20%
        hbar = 0.5
        V = PotentialSeries.cosine(grid16, 0.5)
        tl = PotentialTimeline.constant(V, 0.0, 0.4)
        psi = gaussian_state(grid16, np.pi, 0.6, kick=1.0)

        def err_single(dt):
            ref = qdyn.propagate_single(psi, tl, 0.0, 0.4, 0.4 / 320, hbar)
            out = qdyn.propagate_single(psi, tl, 0.0, 0.4, dt, hbar)
            return np.abs(out - ref).max()

        def err_hartree(dt):
            ref = qdyn.hartree_evolve(psi, V, 0.4, 0.4 / 320, hbar).states[-1][0]
            out = qdyn.hartree_evolve(psi, V, 0.4, dt, hbar).states[-1][0]
            return np.abs(out - ref).max()

        def err_nbody(dt):
            st = qdyn.NBodyState.product(grid16, psi, 2, hbar)
            ref = qdyn.nbody_evolve(st, V, 0.4, 0.4 / 320).psi
            return np.abs(qdyn.nbody_evolve(st, V, 0.4, dt).psi - ref).max()

        for err in (err_single, err_hartree, err_nbody):
            r = err(0.4 / 40) / err(0.4 / 80)
            assert r == pytest.approx(4.0, rel=0.2)


class TestCheckpoints:
    def test_roundtrip(self, tmp_path, grid16):
        V = PotentialSeries.cosine(grid16, 0.5)
        psi = gaussian_state(grid16, np.pi, 0.6)
        st = qdyn.NBodyState.product(grid16, psi, 2, 0.5)
        prefix = str(tmp_path / "ckpt")
        qdyn.save_state_checkpoint(prefix, st, t=0.7, dt=0.005, V=V)
        st2, t, dt, V2 = qdyn.load_state_checkpoint(prefix)
        assert t == 0.7 and dt == 0.005
        assert np.abs(st2.psi - st.psi).max() == 0.0
        assert V2.coeffs == V.coeffs
