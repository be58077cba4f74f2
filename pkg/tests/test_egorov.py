import numpy as np
import pytest
from scipy.integrate import quad

from meanfield_lab import egorov
from meanfield_lab.phasespace import (
    FourierSymbol,
    band_restricted_norm,
    make_grid,
    op_norm,
    quantize,
)
from meanfield_lab.potentials import PotentialSeries, PotentialTimeline


@pytest.fixture
def grid(grid64):
    return grid64


@pytest.fixture
def tl(grid):
    return PotentialTimeline.constant(PotentialSeries.cosine(grid, 0.5), 0.0, 2.5)


@pytest.fixture
def tl0(grid):
    return PotentialTimeline.zero(grid, 0.0, 2.5)


class TestHeisenbergObs:
    def test_equal_times(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.7)
        B = egorov.heisenberg_obs(b, tl, 0.5, 0.5, 0.3, 1e-3)
        assert np.abs(B.mat - quantize(grid, 0.3, b).mat).max() == 0.0

    def test_constant_symbol(self, grid, tl):
        one = FourierSymbol.constant(grid)
        B = egorov.heisenberg_obs(one, tl, 1.0, 0.0, 0.3, 1e-3)
        assert np.abs(B.mat - np.eye(grid.M)).max() < 1e-10

    def test_norm_preserved(self, grid, tl, rng):
        from conftest import random_symbol

        b = random_symbol(grid, rng, max_mode=4)
        B = egorov.heisenberg_obs(b, tl, 1.0, 0.0, 0.3, 1e-3)
        assert abs(op_norm(B) - op_norm(quantize(grid, 0.3, b))) < 1e-9


class TestTransportedQuantization:
    def test_equal_times_matches_quantize(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.8)
        B = egorov.transported_quantization(b, tl, 0.7, 0.7, 0.3)
        assert (
            band_restricted_norm(B.mat - quantize(grid, 0.3, b).mat, grid, 16)
            < 1e-9
        )

    def test_free_flow_dual_path(self, grid, tl0):
        # transported symbol under the free flow is again a finite series;
        # the quadrature path must match the closed-form path
        tau, hbar = 0.8, 0.3
        b = FourierSymbol.plane_wave(grid, 1.0, 0.0)
        B = egorov.transported_quantization(b, tl0, tau, 0.0, hbar).mat
        closed = quantize(
            grid, hbar, FourierSymbol.plane_wave(grid, 1.0, tau)
        ).mat
        assert band_restricted_norm(B - closed, grid, 8) < 1e-8

    def test_hermitian_for_real_symbols(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.9)
        B = egorov.transported_quantization(b, tl, 1.0, 0.0, 0.3).mat
        assert np.abs(B - B.conj().T).max() < 1e-10


class TestEgorovDefect:
    def test_equal_times(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.0)
        assert egorov.egorov_defect(b, tl, 0.5, 0.5, 0.3, 1e-3) < 1e-8

    def test_free_flow_exact(self, grid, tl0):
        b = FourierSymbol.real_mode(grid, 1.0, 0.0)
        assert egorov.egorov_defect(b, tl0, 1.0, 0.0, 0.2, 1.0 / 1024) < 1e-6

    def test_hbar_squared_scaling(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.0)
        d1 = egorov.egorov_defect(b, tl, 1.0, 0.0, 0.4, 1.0 / 2048)
        d2 = egorov.egorov_defect(b, tl, 1.0, 0.0, 0.2, 1.0 / 2048)
        assert d1 / d2 == pytest.approx(4.0, rel=0.3)


class TestCommutatorRatio:
    def test_zero_frequency(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.5)
        Op = quantize(grid, 0.5, b)
        assert egorov.commutator_ratio(0.0, Op, 0.5) == 0.0

    def test_multiplication_operators_commute(self, grid):
        Op = quantize(grid, 0.5, FourierSymbol.real_mode(grid, 2.0, 0.0))
        assert egorov.commutator_ratio(1.0, Op, 0.5) < 1e-13

    def test_closed_form_for_shift(self, grid):
        hbar, beta, om = 0.5, 0.9, 1.0
        Op = quantize(grid, hbar, FourierSymbol.plane_wave(grid, 0.0, beta))
        want = abs(2.0 * np.sin(om * hbar * beta / 2.0)) / hbar
        assert abs(egorov.commutator_ratio(om, Op, hbar) - want) < 1e-10


class TestUniformityScan:
    def test_free_constant_symbol_all_zero(self, grid, tl0):
        one = FourierSymbol.constant(grid)
        rows = egorov.uniformity_scan(
            one, tl0, 0.5, omegas=[1.0, 2.0], hbars=[0.5], dt=1.0 / 256
        )
        assert all(r["ratio"] < 1e-10 for r in rows)

    def test_single_hbar_reduces_to_ratios(self, grid, tl):
        b = FourierSymbol.real_mode(grid, 1.0, 0.0)
        rows = egorov.uniformity_scan(
            b, tl, 0.5, omegas=[1.0], hbars=[0.5], dt=1.0 / 512
        )
        B = egorov.heisenberg_obs(b, tl, 0.5, 0.0, 0.5, 1.0 / 512)
        direct = egorov.commutator_ratio(1.0, B, 0.5)
        assert rows[0]["ratio"] == pytest.approx(direct, rel=1e-12)


class TestRemainderSymbol:
    def test_momentum_independent_symbol(self, grid):
        r = egorov.remainder_symbol((1.0, 0.25), (2.0, 0.0, 1.0), 0.3, grid)
        assert all(abs(c) == 0.0 for _, _, c in r.terms)

    def test_zero_mode(self, grid):
        r = egorov.remainder_symbol((1.0, 0.0), (2.0, 0.8, 1.0), 0.3, grid)
        assert all(abs(c) == 0.0 for _, _, c in r.terms)

    def test_closed_form_matches_tau_quadrature(self, grid, rng):
        # oracle: assemble the remainder from the tau-integral numerically
        for _ in range(6):
            w = grid.freq_of(int(rng.integers(1, 4)))
            v = complex(rng.normal(), rng.normal()) * 0.4
            alpha = grid.freq_of(int(rng.integers(-2, 3)))
            beta = float(rng.uniform(-1.5, 1.5))
            c = complex(rng.normal(), rng.normal())
            h = float(rng.uniform(0.1, 1.0))
            sym = egorov.remainder_symbol((w, v), (alpha, beta, c), h, grid)

            def tau_integral(zeta):
                f = lambda tau: 0.5 * (1 - tau) ** 2 * np.exp(1j * beta * tau * h * zeta)
                re, _ = quad(lambda t: f(t).real, 0, 1, epsabs=1e-14)
                im, _ = quad(lambda t: f(t).imag, 0, 1, epsabs=1e-14)
                return re + 1j * im

            # point masses of the potential transform at zeta = -w/2 and w/2
            # for each of the two real-mode components
            coeffs = {}
            for w_s, v_s in ((w, v), (-w, np.conj(v))):
                amp = (
                    v_s
                    * (1.0 / 1j)
                    * (-((w_s / 2.0) ** 3))
                    * (1j * beta) ** 3
                    * c
                    * (tau_integral(-w_s / 2.0) + tau_integral(w_s / 2.0))
                )
                key = alpha + w_s
                coeffs[key] = coeffs.get(key, 0.0) + amp
            for al, be, cc in sym.terms:
                assert abs(cc - coeffs[round(al[0], 12)]) < 1e-12


class TestShiftNormIdentity:
    def test_commutator_norm_equals_shifted_symbol_norm(self, grid, rng):
        # ||[E_w, OP[b]]|| = ||OP[b(., . - hbar*w) - b]|| on the band:
        # [E, Q] = (E Q E^* - Q) E and conjugation by E shifts the symbol
        from meanfield_lab.phasespace import band_projector_columns, mod_op

        for _ in range(5):
            m = int(rng.integers(1, 5))
            om = grid.freq_of(m)
            hbar = float(rng.uniform(0.1, 1.0))
            b = FourierSymbol.plane_wave(
                grid, grid.freq_of(int(rng.integers(-3, 4))), rng.uniform(-1.5, 1.5),
                complex(rng.normal(), rng.normal()),
            )
            shifted_minus_b = FourierSymbol(
                grid,
                tuple(
                    (al, be, c * (np.exp(-1j * be[0] * hbar * om) - 1.0))
                    for al, be, c in b.terms
                ),
            )
            E = mod_op(grid, om).mat
            Q = quantize(grid, hbar, b).mat
            Qd = quantize(grid, hbar, shifted_minus_b).mat
            P = band_projector_columns(grid, grid.M // 8)
            lhs = np.linalg.norm((E @ Q - Q @ E) @ P, 2)
            rhs = np.linalg.norm(Qd @ (E @ P), 2)
            assert abs(lhs - rhs) < 1e-10


class TestLemma55:
    def test_kinetic_exactness(self, grid):
        res = egorov.lemma55_identity_check((1.0, 0.0), (2.0, 0.8, 1.1 + 0.4j), 0.3, grid)
        assert res < 1e-10

    def test_position_only_symbol(self, grid):
        res = egorov.lemma55_identity_check((1.0, 0.25), (2.0, 0.0, 1.0), 0.3, grid)
        assert res < 1e-10

    def test_generic_mode_pair(self, grid):
        res = egorov.lemma55_identity_check((1.0, 0.25), (2.0, 0.8, 1.1 + 0.4j), 0.3, grid)
        assert res < 1e-8
