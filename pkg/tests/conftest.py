import numpy as np
import pytest

from meanfield_lab.phasespace import FourierSymbol, make_grid


@pytest.fixture
def grid16():
    return make_grid(1, 16, 2.0 * np.pi)


@pytest.fixture
def grid64():
    return make_grid(1, 64, 2.0 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_state(grid, center, width, kick=0.0):
    """Wrapped Gaussian, dx-normalized, optionally momentum-kicked."""
    x = grid.x
    psi = np.zeros(grid.M, dtype=complex)
    for w in range(-4, 5):
        psi += np.exp(-((x - center + w * grid.L) ** 2) / (4.0 * width**2))
    psi = psi * np.exp(1j * kick * x)
    return psi / np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))


def random_symbol(grid, rng, n_terms=3, max_mode=2, beta_scale=1.5):
    terms = []
    for _ in range(n_terms):
        m = int(rng.integers(-max_mode, max_mode + 1))
        beta = float(rng.uniform(-beta_scale, beta_scale))
        c = complex(rng.normal(), rng.normal())
        terms.append((grid.freq_of(m), beta, c))
    return FourierSymbol(grid, tuple(terms))
