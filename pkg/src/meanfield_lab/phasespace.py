"""Phase-space calculus on a periodic grid.

Everything lives on a torus of period L sampled at M points per axis.
Observables a(x, xi) are finite Fourier series (plane-wave terms), so Weyl
quantization, the Moyal product and the shift identities of the calculus are
exact on band-limited data instead of approximate.

Conventions used throughout the package:

* Operators are plain ``M x M`` complex matrices acting by matrix-vector
  product; the identity is ``numpy.eye(M)`` and a multiplication operator is
  a diagonal matrix.
* Wavefunctions carry the dx-weighted inner product
  ``<phi|psi> = dx * sum(conj(phi) * psi)``; a normalized pure state has
  ``dx * sum(|psi|^2) == 1`` and its density matrix is
  ``outer(psi, conj(psi)) * dx`` (plain matrix trace 1).
* Momentum frequencies are ``xi_k = 2*pi*k/L`` for ``k`` in the symmetric
  window ``{-M/2, ..., M/2 - 1}`` (stored in FFT order).
* Exact identities of the calculus are verified on the band-limited subspace
  (modes ``|k| <= M/4`` by default); the cyclic frequency window makes
  plane-wave identities wrap at the Nyquist edge, so the full-matrix operator
  norm is polluted by modes the continuum statement never sees.

All values are immutable after construction and every operation is a pure
function, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "PlanckScale",
    "FourierSymbol",
    "GridOperator",
    "WignerField",
    "MOYAL_SIGN",
    "make_grid",
    "symbol_eval",
    "quantize",
    "mod_op",
    "moyal",
    "wigner_pair",
    "wigner_field",
    "cv_seminorm",
    "symbol_ball_norm",
    "op_norm",
    "band_restricted_norm",
    "band_projector_columns",
    "spectral_shift",
    "as_matrix",
    "symbol_to_dict",
    "symbol_from_dict",
    "save_operator",
    "load_operator",
]


# ---------------------------------------------------------------------------
# grid and scale
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Periodic position lattice: M points per axis, period L, spacing L/M."""

    d: int
    M: int
    L: float

    @property
    def dx(self):
        return self.L / self.M

    @property
    def x(self):
        """Position nodes x_j = j*dx along one axis."""
        return np.arange(self.M) * self.dx

    @property
    def half_x(self):
        """Half-grid nodes j*dx/2 (midpoints live here)."""
        return np.arange(2 * self.M) * (self.dx / 2.0)

    @property
    def modes(self):
        """Integer mode numbers in FFT order: 0..M/2-1, -M/2..-1."""
        return (np.fft.fftfreq(self.M) * self.M).astype(int)

    @property
    def xi(self):
        """Momentum frequencies 2*pi*k/L in FFT order."""
        return 2.0 * np.pi * self.modes / self.L

    @property
    def dim(self):
        return self.M**self.d

    def mode_of(self, freq):
        """Integer mode for a grid-compatible x-frequency, else ValueError."""
        m = freq * self.L / (2.0 * np.pi)
        m_int = int(np.rint(m))
        if abs(m - m_int) > 1e-9 * max(1.0, abs(m)) + 1e-12:
            raise ValueError(
                f"frequency {freq} is not a multiple of 2*pi/L = {2 * np.pi / self.L}"
            )
        return m_int

    def freq_of(self, mode):
        return 2.0 * np.pi * mode / self.L


def make_grid(d, M, L):
    """Build a Grid; M must be an even power of two >= 8 and L > 0."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if M < 8 or (M & (M - 1)) != 0:
        raise ValueError(f"M must be a power of two >= 8, got {M}")
    if L <= 0:
        raise ValueError(f"period L must be positive, got {L}")
    return Grid(d=int(d), M=int(M), L=float(L))


@dataclass(frozen=True)
class PlanckScale:
    """Semiclassical parameter, restricted to (0, 1]."""

    hbar: float

    def __post_init__(self):
        if not (0.0 < self.hbar <= 1.0):
            raise ValueError(f"hbar must lie in (0, 1], got {self.hbar}")


def _hbar_value(hbar):
    if isinstance(hbar, PlanckScale):
        return hbar.hbar
    h = float(hbar)
    if not (0.0 < h <= 1.0):
        raise ValueError(f"hbar must lie in (0, 1], got {h}")
    return h


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------


def _as_vec(value, d):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.shape != (d,):
        raise ValueError(f"expected a length-{d} frequency vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class FourierSymbol:
    """Phase-space observable sum_t c_t * exp(i(alpha_t.x + beta_t.xi)).

    x-frequencies alpha must be integer multiples of 2*pi/L per axis so the
    symbol is periodic on the grid; xi-frequencies beta are unrestricted
    reals (the symbol is almost-periodic in xi).
    """

    grid: Grid
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        merged = {}
        order = []
        for alpha, beta, coeff in self.terms:
            a = _as_vec(alpha, self.grid.d)
            b = _as_vec(beta, self.grid.d)
            for ai in a:
                self.grid.mode_of(ai)
            key = (tuple(np.round(a, 12)), tuple(np.round(b, 12)))
            if key in merged:
                merged[key] = (a, b, merged[key][2] + complex(coeff))
            else:
                merged[key] = (a, b, complex(coeff))
                order.append(key)
        clean = tuple(
            (merged[k][0].copy(), merged[k][1].copy(), merged[k][2]) for k in order
        )
        object.__setattr__(self, "terms", clean)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(grid, coeff=1.0):
        return FourierSymbol(grid, ((np.zeros(grid.d), np.zeros(grid.d), coeff),))

    @staticmethod
    def plane_wave(grid, alpha, beta, coeff=1.0):
        return FourierSymbol(grid, ((alpha, beta, coeff),))

    @staticmethod
    def real_mode(grid, alpha, beta, coeff=1.0):
        """coeff*exp(i(ax+b.xi)) plus its conjugate term (a real symbol)."""
        a = _as_vec(alpha, grid.d)
        b = _as_vec(beta, grid.d)
        c = complex(coeff)
        return FourierSymbol(grid, ((a, b, 0.5 * c), (-a, -b, 0.5 * np.conj(c))))

    # -- algebra -------------------------------------------------------------

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("symbols live on different grids")
        return FourierSymbol(self.grid, self.terms + other.terms)

    def __mul__(self, scalar):
        return FourierSymbol(
            self.grid, tuple((a, b, complex(scalar) * c) for a, b, c in self.terms)
        )

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def conj(self):
        return FourierSymbol(
            self.grid, tuple((-a, -b, np.conj(c)) for a, b, c in self.terms)
        )

    def is_real(self, tol=1e-12):
        """True if for every term (a, b, c) the term (-a, -b, conj(c)) is present."""
        table = {
            (tuple(np.round(a, 12)), tuple(np.round(b, 12))): c
            for a, b, c in self.terms
        }
        for (a, b), c in table.items():
            partner = table.get((tuple(-np.asarray(a)), tuple(-np.asarray(b))))
            if partner is None or abs(np.conj(c) - partner) > tol:
                return False
        return True

    def coeff_sum(self):
        return float(sum(abs(c) for _, _, c in self.terms))

    def max_mode(self):
        """Largest |integer x-mode| over terms (0 for a constant)."""
        if not self.terms:
            return 0
        return max(
            (max(abs(self.grid.mode_of(ai)) for ai in a) for a, _, _ in self.terms),
            default=0,
        )


def symbol_eval(a, x, xi):
    """Evaluate the finite series at phase points; broadcasts over arrays.

    For d = 1, ``x`` and ``xi`` may be scalars or arrays of equal shape; for
    d > 1 the trailing axis holds the d components.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if a.grid.d == 1 and (x.ndim == 0 or x.shape == xi.shape):
        acc = np.zeros(np.broadcast(x, xi).shape, dtype=complex)
        for alpha, beta, c in a.terms:
            acc = acc + c * np.exp(1j * (alpha[0] * x + beta[0] * xi))
        return acc if acc.shape else complex(acc)
    acc = np.zeros(np.broadcast(x[..., 0], xi[..., 0]).shape, dtype=complex)
    for alpha, beta, c in a.terms:
        acc = acc + c * np.exp(1j * (x @ alpha + xi @ beta))
    return acc if acc.shape else complex(acc)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


@dataclass
class GridOperator:
    """Dense operator on the single-particle lattice space, with a role tag.

    role is one of 'generic', 'density', 'unitary'; density and unitary
    roles are validated on construction.
    """

    grid: Grid
    mat: np.ndarray
    role: str = "generic"

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        n = self.grid.dim
        if self.mat.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {self.mat.shape}")
        if self.role == "density":
            herm = np.linalg.norm(self.mat - self.mat.conj().T, 2)
            if herm > 1e-12:
                raise ValueError(f"density not Hermitian: asymmetry {herm:.2e}")
            ev = np.linalg.eigvalsh(self.mat)
            if ev.min() < -1e-10:
                raise ValueError(f"density has negative eigenvalue {ev.min():.2e}")
            tr = np.trace(self.mat).real
            if abs(tr - 1.0) > 1e-10:
                raise ValueError(f"density trace {tr} differs from 1")
        elif self.role == "unitary":
            defect = np.linalg.norm(
                self.mat @ self.mat.conj().T - np.eye(n), 2
            )
            if defect > 1e-10:
                raise ValueError(f"unitary defect {defect:.2e}")
        elif self.role != "generic":
            raise ValueError(f"unknown role {self.role!r}")

    def adjoint(self):
        return GridOperator(self.grid, self.mat.conj().T, "generic")


def as_matrix(op):
    """Accept a GridOperator or a bare ndarray and return the ndarray."""
    if isinstance(op, GridOperator):
        return op.mat
    return np.asarray(op, dtype=complex)


def pure_state_density(grid, psi):
    """Density matrix |psi><psi| for a dx-normalized wavefunction."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))
    psi = psi / nrm
    return GridOperator(grid, np.outer(psi, psi.conj()) * grid.dx, "density")


def spectral_shift(grid, c):
    """Matrix of psi(x) -> psi(x + c): Fourier multiplier exp(i*xi*c).

    Exact on band-limited functions for any real shift c.
    """
    phase = np.exp(1j * grid.xi * c)
    return np.fft.ifft(np.fft.fft(np.eye(grid.M), axis=0) * phase[:, None], axis=0)


def _require_1d(grid):
    if grid.d != 1:
        raise NotImplementedError("operator-level calculus is implemented for d = 1")


def quantize(grid, hbar, a):
    """Weyl quantization of a finite Fourier series, term by term.

    On band-limited inputs a single term exp(i(alpha*x + beta*xi)) acts as
    ``exp(i*alpha*hbar*beta/2) * exp(i*alpha*x) * (shift of psi by +hbar*beta)``
    with the shift computed spectrally. The matrix is assembled in the
    symmetrized order ``shift(h*beta/2) @ diag(exp(i*alpha*x)) @ shift(h*beta/2)``
    (the same operator on the band), which keeps the adjoint symmetry
    ``quantize(conj(a)) == quantize(a)^*`` exact for every matrix entry.
    """
    _require_1d(grid)
    if a.grid != grid:
        raise ValueError("symbol grid does not match the target grid")
    h = _hbar_value(hbar)
    out = np.zeros((grid.M, grid.M), dtype=complex)
    for alpha, beta, c in a.terms:
        al, be = alpha[0], beta[0]
        grid.mode_of(al)
        if be == 0.0:
            out += c * np.diag(np.exp(1j * al * grid.x))
        elif al == 0.0:
            out += c * spectral_shift(grid, h * be)
        else:
            S = spectral_shift(grid, 0.5 * h * be)
            out += c * (S @ (np.exp(1j * al * grid.x)[:, None] * S))
    return GridOperator(grid, out)


def mod_op(grid, omega):
    """Modulation operator E_omega: multiplication by exp(i*omega*x)."""
    _require_1d(grid)
    om = float(np.atleast_1d(omega)[0])
    grid.mode_of(om)
    return GridOperator(grid, np.diag(np.exp(1j * om * grid.x)), "unitary")


# Sign of the phase in the single-term Moyal coefficient
#   c1*c2*exp(i*hbar*s*(alpha1.beta2 - beta1.alpha2)/2).
# Pinned once by the operator-product oracle (see tests), then frozen.
MOYAL_SIGN = -1.0


def moyal(a, b, hbar):
    """Moyal product of two finite Fourier series (exact, term by term)."""
    if a.grid != b.grid:
        raise ValueError("symbols live on different grids")
    h = _hbar_value(hbar)
    terms = []
    for a1, b1, c1 in a.terms:
        for a2, b2, c2 in b.terms:
            cross = float(a1 @ b2 - b1 @ a2)
            coeff = c1 * c2 * np.exp(0.5j * h * MOYAL_SIGN * cross)
            terms.append((a1 + a2, b1 + b2, coeff))
    return FourierSymbol(a.grid, tuple(terms))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def op_norm(op):
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(as_matrix(op), 2))


def band_projector_columns(grid, kmax):
    """Orthonormal plane-wave columns spanning modes |k| <= kmax."""
    _require_1d(grid)
    cols = []
    for k in range(-int(kmax), int(kmax) + 1):
        cols.append(np.exp(1j * grid.freq_of(k) * grid.x) / np.sqrt(grid.M))
    return np.column_stack(cols)


def band_restricted_norm(op, grid, kmax=None):
    """Operator norm restricted to band-limited inputs (modes |k| <= kmax).

    Identity checks of the calculus are stated on this subspace: the cyclic
    frequency window wraps plane-wave products at the Nyquist edge, which the
    continuum identities never probe.
    """
    if kmax is None:
        kmax = grid.M // 4
    B = band_projector_columns(grid, kmax)
    return float(np.linalg.norm(as_matrix(op) @ B, 2))


# ---------------------------------------------------------------------------
# Wigner transform
# ---------------------------------------------------------------------------


def wigner_pair(K, a, hbar):
    """Pairing trace(K * quantize(a)) == <W[K], a>, taken as the definition."""
    Km = as_matrix(K)
    Q = quantize(a.grid, hbar, a).mat
    return complex(np.trace(Km @ Q))


@dataclass
class WignerField:
    """Sampled Wigner transform on an (x, xi) rectangle.

    values[j, q] samples the field at ``x[j]``, ``xi[q]``. Momentum samples
    sit on the half-integer lattice ``hbar*pi*q/L`` (spacing dxi), but each
    sample represents a phase-space cell of height ``2*pi*hbar/L``: mode
    coherences of fixed x-frequency populate every *other* xi node, so cells
    of neighboring samples half-overlap. Quadrature must therefore use
    ``cell_measure``, not ``dx_field * dxi``; ``integrate`` does.
    """

    grid: Grid
    hbar: float
    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray

    @property
    def dx_field(self):
        return float(self.x[1] - self.x[0])

    @property
    def dxi(self):
        return float(self.xi[1] - self.xi[0])

    @property
    def cell_measure(self):
        return self.dx_field * (2.0 * np.pi * self.hbar / self.grid.L)

    def integrate(self, sample_values=None):
        """Phase-space integral of values * sample_values (or of the field)."""
        w = self.values if sample_values is None else self.values * sample_values
        return complex(np.sum(w) * self.cell_measure)

    def pair_with_symbol(self, a):
        """Quadrature of the field against a finite Fourier series."""
        X, XI = np.meshgrid(self.x, self.xi, indexing="ij")
        return self.integrate(symbol_eval(a, X, XI))


def wigner_field(K, hbar, resolution=2):
    """Discrete Wigner transform of an operator, sampled on a phase grid.

    Mode coherence K~[k, k'] (in the plane-wave basis) is placed at momentum
    hbar*pi*(k + k')/L and x-frequency k' - k, the midpoint rule written in
    Fourier coordinates. Quadrature of the field against a band-limited
    symbol then reproduces wigner_pair exactly, which is the field's
    contract; the Plancherel identity holds exactly for any pair.
    """
    if not isinstance(K, GridOperator):
        raise TypeError("wigner_field needs a GridOperator (grid metadata required)")
    op = K
    grid = op.grid
    _require_1d(grid)
    h = _hbar_value(hbar)
    r = int(resolution)
    if r < 1:
        raise ValueError("resolution must be >= 1")
    M = grid.M
    # mode-basis matrix, indices ordered -M/2 .. M/2-1
    F = np.exp(
        -1j * np.outer(grid.xi, grid.x)
    ) / np.sqrt(M)
    Kt = np.fft.fftshift(F @ op.mat @ F.conj().T)
    k_ord = np.arange(-M // 2, M // 2)

    nx = r * M
    xs = np.arange(nx) * (grid.L / nx)
    qs = np.arange(-M, M)  # xi = hbar*pi*q/L
    xis = h * np.pi * qs / grid.L
    W = np.zeros((nx, 2 * M), dtype=complex)
    # anti-diagonal accumulation: entry (a, c) -> x-mode (c - a), q = a + c
    for m in range(-(M - 1), M):
        if m >= 0:
            rows = np.arange(0, M - m)
            cols = rows + m
        else:
            cols = np.arange(0, M + m)
            rows = cols - m
        coeffs = Kt[rows, cols]
        qvals = k_ord[rows] + k_ord[cols]
        prof = np.zeros(2 * M, dtype=complex)
        prof[qvals + M] = coeffs
        W += np.outer(np.exp(-1j * grid.freq_of(m) * xs), prof)
    W /= 2.0 * np.pi * h
    return WignerField(grid=grid, hbar=h, x=xs, xi=xis, values=W)


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------


def cv_seminorm(a, d=None):
    """Upper bound used in operator-norm ratio studies.

    Sum over terms of |c| * max(1, |alpha|_inf, |beta|_inf)^(2*(floor(d/2)+1)):
    the weight of the highest derivative entering the operator-norm bound
    for Weyl quantization (order floor(d/2)+1 in each of x and xi).
    """
    if d is None:
        d = a.grid.d
    p = 2 * (d // 2 + 1)
    total = 0.0
    for alpha, beta, c in a.terms:
        base = max(1.0, np.max(np.abs(alpha)), np.max(np.abs(beta)))
        total += abs(c) * base**p
    return float(total)


def symbol_ball_norm(a, n):
    """Upper bound on the C^n sup-norm: sum |c| * max(1,|a|_inf,|b|_inf)^n."""
    if n < 0:
        raise ValueError("order n must be >= 0")
    total = 0.0
    for alpha, beta, c in a.terms:
        base = max(1.0, np.max(np.abs(alpha)), np.max(np.abs(beta)))
        total += abs(c) * base**n
    return float(total)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def symbol_to_dict(a):
    return {
        "grid": {"d": a.grid.d, "M": a.grid.M, "L": a.grid.L},
        "terms": [
            {
                "alpha": [float(v) for v in alpha],
                "beta": [float(v) for v in beta],
                "re": float(c.real),
                "im": float(c.imag),
            }
            for alpha, beta, c in a.terms
        ],
    }


def symbol_from_dict(doc):
    g = doc["grid"]
    grid = make_grid(g["d"], g["M"], g["L"])
    terms = tuple(
        (
            np.asarray(t["alpha"], dtype=float),
            np.asarray(t["beta"], dtype=float),
            complex(t["re"], t["im"]),
        )
        for t in doc["terms"]
    )
    return FourierSymbol(grid, terms)


_OPERATOR_MAGIC = "meanfield-lab-operator"


def save_operator(path, op, extra=None):
    """Write a JSON header line followed by row-major little-endian complex data."""
    header = {
        "format": _OPERATOR_MAGIC,
        "dtype": "complex128-le",
        "shape": list(op.mat.shape),
        "grid": {"d": op.grid.d, "M": op.grid.M, "L": op.grid.L},
        "role": op.role,
    }
    if extra:
        header["extra"] = extra
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode() + b"\n")
        f.write(np.ascontiguousarray(op.mat.astype("<c16")).tobytes())


def load_operator(path):
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        if header.get("format") != _OPERATOR_MAGIC:
            raise ValueError(f"{path} is not a serialized operator")
        raw = f.read()
    shape = tuple(header["shape"])
    mat = np.frombuffer(raw, dtype="<c16").reshape(shape).astype(complex)
    g = header["grid"]
    grid = make_grid(g["d"], g["M"], g["L"])
    return GridOperator(grid, mat, header.get("role", "generic"))
