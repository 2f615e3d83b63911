"""Composite qubit+oscillator Hilbert space, ladder/Pauli operators, and the
nonlinear sideband coupling f1.

Basis convention (shared by every operator in the package):
    index = qubit * (n_max + 1) + n
with qubit 0 = |down> = |g> and qubit 1 = |up> = |e|.  The first
(n_max + 1) amplitudes are the |g> phonon ladder, the rest the |e> ladder.

f1 is the diagonal operator
    f1(n) = exp(-eta^2/2) * sum_l (-eta^2)^l / (l! (l+1)!) * n!/(n-l)!
          = exp(-eta^2/2) * L_n^{(1)}(eta^2) / (n + 1)
that dresses red/blue sideband rates outside the Lamb-Dicke regime.  Its
zeros in eta ("barriers") exactly decouple the Fock ladder above and below
the zero index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._dd import dd_add, dd_div_scalar, dd_mul, two_prod
from .errors import NoSignChange, SpaceMismatch

__all__ = [
    "HilbertSpace",
    "Operator",
    "NonlinearCoupling",
    "annihilation_op",
    "creation_op",
    "number_op",
    "identity_op",
    "qubit_ops",
    "parity_op",
    "f1_scalar",
    "f1_series",
    "f1_diagonal",
    "f1_operator",
    "barrier_eta",
    "rabi_rate",
    "displacement_matrix",
    "hermiticity_defect",
]

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class HilbertSpace:
    """Qubit x truncated Fock space, truncated at phonon number n_max."""

    n_max: int

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim_boson(self) -> int:
        return self.n_max + 1

    @property
    def dim_total(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, qubit: int, n: int) -> int:
        """Flat basis index of |qubit, n> (qubit 0 = down/g, 1 = up/e)."""
        if qubit not in (0, 1):
            raise ValueError("qubit must be 0 (down) or 1 (up)")
        if not 0 <= n <= self.n_max:
            raise ValueError(f"Fock index {n} outside truncation 0..{self.n_max}")
        return qubit * self.dim_boson + n


def _check_same_space(a: HilbertSpace, b: HilbertSpace):
    if a.n_max != b.n_max:
        raise SpaceMismatch(f"spaces differ: n_max {a.n_max} vs {b.n_max}")


class Operator:
    """Dense complex matrix on a HilbertSpace.

    All entries are checked finite.  When hermitian=True the matrix is
    verified against max|H - H^dag| < 1e-12 * max|H|.
    """

    def __init__(self, space: HilbertSpace, mat: np.ndarray, hermitian: bool = False):
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (space.dim_total, space.dim_total):
            raise ValueError(
                f"matrix shape {mat.shape} does not match dim_total {space.dim_total}"
            )
        if not np.all(np.isfinite(mat.view(float))):
            raise ValueError("operator entries must be finite")
        if hermitian:
            defect = hermiticity_defect(mat)
            if defect > HERMITICITY_TOL:
                raise ValueError(f"hermiticity defect {defect:.3e} exceeds {HERMITICITY_TOL}")
        self.space = space
        self.mat = mat
        self.hermitian = hermitian

    def dag(self) -> "Operator":
        return Operator(self.space, self.mat.conj().T, hermitian=self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.mat @ other.mat)


def hermiticity_defect(mat: np.ndarray) -> float:
    """max|H - H^dag| relative to max|H| (0 for the zero matrix)."""
    scale = np.abs(mat).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(mat - mat.conj().T).max() / scale)


# ---------------------------------------------------------------------------
# ladder and Pauli operators
# ---------------------------------------------------------------------------

def _boson_a(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1).astype(complex)


def annihilation_op(space: HilbertSpace) -> Operator:
    """a on the boson factor, identity on the qubit:  <m|a|n> = sqrt(n) d_{m,n-1}."""
    return Operator(space, np.kron(np.eye(2), _boson_a(space.n_max)))


def creation_op(space: HilbertSpace) -> Operator:
    return Operator(space, np.kron(np.eye(2), _boson_a(space.n_max).conj().T))


def number_op(space: HilbertSpace) -> Operator:
    diag = np.concatenate([np.arange(space.dim_boson)] * 2).astype(complex)
    return Operator(space, np.diag(diag), hermitian=True)


def identity_op(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim_total, dtype=complex), hermitian=True)


def qubit_ops(space: HilbertSpace):
    """(sigma_z, sigma_plus, sigma_minus, sigma_x), identity on the boson factor.

    sigma_z|up> = +|up>, sigma_z|down> = -|down>, sigma_plus = |up><down|.
    """
    eye_b = np.eye(space.dim_boson)
    sz = Operator(space, np.kron(np.diag([-1.0, 1.0]), eye_b), hermitian=True)
    sp_mat = np.zeros((2, 2))
    sp_mat[1, 0] = 1.0
    sp = Operator(space, np.kron(sp_mat, eye_b))
    sm = Operator(space, np.kron(sp_mat.T, eye_b))
    sx = Operator(space, np.kron(sp_mat + sp_mat.T, eye_b), hermitian=True)
    return sz, sp, sm, sx


def parity_op(space: HilbertSpace) -> Operator:
    """sigma_z * (-1)^n, the conserved parity of the (nonlinear) Rabi models."""
    signs = (-1.0) ** np.arange(space.dim_boson)
    diag = np.concatenate([-signs, signs]).astype(complex)
    return Operator(space, np.diag(diag), hermitian=True)


# ---------------------------------------------------------------------------
# nonlinear coupling f1
# ---------------------------------------------------------------------------

def _validate_f1_args(n: int, eta: float):
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"Fock index must be an integer >= 0, got {n!r}")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")


def f1_series(n: int, eta: float) -> float:
    """f1 from the alternating finite sum (terminates at l = n).

    Terms are generated by exact ratios and accumulated in compensated
    double-double arithmetic; the alternating cancellation near the zeros
    would otherwise swamp the value with roundoff.
    """
    _validate_f1_args(n, eta)
    xh, xl = two_prod(float(eta), float(eta))
    th, tl = 1.0, 0.0  # T_0 = 1
    sh, sl = 1.0, 0.0
    for l in range(n):
        # T_{l+1} = T_l * (-x) * (n - l) / ((l+1)(l+2))
        th, tl = dd_mul(th, tl, -xh, -xl)
        th, tl = dd_mul(th, tl, float(n - l), 0.0)
        th, tl = dd_div_scalar(th, tl, float((l + 1) * (l + 2)))
        sh, sl = dd_add(sh, sl, th, tl)
    return math.exp(-0.5 * eta * eta) * (sh + sl)


def _laguerre1_dd(n: int, xh: float, xl: float):
    """L_n^{(1)}(x) in double-double via the three-term upward recurrence."""
    if n == 0:
        return 1.0, 0.0
    lm_h, lm_l = 1.0, 0.0                      # L_0
    lc_h, lc_l = dd_add(2.0, 0.0, -xh, -xl)    # L_1 = 2 - x
    for k in range(1, n):
        # (k+1) L_{k+1} = (2k+2-x) L_k - (k+1) L_{k-1}
        ah, al = dd_add(float(2 * k + 2), 0.0, -xh, -xl)
        ah, al = dd_mul(ah, al, lc_h, lc_l)
        bh, bl = dd_mul(lm_h, lm_l, float(k + 1), 0.0)
        nh, nl = dd_add(ah, al, -bh, -bl)
        nh, nl = dd_div_scalar(nh, nl, float(k + 1))
        lm_h, lm_l, lc_h, lc_l = lc_h, lc_l, nh, nl
    return lc_h, lc_l


def f1_scalar(n: int, eta: float) -> float:
    """f1 from the closed form exp(-eta^2/2) L_n^{(1)}(eta^2) / (n+1).

    The Laguerre recurrence avoids factorial overflow up to n ~ 200 and
    agrees with f1_series to full double precision (tested invariant).
    """
    _validate_f1_args(n, eta)
    xh, xl = two_prod(float(eta), float(eta))
    lh, ll = _laguerre1_dd(n, xh, xl)
    vh, vl = dd_div_scalar(lh, ll, float(n + 1))
    return math.exp(-0.5 * eta * eta) * (vh + vl)


def f1_diagonal(n_max: int, eta: float) -> np.ndarray:
    """f1(0..n_max) in one recurrence pass (closed-form route)."""
    _validate_f1_args(n_max, eta)
    xh, xl = two_prod(float(eta), float(eta))
    pref = math.exp(-0.5 * eta * eta)
    out = np.empty(n_max + 1)
    out[0] = pref
    if n_max == 0:
        return out
    lm_h, lm_l = 1.0, 0.0
    lc_h, lc_l = dd_add(2.0, 0.0, -xh, -xl)
    vh, vl = dd_div_scalar(lc_h, lc_l, 2.0)
    out[1] = pref * (vh + vl)
    for k in range(1, n_max):
        ah, al = dd_add(float(2 * k + 2), 0.0, -xh, -xl)
        ah, al = dd_mul(ah, al, lc_h, lc_l)
        bh, bl = dd_mul(lm_h, lm_l, float(k + 1), 0.0)
        nh, nl = dd_add(ah, al, -bh, -bl)
        nh, nl = dd_div_scalar(nh, nl, float(k + 1))
        lm_h, lm_l, lc_h, lc_l = lc_h, lc_l, nh, nl
        vh, vl = dd_div_scalar(lc_h, lc_l, float(k + 2))
        out[k + 1] = pref * (vh + vl)
    return out


@dataclass(frozen=True)
class NonlinearCoupling:
    """Cached f1(0..n_max) table for a fixed Lamb-Dicke parameter."""

    eta: float
    n_max: int
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        object.__setattr__(self, "values", f1_diagonal(self.n_max, self.eta))

    def __call__(self, n: int) -> float:
        return float(self.values[n])


def f1_operator(space: HilbertSpace, eta: float) -> Operator:
    """Diagonal operator f1(n) on the boson factor, identity on the qubit."""
    diag = np.concatenate([f1_diagonal(space.n_max, eta)] * 2).astype(complex)
    return Operator(space, np.diag(diag), hermitian=True)


def barrier_eta(n: int, bracket: tuple[float, float] = (1e-3, 1.0)) -> float:
    """Smallest eta in the bracket with f1(n, eta) = 0 (the blockade value).

    Scans eta on a 1e-3 grid to bracket the first sign change, then bisects.
    Zeros of f1 in eta are simple and well separated below eta = 1.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"barrier index must be an integer >= 1, got {n!r}")
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    step = 1e-3
    e_prev, f_prev = lo, f1_scalar(n, lo)
    e = lo
    found = None
    while e < hi:
        e = min(e + step, hi)
        f = f1_scalar(n, e)
        if f == 0.0:
            return e
        if f_prev * f < 0:
            found = (e_prev, f_prev, e, f)
            break
        e_prev, f_prev = e, f
    if found is None:
        raise NoSignChange(
            f"f1({n}, eta) does not change sign on eta in [{lo}, {hi}] (scanned step {step})"
        )
    a, fa, b, fb = found
    for _ in range(200):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        fm = f1_scalar(n, m)
        if fm == 0.0:
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    root = 0.5 * (a + b)
    if abs(f1_scalar(n, root)) >= 1e-12:
        raise NoSignChange(f"bisection stalled for n={n} on [{a}, {b}]")
    return root


def rabi_rate(n: int, direction: str, omega: float, eta: float) -> float:
    """Sideband population-exchange rate beyond the Lamb-Dicke regime.

    red  (|down,n> <-> |up,n-1>):  eta * Omega * sqrt(n)   * |f1(n-1)|
    blue (|down,n> <-> |up,n+1>):  eta * Omega * sqrt(n+1) * |f1(n)|
    """
    if direction == "red":
        if n < 1:
            raise ValueError("red sideband requires n >= 1")
        return eta * omega * math.sqrt(n) * abs(f1_scalar(n - 1, eta))
    if direction == "blue":
        if n < 0:
            raise ValueError("blue sideband requires n >= 0")
        return eta * omega * math.sqrt(n + 1) * abs(f1_scalar(n, eta))
    raise ValueError(f"direction must be 'red' or 'blue', got {direction!r}")


# ---------------------------------------------------------------------------
# displacement operator
# ---------------------------------------------------------------------------

def _laguerre_table(n_max: int, x: float) -> np.ndarray:
    """L[j, k] = L_j^{(k)}(x) for 0 <= j, k <= n_max, rowwise recurrence."""
    dim = n_max + 1
    k = np.arange(dim, dtype=float)
    L = np.empty((dim, dim))
    L[0] = 1.0
    if n_max >= 1:
        L[1] = k + 1.0 - x
    for j in range(1, n_max):
        L[j + 1] = ((2 * j + k + 1.0 - x) * L[j] - (j + k) * L[j - 1]) / (j + 1.0)
    return L


def displacement_boson(n_max: int, beta: complex) -> np.ndarray:
    """<m|D(beta)|n> on the truncated boson space, D(beta) = exp(beta a^dag - beta* a).

    Closed form per subdiagonal k = m - n >= 0:
        <n+k|D|n> = sqrt(n!/(n+k)!) beta^k exp(-|beta|^2/2) L_n^{(k)}(|beta|^2)
    and <n|D|n+k> from D(-beta)^dag symmetry.  Magnitudes are assembled in
    log space so the far corners underflow to zero instead of overflowing.
    """
    dim = n_max + 1
    if beta == 0:
        return np.eye(dim, dtype=complex)
    x = abs(beta) ** 2
    phase = beta / abs(beta)
    L = _laguerre_table(n_max, x)
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1.0, dim)))])
    log_absbeta = math.log(abs(beta))
    D = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        n = np.arange(dim - k)
        Lk = L[n, k]
        with np.errstate(divide="ignore"):
            logmag = (
                0.5 * (logfact[n] - logfact[n + k])
                + k * log_absbeta
                - 0.5 * x
                + np.log(np.abs(Lk))
            )
        mag = np.where(Lk == 0.0, 0.0, np.sign(Lk) * np.exp(logmag))
        D[n + k, n] = mag * phase**k
        if k > 0:
            D[n, n + k] = mag * (-np.conj(phase)) ** k
    return D


def displacement_matrix(space: HilbertSpace, beta: complex) -> Operator:
    """D(beta) on the boson factor, identity on the qubit."""
    return Operator(space, np.kron(np.eye(2), displacement_boson(space.n_max, beta)))
