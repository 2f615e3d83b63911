"""Hamiltonian builders: linear/nonlinear Jaynes-Cummings and anti-JC models,
the (nonlinear) quantum Rabi model, and the lab-frame two-tone drive that
simulates the latter.

Sign convention: the exchange coupling is represented literally as
i g (sigma+ B - sigma- B^dag); no sigma_x-style rephasing is substituted,
since fidelity traces are sensitive to the convention.

Units: every frequency-like parameter (g, Omega, nu, detunings, omega_R,
omega0_R) is angular (rad/s, or any consistent unit; trajectories are
recorded in cycles of 2*pi/g).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import (
    HilbertSpace,
    Operator,
    _boson_a,
    displacement_boson,
    f1_diagonal,
)

__all__ = [
    "MODEL_KINDS",
    "ValidityWarning",
    "ModelSpec",
    "simulated_frequencies",
    "sideband_detunings",
    "build_jc",
    "build_anti_jc",
    "build_nonlinear_jc",
    "build_nonlinear_anti_jc",
    "build_qrm",
    "build_nonlinear_qrm",
    "build_hamiltonian",
    "build_two_tone",
    "TwoToneGenerator",
    "default_n_max",
    "DEFAULT_NU",
]

MODEL_KINDS = (
    "JC",
    "AntiJC",
    "NonlinearJC",
    "NonlinearAntiJC",
    "QRM",
    "NonlinearQRM",
    "TwoTone",
)

_JC_FAMILY = ("JC", "AntiJC", "NonlinearJC", "NonlinearAntiJC")
_QRM_FAMILY = ("QRM", "NonlinearQRM")
_NONLINEAR_KINDS = ("NonlinearJC", "NonlinearAntiJC", "NonlinearQRM", "TwoTone")

# Default trap frequency for two-tone cross-checks: 2*pi * 5 MHz, so that the
# paper-scale Omega = 2*pi * 133.26 kHz satisfies Omega/nu ~ 0.027 << 1.
DEFAULT_NU = 2 * math.pi * 5e6


class ValidityWarning(UserWarning):
    """A parameter choice strains the approximation hierarchy of the model."""


@dataclass
class ModelSpec:
    """Declarative description of which Hamiltonian to build and its parameters.

    g is the qubit-boson coupling; for TwoTone it must satisfy g = eta*Omega/2
    (supplied g values are cross-checked, missing ones derived).
    """

    kind: str
    eta: float = 0.0
    g: float | None = None
    omega_R: float = 0.0
    omega0_R: float = 0.0
    Omega: float | None = None
    nu: float | None = None
    delta_r: float = 0.0
    delta_b: float = 0.0
    phi_r: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.kind in _NONLINEAR_KINDS and self.kind != "TwoTone" and self.eta == 0.0:
            # eta = 0 is the exact linear limit; allowed, but flag the intent
            warnings.warn(f"{self.kind} with eta=0 is the linear model", ValidityWarning)
        if self.kind in _JC_FAMILY:
            if self.g is None or self.g <= 0:
                raise ValueError(f"{self.kind} requires g > 0")
        if self.kind in _QRM_FAMILY:
            if self.g is None or self.g < 0:
                raise ValueError(f"{self.kind} requires g >= 0")
        if self.kind == "TwoTone":
            self._init_two_tone()

    def _init_two_tone(self):
        if self.eta <= 0:
            raise ValueError("TwoTone requires eta > 0")
        if self.nu is None or self.nu <= 0:
            raise ValueError("TwoTone requires trap frequency nu > 0")
        if self.Omega is None:
            if self.g is None:
                raise ValueError("TwoTone requires Omega (or g) to be set")
            self.Omega = 2.0 * self.g / self.eta
        g_implied = self.eta * self.Omega / 2.0
        if self.g is None:
            self.g = g_implied
        elif abs(self.g - g_implied) > 1e-9 * abs(self.g):
            raise ValueError(
                f"inconsistent coupling: g={self.g} but eta*Omega/2={g_implied}"
            )
        for name, delta in (("delta_r", self.delta_r), ("delta_b", self.delta_b)):
            if abs(delta) > 0.1 * self.nu:
                warnings.warn(
                    f"|{name}|/nu = {abs(delta) / self.nu:.3f} > 0.1 strains the "
                    "sideband hierarchy delta << nu",
                    ValidityWarning,
                )
        if self.Omega / self.nu > 0.2:
            warnings.warn(
                f"Omega/nu = {self.Omega / self.nu:.3f} > 0.2 strains the "
                "vibrational RWA condition Omega << nu",
                ValidityWarning,
            )

    def simulated(self) -> tuple[float, float]:
        """(omega0_R, omega_R) simulated by the two-tone detunings."""
        return simulated_frequencies(self.delta_r, self.delta_b)


def simulated_frequencies(delta_r: float, delta_b: float) -> tuple[float, float]:
    """Map sideband detunings to the simulated Rabi-model frequencies:
    omega0_R = -(delta_r + delta_b)/2,  omega_R = (delta_r - delta_b)/2.
    """
    return -0.5 * (delta_r + delta_b), 0.5 * (delta_r - delta_b)


def sideband_detunings(omega0_R: float, omega_R: float) -> tuple[float, float]:
    """Inverse of simulated_frequencies: (delta_r, delta_b)."""
    return omega_R - omega0_R, -omega_R - omega0_R


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _exchange(space: HilbertSpace, g: float, block: np.ndarray) -> np.ndarray:
    """i g (sigma+ (x) B - sigma- (x) B^dag) in qubit-major block layout."""
    d = space.dim_boson
    H = np.zeros((2 * d, 2 * d), dtype=complex)
    H[d:, :d] = 1j * g * block
    H[:d, d:] = (1j * g * block).conj().T
    return H


def build_jc(space: HilbertSpace, g: float) -> Operator:
    """H_JC = i g (sigma+ a - sigma- a^dag); couples |down,n> <-> |up,n-1>."""
    return Operator(space, _exchange(space, g, _boson_a(space.n_max)), hermitian=True)


def build_anti_jc(space: HilbertSpace, g: float) -> Operator:
    """H_aJC = i g (sigma+ a^dag - sigma- a); couples |down,n> <-> |up,n+1>."""
    a = _boson_a(space.n_max)
    return Operator(space, _exchange(space, g, a.conj().T), hermitian=True)


def build_nonlinear_jc(space: HilbertSpace, g: float, eta: float) -> Operator:
    """H_nJC = i g (sigma+ f1 a - sigma- a^dag f1), rate g sqrt(n)|f1(n-1)|."""
    a = _boson_a(space.n_max)
    f1 = f1_diagonal(space.n_max, eta)
    return Operator(space, _exchange(space, g, f1[:, None] * a), hermitian=True)


def build_nonlinear_anti_jc(space: HilbertSpace, g: float, eta: float) -> Operator:
    """H_naJC = i g (sigma+ a^dag f1 - sigma- f1 a), rate g sqrt(n+1)|f1(n)|."""
    a = _boson_a(space.n_max)
    f1 = f1_diagonal(space.n_max, eta)
    return Operator(space, _exchange(space, g, a.conj().T * f1[None, :]), hermitian=True)


def _rabi(space: HilbertSpace, g: float, omega_R: float, omega0_R: float,
          coupling: np.ndarray) -> np.ndarray:
    d = space.dim_boson
    nb = np.arange(d)
    H = np.zeros((2 * d, 2 * d), dtype=complex)
    H[:d, :d] = np.diag(omega_R * nb - omega0_R / 2.0)
    H[d:, d:] = np.diag(omega_R * nb + omega0_R / 2.0)
    # i g (sigma+ - sigma-) (x) coupling, with coupling hermitian
    H[d:, :d] += 1j * g * coupling
    H[:d, d:] += -1j * g * coupling
    return H


def build_qrm(space: HilbertSpace, g: float, omega_R: float, omega0_R: float) -> Operator:
    """H_QRM = omega0_R/2 sigma_z + omega_R a^dag a + i g (sigma+ - sigma-)(a + a^dag)."""
    a = _boson_a(space.n_max)
    return Operator(space, _rabi(space, g, omega_R, omega0_R, (a + a.conj().T).real.astype(complex)),
                    hermitian=True)


def build_nonlinear_qrm(space: HilbertSpace, g: float, eta: float,
                        omega_R: float, omega0_R: float) -> Operator:
    """H_nQRM = omega0_R/2 sigma_z + omega_R a^dag a
               + i g (sigma+ - sigma-)(f1 a + a^dag f1).

    f1 a + a^dag f1 is hermitian (f1 real diagonal); at a barrier index n*
    with f1(n*) = 0 the n <= n* and n > n* sectors decouple exactly.
    """
    a = _boson_a(space.n_max)
    f1 = f1_diagonal(space.n_max, eta)
    fa = f1[:, None] * a
    return Operator(space, _rabi(space, g, omega_R, omega0_R, fa + fa.conj().T),
                    hermitian=True)


def build_hamiltonian(spec: ModelSpec, space: HilbertSpace) -> Operator:
    """Dispatch on spec.kind for the time-independent models."""
    if spec.kind == "JC":
        return build_jc(space, spec.g)
    if spec.kind == "AntiJC":
        return build_anti_jc(space, spec.g)
    if spec.kind == "NonlinearJC":
        return build_nonlinear_jc(space, spec.g, spec.eta)
    if spec.kind == "NonlinearAntiJC":
        return build_nonlinear_anti_jc(space, spec.g, spec.eta)
    if spec.kind == "QRM":
        return build_qrm(space, spec.g, spec.omega_R, spec.omega0_R)
    if spec.kind == "NonlinearQRM":
        return build_nonlinear_qrm(space, spec.g, spec.eta, spec.omega_R, spec.omega0_R)
    raise ValueError(f"{spec.kind} is time-dependent; use TwoToneGenerator/build_two_tone")


# ---------------------------------------------------------------------------
# two-tone lab-frame drive
# ---------------------------------------------------------------------------

class TwoToneGenerator:
    """Time-dependent two-tone Hamiltonian in the qubit+mode interaction picture.

    Two laser tones at omega_r = omega0 - nu + delta_r and
    omega_b = omega0 + nu + delta_b give, after the optical RWA,

        H(t) = Omega/2 sigma+ D(i eta e^{i nu t})
               [e^{-i((delta_r - nu) t - phi_r)} + e^{-i((delta_b + nu) t - phi_b)}]
               + H.c.

    Note the tone phase factors carry the full detunings from the carrier
    (-nu + delta_r and +nu + delta_b); keeping only the slow delta_r/delta_b
    would put both tones on the carrier resonance instead of the sidebands.
    Under the vibrational RWA this Hamiltonian reduces to the nonlinear QRM
    with omega0_R = -(delta_r+delta_b)/2 and omega_R = (delta_r-delta_b)/2.

    The displacement argument i eta e^{i nu t} has constant modulus, so
    D(t) = P(t) D(i eta) P(t)^dag with P(t) = diag(e^{i nu n t}); only the
    cached D(i eta) matrix and O(dim) phase vectors are needed per step.
    """

    def __init__(self, spec: ModelSpec, space: HilbertSpace):
        if spec.kind != "TwoTone":
            raise ValueError(f"TwoToneGenerator requires a TwoTone spec, got {spec.kind}")
        self.spec = spec
        self.space = space
        self.d0 = displacement_boson(space.n_max, 1j * spec.eta)
        self.d0_dag = self.d0.conj().T
        self.nb = np.arange(space.dim_boson)
        self._full_r = spec.delta_r - spec.nu
        self._full_b = spec.delta_b + spec.nu

    def tone_coeff(self, t: float) -> complex:
        s = self.spec
        return (s.Omega / 2.0) * (
            np.exp(-1j * (self._full_r * t - s.phi_r))
            + np.exp(-1j * (self._full_b * t - s.phi_b))
        )

    def matrix(self, t: float) -> np.ndarray:
        d = self.space.dim_boson
        ph = np.exp(1j * self.spec.nu * t * self.nb)
        block = self.tone_coeff(t) * (ph[:, None] * self.d0 * ph.conj()[None, :])
        H = np.zeros((2 * d, 2 * d), dtype=complex)
        H[d:, :d] = block
        H[:d, d:] = block.conj().T
        return H

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        """H(t) @ psi without materializing H (hot path for RK4)."""
        d = self.space.dim_boson
        ph = np.exp(1j * self.spec.nu * t * self.nb)
        c = self.tone_coeff(t)
        out = np.empty_like(psi)
        out[d:] = c * (ph * (self.d0 @ (ph.conj() * psi[:d])))
        out[:d] = np.conj(c) * (ph * (self.d0_dag @ (ph.conj() * psi[d:])))
        return out


def build_two_tone(spec: ModelSpec, space: HilbertSpace, t: float) -> Operator:
    """Checked snapshot of the two-tone Hamiltonian at time t."""
    return Operator(space, TwoToneGenerator(spec, space).matrix(t), hermitian=True)


def default_n_max(g: float | None = None, omega_R: float | None = None,
                  alpha: float = 0.0, n_barrier: int | None = None) -> int:
    """Truncation default: max(2 n_barrier, ceil((|alpha| + 2g/omega_R)^2) + 20, 40).

    DSC dynamics displace the mode by up to 2g/omega_R on top of the initial
    coherent radius; barrier models only need headroom above the blockade.
    """
    candidates = [40]
    if n_barrier is not None:
        candidates.append(2 * n_barrier)
    if g and omega_R:
        candidates.append(math.ceil((abs(alpha) + 2.0 * g / abs(omega_R)) ** 2) + 20)
    return max(candidates)
