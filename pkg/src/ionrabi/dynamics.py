"""State preparation, unitary/Lindblad propagation, and observable extraction.

Evolution strategies:
  - time-independent H: one hermitian eigendecomposition, then pure phase
    application per requested time (exact up to linear algebra);
  - time-dependent H and Lindblad: fixed-step classical RK4 with the step
    bounds documented on each function.  Fixed steps keep golden outputs
    deterministic and reproducible.

Trace/norm/positivity are monitored, not silently repaired: drifts beyond
tolerance raise StepTooLarge / PositivityLoss so step-size bugs surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PositivityLoss, SpaceMismatch, StepTooLarge, TruncationTooSmall
from .fock import HilbertSpace, Operator, hermiticity_defect
from .models import ModelSpec, TwoToneGenerator, build_nonlinear_qrm, default_n_max

__all__ = [
    "QuantumState",
    "LindbladSpec",
    "Trajectory",
    "fock_state",
    "coherent_state",
    "thermal_state",
    "coherent_required_n_max",
    "evolve_unitary",
    "evolve_unitary_td",
    "evolve_lindblad",
    "expectation",
    "overlap_fidelity",
    "phonon_distribution",
    "rwa_crosscheck",
    "RwaReport",
]

_QUBIT_INDEX = {"down": 0, "g": 0, "up": 1, "e": 1}

NORM_TOL = 1e-10
TRACE_TOL = 1e-8
PHONON_SUM_TOL = 1e-6


@dataclass
class QuantumState:
    """Pure state vector or density matrix on a HilbertSpace."""

    space: HilbertSpace
    data: np.ndarray
    kind: str  # 'pure' | 'density'

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        dim = self.space.dim_total
        if self.kind == "pure":
            if self.data.shape != (dim,):
                raise ValueError(f"pure state must have shape ({dim},)")
            if abs(np.linalg.norm(self.data) ** 2 - 1.0) > NORM_TOL:
                raise ValueError("pure state is not normalized")
        elif self.kind == "density":
            if self.data.shape != (dim, dim):
                raise ValueError(f"density matrix must have shape ({dim},{dim})")
            if abs(np.trace(self.data).real - 1.0) > TRACE_TOL:
                raise ValueError("density matrix trace differs from 1")
            if hermiticity_defect(self.data) > 1e-10:
                raise ValueError("density matrix is not hermitian")
        else:
            raise ValueError(f"kind must be 'pure' or 'density', got {self.kind!r}")

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def to_density(self) -> "QuantumState":
        if self.kind == "density":
            return self
        return QuantumState(self.space, np.outer(self.data, self.data.conj()), "density")

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the density matrix (positivity check, on demand)."""
        rho = self.to_density().data
        return float(np.linalg.eigvalsh(rho)[0])


def _qubit_index(qubit) -> int:
    if isinstance(qubit, str):
        try:
            return _QUBIT_INDEX[qubit.lower()]
        except KeyError:
            raise ValueError(f"qubit must be 'down' or 'up', got {qubit!r}") from None
    if qubit in (0, 1):
        return int(qubit)
    raise ValueError(f"qubit must be 'down'/'up' or 0/1, got {qubit!r}")


def fock_state(space: HilbertSpace, n: int, qubit="down") -> QuantumState:
    """|qubit, n> basis state."""
    if not 0 <= n <= space.n_max:
        raise ValueError(f"Fock index {n} exceeds truncation n_max={space.n_max}")
    psi = np.zeros(space.dim_total, dtype=complex)
    psi[space.index(_qubit_index(qubit), n)] = 1.0
    return QuantumState(space, psi, "pure")


def coherent_required_n_max(alpha: complex, tail: float = 1e-10) -> int:
    """Smallest n_max with Poisson(|alpha|^2) mass beyond it below `tail`."""
    lam = abs(alpha) ** 2
    if lam == 0:
        return 1
    p = math.exp(-lam)
    acc = p
    n = 0
    while 1.0 - acc >= tail and n < 100000:
        n += 1
        p *= lam / n
        acc += p
    return n


def coherent_state(space: HilbertSpace, alpha: complex, qubit="down") -> QuantumState:
    """Coherent state |alpha> (x) |qubit>, renormalized after truncation.

    Rejects truncations holding less than 1 - 1e-10 of the Poisson weight.
    """
    lam = abs(alpha) ** 2
    n = np.arange(space.dim_boson)
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1.0, space.dim_boson)))])
    if lam > 0:
        logw = -lam / 2.0 + n * math.log(abs(alpha)) - logfact / 2.0
        amps = np.exp(logw) * np.exp(1j * np.angle(alpha) * n)
    else:
        amps = (n == 0).astype(complex)
    held = float(np.sum(np.abs(amps) ** 2))
    if 1.0 - held > 1e-10:
        raise TruncationTooSmall(
            f"coherent state with |alpha|^2={lam:.4g} keeps tail mass "
            f"{1.0 - held:.3e} > 1e-10 beyond n_max={space.n_max}",
            required_n_max=coherent_required_n_max(alpha),
        )
    amps = amps / math.sqrt(held)
    psi = np.zeros(space.dim_total, dtype=complex)
    q = _qubit_index(qubit)
    psi[q * space.dim_boson:(q + 1) * space.dim_boson] = amps
    return QuantumState(space, psi, "pure")


def thermal_state(space: HilbertSpace, nbar: float, qubit="down") -> QuantumState:
    """Thermal phonon density matrix P_k = nbar^k/(nbar+1)^{k+1} (x) |qubit><qubit|."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    k = np.arange(space.dim_boson)
    if nbar == 0:
        weights = (k == 0).astype(float)
    else:
        ratio = nbar / (nbar + 1.0)
        tail = ratio ** (space.n_max + 1)
        if tail > 1e-10:
            required = math.ceil(math.log(1e-10) / math.log(ratio)) + 1
            raise TruncationTooSmall(
                f"thermal state nbar={nbar} keeps tail mass {tail:.3e} > 1e-10 "
                f"beyond n_max={space.n_max}",
                required_n_max=required,
            )
        weights = np.exp(k * math.log(ratio)) / (nbar + 1.0)
    weights = weights / weights.sum()
    rho = np.zeros((space.dim_total, space.dim_total), dtype=complex)
    q = _qubit_index(qubit)
    sl = slice(q * space.dim_boson, (q + 1) * space.dim_boson)
    rho[sl, sl] = np.diag(weights)
    return QuantumState(space, rho, "density")


@dataclass
class LindbladSpec:
    """Collapse channels: list of (rate Gamma >= 0, collapse Operator)."""

    terms: list

    def __post_init__(self):
        for rate, op in self.terms:
            if rate < 0:
                raise ValueError(f"collapse rate must be >= 0, got {rate}")
            if not isinstance(op, Operator):
                raise TypeError("collapse operators must be Operator instances")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Time grid plus per-time observables.

    times are in the raw units of 1/H; `cycles` converts to the paper's
    2*pi/g axis when g is known.
    """

    times: np.ndarray
    sigma_z: np.ndarray
    fidelity: np.ndarray
    n_mean: np.ndarray
    phonons: np.ndarray                      # (n_times, dim_boson)
    g: float | None = None
    snapshots: dict = field(default_factory=dict)   # time index -> raw state copy
    meta: dict = field(default_factory=dict)

    @property
    def cycles(self) -> np.ndarray:
        if self.g is None:
            return self.times
        return self.times * self.g / (2.0 * math.pi)


class _Recorder:
    def __init__(self, space: HilbertSpace, ref: QuantumState, n_times: int,
                 snapshot_indices=None):
        self.d = space.dim_boson
        self.ref = ref
        self.sigma_z = np.empty(n_times)
        self.fidelity = np.empty(n_times)
        self.n_mean = np.empty(n_times)
        self.phonons = np.empty((n_times, self.d))
        self.snapshots = {}
        self._snap = set(snapshot_indices or ())
        self._nb = np.arange(self.d)

    def record(self, i: int, state: np.ndarray):
        d = self.d
        if state.ndim == 1:
            pg = np.abs(state[:d]) ** 2
            pe = np.abs(state[d:]) ** 2
            fid = _fidelity_raw(self.ref, state)
        else:
            diag = np.real(np.diag(state))
            pg, pe = diag[:d], diag[d:]
            fid = _fidelity_raw(self.ref, state)
        pn = pg + pe
        total = pn.sum()
        # inverted comparison so NaN (diverged integration) fails too
        if not (abs(total - 1.0) <= PHONON_SUM_TOL):
            raise StepTooLarge(f"phonon distribution sum drifted to {total} at record {i}")
        self.sigma_z[i] = pe.sum() - pg.sum()
        self.n_mean[i] = float(self._nb @ pn)
        self.phonons[i] = pn
        self.fidelity[i] = fid
        if i in self._snap:
            self.snapshots[i] = state.copy()


def _fidelity_raw(ref: QuantumState, state: np.ndarray) -> float:
    if ref.is_pure:
        if state.ndim == 1:
            return float(abs(np.vdot(ref.data, state)) ** 2)
        return float(np.real(np.vdot(ref.data, state @ ref.data)))
    # mixed reference: overlap Tr(rho_ref rho)
    if state.ndim == 1:
        return float(np.real(np.vdot(state, ref.data @ state)))
    return float(np.real(np.trace(ref.data @ state)))


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1:
        raise ValueError("times must be a non-empty 1-d grid")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be monotone non-decreasing")
    return times


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def evolve_unitary(H: Operator, psi0: QuantumState, times, g: float | None = None,
                   snapshot_indices=None) -> Trajectory:
    """psi(t) = exp(-iHt) psi0 via one hermitian eigendecomposition."""
    if not psi0.is_pure:
        raise ValueError("evolve_unitary requires a pure initial state")
    if H.space.n_max != psi0.space.n_max:
        raise SpaceMismatch("H and psi0 live on different spaces")
    if not H.hermitian and hermiticity_defect(H.mat) > 1e-12:
        raise ValueError("evolve_unitary requires a hermitian Hamiltonian")
    times = _check_times(times)
    w, V = np.linalg.eigh(H.mat)
    coeff = V.conj().T @ psi0.data
    rec = _Recorder(H.space, psi0, len(times), snapshot_indices)
    for i, t in enumerate(times):
        psi = V @ (np.exp(-1j * w * t) * coeff)
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > NORM_TOL:
            raise StepTooLarge(f"norm drifted to {norm} at t={t}")
        rec.record(i, psi)
    return Trajectory(times, rec.sigma_z, rec.fidelity, rec.n_mean, rec.phonons,
                      g=g, snapshots=rec.snapshots,
                      meta={"method": "eigh", "n_times": len(times)})


def _as_apply(h_of_t):
    """Normalize a time-dependent Hamiltonian into an apply(t, psi) callable."""
    if hasattr(h_of_t, "apply"):
        return h_of_t.apply
    def apply(t, psi):
        H = h_of_t(t)
        if isinstance(H, Operator):
            H = H.mat
        return H @ psi
    return apply


def evolve_unitary_td(h_of_t, psi0: QuantumState, times, dt_max: float | None = None,
                      g: float | None = None, snapshot_indices=None) -> Trajectory:
    """Fixed-step RK4 for i d psi/dt = H(t) psi.

    h_of_t is either callable t -> matrix/Operator or an object with
    apply(t, psi) (e.g. TwoToneGenerator).  dt_max defaults to
    2*pi/(200*nu) when h_of_t carries a two-tone spec; the accumulated
    per-step norm drift is monitored and > 1e-6 raises StepTooLarge.
    """
    if not psi0.is_pure:
        raise ValueError("evolve_unitary_td requires a pure initial state")
    times = _check_times(times)
    if dt_max is None:
        spec = getattr(h_of_t, "spec", None)
        if spec is not None and getattr(spec, "nu", None):
            dt_max = 2.0 * math.pi / (200.0 * spec.nu)
        else:
            raise ValueError("dt_max is required unless h_of_t carries a TwoTone spec")
    apply = _as_apply(h_of_t)
    rec = _Recorder(psi0.space, psi0, len(times), snapshot_indices)
    psi = psi0.data.copy()
    drift = 0.0
    n_steps = 0
    t = times[0]
    rec.record(0, psi)
    for i in range(1, len(times)):
        span = times[i] - t
        steps = max(1, math.ceil(span / dt_max)) if span > 0 else 0
        dt = span / steps if steps else 0.0
        for k in range(steps):
            tk = t + k * dt
            k1 = apply(tk, psi)
            k2 = apply(tk + dt / 2, psi + (-0.5j * dt) * k1)
            k3 = apply(tk + dt / 2, psi + (-0.5j * dt) * k2)
            k4 = apply(tk + dt, psi + (-1j * dt) * k3)
            psi = psi + (-1j * dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            norm = np.linalg.norm(psi)
            drift += abs(norm - 1.0)
            if not (drift <= 1e-6):
                raise StepTooLarge(
                    f"accumulated norm drift {drift:.3e} > 1e-6 at t={tk + dt} "
                    f"(dt={dt:.3e}); reduce dt_max"
                )
            psi /= norm
            n_steps += 1
        t = times[i]
        rec.record(i, psi)
    return Trajectory(times, rec.sigma_z, rec.fidelity, rec.n_mean, rec.phonons,
                      g=g, snapshots=rec.snapshots,
                      meta={"method": "rk4", "dt_max": dt_max, "n_steps": n_steps,
                            "norm_drift": drift})


def _lindblad_rhs_general(H, terms, rho):
    out = -1j * (H @ rho - rho @ H)
    for rate, C, Cd, CdC in terms:
        out += rate * (C @ rho @ Cd - 0.5 * (CdC @ rho + rho @ CdC))
    return out


def _make_qubit_decay_rhs(H, rate, d):
    """L(sigma-) without matrix products: sigma- only shuffles qubit blocks."""
    def rhs(rho):
        out = -1j * (H @ rho - rho @ H)
        ree = rho[d:, d:]
        out[:d, :d] += rate * ree
        out[d:, d:] -= rate * ree
        out[d:, :d] -= 0.5 * rate * rho[d:, :d]
        out[:d, d:] -= 0.5 * rate * rho[:d, d:]
        return out
    return rhs


def _is_sigma_minus(mat: np.ndarray, d: int) -> bool:
    expected = np.zeros_like(mat)
    expected[:d, d:] = np.eye(d)
    return np.array_equal(mat, expected)


def evolve_lindblad(H: Operator, lindblad: LindbladSpec, rho0: QuantumState, times,
                    dt_max: float | None = None, g: float | None = None,
                    snapshot_indices=None) -> Trajectory:
    """Fixed-step RK4 for drho/dt = -i[H,rho] + sum Gamma (C rho C^dag - {C^dag C, rho}/2).

    The step obeys (||H|| + sum Gamma ||C||^2) dt <= 0.05.  rho is
    re-hermitized each step; trace drift > 1e-6 raises StepTooLarge and a
    record-time eigenvalue < -1e-6 raises PositivityLoss (positivity is
    monitored, never projected back).
    """
    rho0 = rho0.to_density()
    if H.space.n_max != rho0.space.n_max:
        raise SpaceMismatch("H and rho0 live on different spaces")
    times = _check_times(times)
    d = H.space.dim_boson
    norm_H = float(np.linalg.norm(H.mat, 2))
    budget = norm_H + sum(rate * np.linalg.norm(op.mat, 2) ** 2
                          for rate, op in lindblad.terms)
    bound = 0.05 / budget if budget > 0 else math.inf
    # explicit dt_max is trusted (and monitored); the default obeys the bound
    dt_eff = bound if dt_max is None else dt_max

    active = [(rate, op) for rate, op in lindblad.terms if rate > 0]
    if len(active) == 1 and _is_sigma_minus(active[0][1].mat, d):
        rhs = _make_qubit_decay_rhs(H.mat, active[0][0], d)
    else:
        terms = [(rate, op.mat, op.mat.conj().T, op.mat.conj().T @ op.mat)
                 for rate, op in active]
        rhs = lambda rho: _lindblad_rhs_general(H.mat, terms, rho)

    rec = _Recorder(H.space, rho0, len(times), snapshot_indices)
    rho = rho0.data.copy()
    t = times[0]
    max_trace_drift = 0.0
    n_steps = 0
    rec.record(0, rho)
    for i in range(1, len(times)):
        span = times[i] - t
        steps = max(1, math.ceil(span / dt_eff)) if span > 0 else 0
        dt = span / steps if steps else 0.0
        for _ in range(steps):
            k1 = rhs(rho)
            k2 = rhs(rho + (0.5 * dt) * k1)
            k3 = rhs(rho + (0.5 * dt) * k2)
            k4 = rhs(rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
            n_steps += 1
            tr_drift = abs(np.trace(rho).real - 1.0)
            max_trace_drift = max(max_trace_drift, tr_drift)
            if not (tr_drift <= 1e-6):
                raise StepTooLarge(
                    f"trace drifted by {tr_drift:.3e} > 1e-6 (dt={dt:.3e}); reduce dt_max"
                )
        t = times[i]
        if not np.all(np.isfinite(rho.view(float))):
            raise PositivityLoss(f"density matrix diverged before t={t}; reduce dt_max")
        min_eig = float(np.linalg.eigvalsh(rho)[0])
        if not (min_eig >= -1e-6):
            raise PositivityLoss(f"min eigenvalue {min_eig:.3e} < -1e-6 at t={t}")
        rec.record(i, rho)
    return Trajectory(times, rec.sigma_z, rec.fidelity, rec.n_mean, rec.phonons,
                      g=g, snapshots=rec.snapshots,
                      meta={"method": "rk4_lindblad", "dt": dt_eff, "n_steps": n_steps,
                            "trace_drift": max_trace_drift})


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def expectation(op: Operator, state: QuantumState) -> float:
    """<O> for a hermitian operator; rejects a residual imaginary part > 1e-10."""
    if op.space.n_max != state.space.n_max:
        raise SpaceMismatch("operator and state live on different spaces")
    if state.is_pure:
        val = complex(np.vdot(state.data, op.mat @ state.data))
    else:
        val = complex(np.trace(op.mat @ state.data))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; operator not hermitian?")
    return val.real


def overlap_fidelity(ref: QuantumState, state: QuantumState) -> float:
    """|<psi0|psi>|^2 for pure states, <psi0|rho|psi0> against a density.

    For two densities this is the overlap Tr(rho_ref rho) (not Uhlmann).
    """
    if ref.space.n_max != state.space.n_max:
        raise SpaceMismatch("states live on different spaces")
    return _fidelity_raw(ref, state.data)


def phonon_distribution(state: QuantumState) -> np.ndarray:
    """P_n summed over the two qubit sectors."""
    d = state.space.dim_boson
    if state.is_pure:
        return np.abs(state.data[:d]) ** 2 + np.abs(state.data[d:]) ** 2
    diag = np.real(np.diag(state.data))
    return diag[:d] + diag[d:]


# ---------------------------------------------------------------------------
# vibrational-RWA cross-check
# ---------------------------------------------------------------------------

@dataclass
class RwaReport:
    """Outcome of the two-tone vs nonlinear-QRM comparison."""

    max_deviation: float
    tolerance: float
    valid: bool
    omega_over_nu: float
    n_records: int
    meta: dict = field(default_factory=dict)


def rwa_crosscheck(spec: ModelSpec, psi0: QuantumState | None = None,
                   T: float | None = None, tolerance: float = 0.01,
                   n_max: int | None = None, n_records: int = 61) -> RwaReport:
    """Evolve psi0 under the full two-tone drive and under the nonlinear QRM
    it simulates, and report max_t (1 - |<psi_full(t)|psi_NQRM(t)>|^2).

    The two trajectories are compared in a common frame: the two-tone state
    is mapped by exp(+i H0 t) with H0 = (delta_b+delta_r)/4 sigma_z
    + (delta_b-delta_r)/2 a^dag a, which aligns the interaction picture of
    the drive with the Schroedinger picture of the simulated model.
    """
    if spec.kind != "TwoTone":
        raise ValueError("rwa_crosscheck requires a TwoTone ModelSpec")
    omega0_R, omega_R = spec.simulated()
    if n_max is None:
        n_max = default_n_max(g=spec.g, omega_R=omega_R or None)
    space = HilbertSpace(n_max)
    if psi0 is None:
        psi0 = fock_state(space, 0, "down")
    if T is None:
        T = 3.0 * 2.0 * math.pi / spec.g
    times = np.linspace(0.0, T, n_records)

    gen = TwoToneGenerator(spec, space)
    traj_full = evolve_unitary_td(gen, psi0, times, g=spec.g,
                                  snapshot_indices=range(n_records))

    H_sim = build_nonlinear_qrm(space, spec.g, spec.eta, omega_R, omega0_R)
    traj_sim = evolve_unitary(H_sim, psi0, times, g=spec.g,
                              snapshot_indices=range(n_records))

    nb = np.arange(space.dim_boson)
    h0 = np.concatenate([
        0.25 * (spec.delta_b + spec.delta_r) * (-1.0) + 0.5 * (spec.delta_b - spec.delta_r) * nb,
        0.25 * (spec.delta_b + spec.delta_r) * (+1.0) + 0.5 * (spec.delta_b - spec.delta_r) * nb,
    ])
    max_dev = 0.0
    for i, t in enumerate(times):
        aligned = np.exp(1j * h0 * t) * traj_full.snapshots[i]
        dev = 1.0 - abs(np.vdot(aligned, traj_sim.snapshots[i])) ** 2
        max_dev = max(max_dev, float(dev))
    return RwaReport(
        max_deviation=max_dev,
        tolerance=tolerance,
        valid=max_dev < tolerance,
        omega_over_nu=spec.Omega / spec.nu,
        n_records=n_records,
        meta={"T": T, "n_max": n_max, "omega0_R": omega0_R, "omega_R": omega_R,
              "rk4_steps": traj_full.meta["n_steps"]},
    )
