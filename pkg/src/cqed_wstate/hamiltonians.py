"""Hamiltonians of the atom-cavity system and its reduced models.

Full models act on the (2N+2)-dimensional space of :mod:`cqed_wstate.core`.
Reduced models act on the ordered span ``{psi1, zeta, phi1}`` (3x3) or
``{psi1, zeta}`` (2x2); :func:`zeno_frame` gives the embedding vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PHOTON, SystemConfig, excited_index, f_index, ground_index
from .pulses import PulseSchedule

HERMITIAN_TOL = 1e-12


class EigenvalueCrossingError(RuntimeError):
    """Two instantaneous eigenvalues came closer than the allowed gap."""


@dataclass(frozen=True)
class TimeDependentOperator:
    """``evaluate(t) -> (d, d)``; ``stack(times) -> (len(times), d, d)`` when vectorized."""

    evaluate: Callable[[float], np.ndarray]
    dimension: int
    stack: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    def sample(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.stack is not None:
            return self.stack(times)
        out = np.empty((len(times), self.dimension, self.dimension), dtype=np.complex128)
        for i, t in enumerate(times):
            out[i] = self.evaluate(t)
        return out


@dataclass(frozen=True)
class ZenoDecomposition:
    projectors: list
    eigenvalues: list
    coupling: float


def hamiltonian_stack(cfg: SystemConfig, omega1, omega_s, detuning: float = 0.0) -> np.ndarray:
    """Vectorized builder: drive arrays of length T -> (T, d, d) Hamiltonians.

    Omega_1 drives f<->e on atom 1, Omega_s drives f<->e on atoms 2..N, the
    cavity couples g<->e on every atom, and ``detuning`` sits on every
    atomic-excited state. The absorbing ground state stays uncoupled.
    """
    o1 = np.atleast_1d(np.asarray(omega1, dtype=np.complex128))
    os_ = np.atleast_1d(np.asarray(omega_s, dtype=np.complex128))
    o1, os_ = np.broadcast_arrays(o1, os_)
    n, d = cfg.n_atoms, cfg.dim
    H = np.zeros((o1.shape[0], d, d), dtype=np.complex128)
    e1, f1 = excited_index(1), f_index(1)
    H[:, e1, f1] = o1
    H[:, f1, e1] = o1.conj()
    for k in range(1, n + 1):
        e = excited_index(k)
        if k >= 2:
            f = f_index(k)
            H[:, e, f] = os_
            H[:, f, e] = os_.conj()
        H[:, e, PHOTON] = cfg.lam
        H[:, PHOTON, e] = cfg.lam
        H[:, e, e] = detuning
    return H


def build_H0(cfg: SystemConfig, pulses: PulseSchedule, t: float) -> np.ndarray:
    """Resonant Hamiltonian; real drives only."""
    if cfg.detuning != 0:
        raise ValueError("build_H0 is the resonant model; use build_APF for detuning > 0")
    o1, os_ = pulses.sample(t)
    if np.any(np.imag(o1) != 0) or np.any(np.imag(os_) != 0):
        raise ValueError("resonant model takes real drive amplitudes")
    return hamiltonian_stack(cfg, o1, os_)[0]


def build_APF(cfg: SystemConfig, pulses: PulseSchedule, t: float) -> np.ndarray:
    """Detuned model: complex drives, ``cfg.detuning`` on every atomic-excited state."""
    if cfg.detuning < 0:
        raise ValueError("detuning must be non-negative")
    o1, os_ = pulses.sample(t)
    return hamiltonian_stack(cfg, o1, os_, cfg.detuning)[0]


def system_operator(cfg: SystemConfig, pulses: PulseSchedule) -> TimeDependentOperator:
    """Time-dependent full Hamiltonian (resonant when ``cfg.detuning == 0``)."""
    if cfg.detuning == 0 and not pulses.is_real:
        raise ValueError("resonant model takes real drive amplitudes")

    def stack(times):
        o1, os_ = pulses.sample(times)
        o1 = np.broadcast_to(o1, np.shape(times))
        os_ = np.broadcast_to(os_, np.shape(times))
        return hamiltonian_stack(cfg, o1, os_, cfg.detuning)

    return TimeDependentOperator(lambda t: stack(np.atleast_1d(float(t)))[0], cfg.dim, stack)


def rotated_basis(n_atoms: int = 3) -> np.ndarray:
    """Columns: psi1, psi2, psi3, mu+, psi5, mu-, psi7, ground (three atoms only)."""
    if n_atoms != 3:
        raise ValueError("the mu+/mu- rotation is defined for three atoms")
    d = 8
    U = np.eye(d, dtype=np.complex128)
    s = 1 / math.sqrt(2)
    U[:, 3] = 0
    U[:, 5] = 0
    U[3, 3], U[5, 3] = s, s
    U[3, 5], U[5, 5] = s, -s
    return U


def build_rotated(omega1, omega_s, lam: float = 1.0, delta: float = 0.0) -> np.ndarray:
    """Three-atom Hamiltonian written directly in the rotated basis of :func:`rotated_basis`."""
    P1, P2, P3, MP, P5, MM, P7 = range(7)
    H = np.zeros((8, 8), dtype=np.complex128)
    s = 1 / math.sqrt(2)

    def add(i, j, v):
        H[i, j] += v
        H[j, i] += np.conj(v)

    add(P2, P1, omega1)
    add(MP, P5, omega_s * s)
    add(MP, P7, omega_s * s)
    add(MM, P5, omega_s * s)
    add(MM, P7, -omega_s * s)
    add(P2, P3, lam)
    add(MP, P3, math.sqrt(2) * lam)
    for i in (P2, MP, MM):
        H[i, i] = delta
    return H


def zeno_frame(n_atoms: int = 3) -> np.ndarray:
    """(d, 3) matrix with columns psi1, zeta, phi1 in the full basis."""
    v = zeno_basis_states(n_atoms)
    return np.stack([v["psi1"], v["zeta"], v["phi1"]], axis=1)


def zeno_basis_states(n_atoms: int = 3) -> dict[str, np.ndarray]:
    """Named vectors of the Zeno analysis, expressed in the canonical basis.

    ``mu_plus``/``zeta`` are the symmetric excited/f combinations over atoms
    2..N; ``phi1`` (0), ``phi2`` (+sqrt(N) lam) and ``phi3`` (-sqrt(N) lam) are
    eigenvectors of the cavity coupling inside span{e1, photon, mu+}.
    """
    n = n_atoms
    d = 2 * n + 2
    r = math.sqrt(n - 1)
    e1, f1 = np.zeros(d, complex), np.zeros(d, complex)
    e1[excited_index(1)] = 1
    f1[f_index(1)] = 1
    ph = np.zeros(d, complex)
    ph[PHOTON] = 1
    mu_p, zeta = np.zeros(d, complex), np.zeros(d, complex)
    for k in range(2, n + 1):
        mu_p[excited_index(k)] = 1 / r
        zeta[f_index(k)] = 1 / r
    out = {
        "psi1": f1,
        "zeta": zeta,
        "mu_plus": mu_p,
        "phi1": (-r * e1 + mu_p) / math.sqrt(n),
        "phi2": (e1 + math.sqrt(n) * ph + r * mu_p) / math.sqrt(2 * n),
        "phi3": (e1 - math.sqrt(n) * ph + r * mu_p) / math.sqrt(2 * n),
    }
    if n >= 3:
        mm = np.zeros(d, complex)
        mm[excited_index(2)], mm[excited_index(3)] = 1 / math.sqrt(2), -1 / math.sqrt(2)
        out["mu_minus"] = mm
    return out


def symmetric_projector(n_atoms: int) -> np.ndarray:
    """Projector onto the states reachable from psi1 (plus the ground state)."""
    v = zeno_basis_states(n_atoms)
    d = 2 * n_atoms + 2
    g = np.zeros(d, complex)
    g[ground_index(n_atoms)] = 1
    e1 = np.zeros(d, complex)
    e1[excited_index(1)] = 1
    ph = np.zeros(d, complex)
    ph[PHOTON] = 1
    B = np.stack([v["psi1"], e1, ph, v["mu_plus"], v["zeta"], g], axis=1)
    return B @ B.conj().T


def _check_hermitian(A: np.ndarray, name: str, tol: float = 1e-10) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.conj().T)) > tol * scale:
        raise ValueError(f"{name} is not Hermitian")


def zeno_effective(H_obs: np.ndarray, H_meas: np.ndarray, K: float, rel_tol: float = 1e-8):
    """Strong-measurement limit ``sum_n (K xi_n P_n + P_n H_obs P_n)``.

    Eigenvalues of ``H_meas`` closer than ``rel_tol * ||H_meas||`` are grouped
    into one projector. Returns ``(ZenoDecomposition, H_Z)``.
    """
    H_obs = np.asarray(H_obs, dtype=np.complex128)
    H_meas = np.asarray(H_meas, dtype=np.complex128)
    if H_obs.shape != H_meas.shape:
        raise ValueError("H_obs and H_meas must have the same shape")
    _check_hermitian(H_obs, "H_obs")
    _check_hermitian(H_meas, "H_meas")
    if not K > 0:
        raise ValueError("coupling K must be positive")
    vals, vecs = np.linalg.eigh(H_meas)
    tol = rel_tol * max(np.linalg.norm(H_meas, 2), 1e-300)
    groups: list[list[int]] = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    projectors, xis = [], []
    H_Z = np.zeros_like(H_obs)
    for g in groups:
        V = vecs[:, g]
        P = V @ V.conj().T
        xi = float(np.mean(vals[g]))
        projectors.append(P)
        xis.append(xi)
        H_Z += K * xi * P + P @ H_obs @ P
    return ZenoDecomposition(projectors, xis, K), H_Z


def hz_stack(omega1, omega_s, delta: float = 0.0, n_atoms: int = 3) -> np.ndarray:
    """Vectorized :func:`build_HZ`: drive arrays of length T -> (T, 3, 3)."""
    o1 = np.atleast_1d(np.asarray(omega1, dtype=np.complex128))
    os_ = np.atleast_1d(np.asarray(omega_s, dtype=np.complex128))
    o1, os_ = np.broadcast_arrays(o1, os_)
    r = math.sqrt(n_atoms - 1)
    H = np.zeros((o1.shape[0], 3, 3), dtype=np.complex128)
    H[:, 2, 0] = -r * o1 / math.sqrt(n_atoms)
    H[:, 2, 1] = os_ / math.sqrt(n_atoms)
    H[:, 0, 2] = H[:, 2, 0].conj()
    H[:, 1, 2] = H[:, 2, 1].conj()
    H[:, 2, 2] = delta
    return H


def build_HZ(omega1, omega_s, delta: float = 0.0, n_atoms: int = 3) -> np.ndarray:
    """Zeno-subspace Hamiltonian on ``{psi1, zeta, phi1}``, with ``delta`` on phi1."""
    return hz_stack(omega1, omega_s, delta, n_atoms)[0]


def heff_stack(omega1, omega_s, delta: float, n_atoms: int = 3) -> np.ndarray:
    """Vectorized :func:`build_Heff`: drive arrays of length T -> (T, 2, 2)."""
    if not delta > 0:
        raise ValueError("adiabatic elimination needs delta > 0")
    o1 = np.atleast_1d(np.asarray(omega1, dtype=np.complex128))
    os_ = np.atleast_1d(np.asarray(omega_s, dtype=np.complex128))
    o1, os_ = np.broadcast_arrays(o1, os_)
    n = n_atoms
    H = np.zeros((o1.shape[0], 2, 2), dtype=np.complex128)
    H[:, 0, 0] = -(n - 1) * np.abs(o1) ** 2 / (n * delta)
    H[:, 1, 1] = -np.abs(os_) ** 2 / (n * delta)
    H[:, 1, 0] = math.sqrt(n - 1) * o1 * os_.conj() / (n * delta)
    H[:, 0, 1] = H[:, 1, 0].conj()
    return H


def build_Heff(omega1, omega_s, delta: float, n_atoms: int = 3) -> np.ndarray:
    """phi1 adiabatically eliminated: 2x2 on ``{psi1, zeta}``."""
    return heff_stack(omega1, omega_s, delta, n_atoms)[0]


def build_HCDD(theta_dot: float) -> np.ndarray:
    """Counter-diabatic term ``i theta_dot |zeta><psi1| + h.c.`` on ``{psi1, zeta}``.

    This sign is what ``i sum_m |d_t n_m><n_m|`` gives for the eigenvectors
    ``cos(theta) psi1 + sin(theta) zeta`` of the Zeno Hamiltonian.
    """
    H = np.zeros((2, 2), dtype=np.complex128)
    H[1, 0] = 1j * theta_dot
    H[0, 1] = -1j * theta_dot
    return H


def gauge_fixed_eigh(H: np.ndarray, pivots: np.ndarray | None = None):
    """eigh with each eigenvector's pivot component made real and positive.

    ``pivots`` defaults to each vector's largest-magnitude component; pass
    the center-point pivots to keep a consistent gauge across a stencil.
    """
    vals, vecs = np.linalg.eigh(H)
    if pivots is None:
        pivots = np.argmax(np.abs(vecs), axis=0)
    comp = vecs[pivots, np.arange(vecs.shape[1])]
    phase = np.where(np.abs(comp) > 0, comp / np.where(np.abs(comp) > 0, np.abs(comp), 1), 1)
    return vals, vecs / phase, pivots


def _min_gap(vals: np.ndarray) -> float:
    return float(np.min(np.diff(vals))) if len(vals) > 1 else np.inf


def eigensystem_derivative(H, t: float, dt: float = 1e-4, gap_tol: float = 1e-8):
    """Eigenvalues, gauge-fixed eigenvectors and their central-difference derivatives at ``t``."""
    evaluate = H.evaluate if isinstance(H, TimeDependentOperator) else H
    Hc = np.asarray(evaluate(t))
    scale = max(1.0, float(np.linalg.norm(Hc, 2)))
    vals, vecs, piv = gauge_fixed_eigh(Hc)
    vm, Vm, _ = gauge_fixed_eigh(np.asarray(evaluate(t - dt)), piv)
    vp, Vp, _ = gauge_fixed_eigh(np.asarray(evaluate(t + dt)), piv)
    for v in (vals, vm, vp):
        if _min_gap(v) < gap_tol * scale:
            raise EigenvalueCrossingError(
                f"eigenvalue gap {_min_gap(v):.3e} below {gap_tol * scale:.1e} near t = {t}"
            )
    # each neighbour vector must be the continuation of the center vector
    for V in (Vm, Vp):
        ov = np.abs(np.sum(V.conj() * vecs, axis=0))
        if np.any(ov < 0.5):
            raise EigenvalueCrossingError(f"eigenvector ordering changed across the stencil at t = {t}")
    dV = (Vp - Vm) / (2 * dt)
    return vals, vecs, dV


def numeric_cdd(H, t: float, dt: float = 1e-4, gap_tol: float = 1e-8) -> np.ndarray:
    """Transitionless-driving term ``i sum_m |d_t Psi_m><Psi_m|`` without the Berry diagonals."""
    _, V, dV = eigensystem_derivative(H, t, dt, gap_tol)
    A = 1j * dV @ V.conj().T
    berry = np.sum(V.conj() * dV, axis=0)
    A -= 1j * (V * berry) @ V.conj().T
    return 0.5 * (A + A.conj().T)
