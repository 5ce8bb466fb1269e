"""Hilbert space of N Lambda-atoms in one cavity, restricted to the reachable states.

The initial state ``|f, g, ..., g>|0>`` couples only to the single-excitation
manifold; atomic decay into ``|g>`` and photon loss add one more state,
``|g, ..., g>|0>``, which no Hamiltonian term touches. For N atoms the space
has ``2N + 2`` states, ordered

    0: |f,g,...>|0>      atom 1 in f
    1: |e,g,...>|0>      atom 1 excited
    2: |g,g,...>|1>      one cavity photon
    3, 4: atom 2 excited, atom 2 in f
    ...
    2N-1, 2N: atom N excited, atom N in f
    2N+1: |g,...,g>|0>   absorbing ground state

For N = 3 indices 0..6 are the psi_1..psi_7 of the usual three-atom basis.
Units: hbar = 1 and the cavity coupling sets the frequency scale.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

STATE_TOL = 1e-9
POSITIVITY_TOL = 1e-8


class Kind(enum.Enum):
    FIRST_ATOM_F = "f1"
    ATOM_EXCITED = "e"
    PHOTON = "photon"
    ATOM_F = "f"
    ALL_GROUND = "ground"


@dataclass(frozen=True)
class SystemConfig:
    n_atoms: int = 3
    lam: float = 1.0
    detuning: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 2:
            raise ValueError(f"n_atoms must be an integer >= 2, got {self.n_atoms}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.detuning >= 0:
            raise ValueError(f"detuning must be >= 0, got {self.detuning}")

    @property
    def dim(self) -> int:
        return 2 * self.n_atoms + 2


@dataclass(frozen=True)
class BasisState:
    kind: Kind
    atom: int | None
    index: int

    @property
    def label(self) -> str:
        if self.kind is Kind.PHOTON:
            return "photon"
        if self.kind is Kind.ALL_GROUND:
            return "ground"
        if self.kind is Kind.ATOM_EXCITED:
            return f"e{self.atom}"
        return f"f{self.atom}"


def excited_index(k: int) -> int:
    """Index of the state with atom ``k`` (1-based) in ``|e>``."""
    return 1 if k == 1 else 3 + 2 * (k - 2)


def f_index(k: int) -> int:
    """Index of the state with atom ``k`` (1-based) in ``|f>``."""
    return 0 if k == 1 else 4 + 2 * (k - 2)


PHOTON = 2


def ground_index(n_atoms: int) -> int:
    return 2 * n_atoms + 1


def build_basis(cfg: SystemConfig) -> list[BasisState]:
    n = cfg.n_atoms
    states = [
        BasisState(Kind.FIRST_ATOM_F, 1, 0),
        BasisState(Kind.ATOM_EXCITED, 1, 1),
        BasisState(Kind.PHOTON, None, PHOTON),
    ]
    for k in range(2, n + 1):
        states.append(BasisState(Kind.ATOM_EXCITED, k, excited_index(k)))
        states.append(BasisState(Kind.ATOM_F, k, f_index(k)))
    states.append(BasisState(Kind.ALL_GROUND, None, ground_index(n)))
    return states


def index_of(cfg: SystemConfig, label: str) -> int:
    """Map a label (``"f1"``, ``"e2"``, ``"photon"``, ``"ground"``, ``"psi5"``) to its index."""
    if label.startswith("psi"):
        i = int(label[3:]) - 1
        if not 0 <= i < 2 * cfg.n_atoms + 1:
            raise IndexError(f"{label} out of range for {cfg.n_atoms} atoms")
        return i
    for b in build_basis(cfg):
        if b.label == label:
            return b.index
    raise KeyError(f"unknown basis label {label!r}")


def basis_vector(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def as_pure(psi, tol: float = STATE_TOL) -> np.ndarray:
    """Validate and return a normalized complex state vector."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim != 1:
        raise ValueError("pure state must be a vector")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state norm {norm} differs from 1")
    return psi


def as_density(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Validate and return a density matrix (Hermitian, unit trace, positive)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace {tr} differs from 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -POSITIVITY_TOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")
    return rho


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def w_state(cfg: SystemConfig) -> np.ndarray:
    """Equal superposition of 'atom k in |f>' over all N atoms."""
    n = cfg.n_atoms
    psi = np.zeros(cfg.dim, dtype=np.complex128)
    for k in range(1, n + 1):
        psi[f_index(k)] = 1.0 / np.sqrt(n)
    return psi


def fidelity(state, target) -> float:
    """Overlap of one state with a pure target.

    Vectors give ``|<target|psi>|^2``; density matrices give
    ``|<target|rho|target>|``, so both agree on ``rho = |psi><psi|``.
    """
    state = np.asarray(state)
    target = np.asarray(target, dtype=np.complex128)
    d = target.shape[0]
    if state.ndim == 1 and state.shape == (d,):
        return float(abs(np.vdot(target, state)) ** 2)
    if state.ndim == 2 and state.shape == (d, d):
        return float(abs(target.conj() @ state @ target))
    raise ValueError(f"dimension mismatch: state {state.shape}, target {target.shape}")


def population(state, index: int) -> float:
    state = np.asarray(state)
    d = state.shape[0]
    if not 0 <= index < d:
        raise IndexError(f"basis index {index} out of range for dimension {d}")
    if state.ndim == 1:
        return float(abs(state[index]) ** 2)
    return float(abs(state[index, index]))


def overlap_curve(states, vec) -> np.ndarray:
    """``|<vec|psi(t)>|^2`` (vector stack) or ``|<vec|rho(t)|vec>|`` (matrix stack)."""
    states = np.asarray(states)
    vec = np.asarray(vec, dtype=np.complex128)
    if states.shape[-1] != vec.shape[0]:
        raise ValueError(f"dimension mismatch: states {states.shape}, vector {vec.shape}")
    if states.ndim == 2:
        return np.abs(states @ vec.conj()) ** 2
    if states.ndim == 3:
        return np.abs(np.einsum("i,tij,j->t", vec.conj(), states, vec))
    raise ValueError(f"expected a stack of states, got shape {states.shape}")


def population_curve(states, index: int) -> np.ndarray:
    states = np.asarray(states)
    if not 0 <= index < states.shape[-1]:
        raise IndexError(f"basis index {index} out of range")
    if states.ndim == 2:
        return np.abs(states[:, index]) ** 2
    return np.abs(states[:, index, index])


def dark_state(omega1: float, omega_s: float, lam: float, n_atoms: int = 3) -> np.ndarray:
    """Zero-energy eigenvector of the resonant Hamiltonian with no atomic excitation.

    Proportional to ``psi1/omega1 + sum_k psik/omega_s - photon/lam``. Each
    term is scaled by the smallest nonzero amplitude so every component is
    at most one, and a vanishing drive selects its own term exactly.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if omega1 == 0 and omega_s == 0:
        raise ValueError("dark state undefined when both drives vanish")
    cfg = SystemConfig(n_atoms=n_atoms, lam=lam)
    psi = np.zeros(cfg.dim, dtype=np.complex128)
    if omega1 == 0 or omega_s == 0:
        if omega1 == 0:
            psi[f_index(1)] = 1.0
        else:
            psi[[f_index(k) for k in range(2, n_atoms + 1)]] = 1.0
    else:
        s = min(abs(omega1), abs(omega_s), lam)
        psi[f_index(1)] = s / omega1
        for k in range(2, n_atoms + 1):
            psi[f_index(k)] = s / omega_s
        psi[PHOTON] = -s / lam
    return psi / np.linalg.norm(psi)
