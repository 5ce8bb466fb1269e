"""Fixed-step RK4 propagation of pure states and density matrices.

The Hamiltonian is sampled once per run at every step and half-step, then
handed to the active kernel (compiled when built, numpy otherwise). A run
whose conservation monitors exceed tolerance is retried with the step
count doubled, up to ``max_doublings`` times.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .backend import get_kernel
from .core import SystemConfig, excited_index, f_index, ground_index, PHOTON, projector
from .hamiltonians import TimeDependentOperator

log = logging.getLogger(__name__)

DEFAULT_STEPS = 4000
NORM_TOL = 1e-8
TRACE_TOL = 1e-7
POSITIVITY_TOL = 1e-6
HERMITICITY_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Conservation monitors still out of tolerance after step refinement."""


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.n_steps * factor)


@dataclass(frozen=True)
class LindbladSet:
    operators: list

    def sparse(self):
        """COO arrays (rows, cols, vals, ptr) plus ``D = sum L^dag L``."""
        rows, cols, vals, ptr = [], [], [], [0]
        d = self.operators[0].shape[0] if self.operators else 0
        D = np.zeros((d, d), dtype=np.complex128)
        for L in self.operators:
            r, c = np.nonzero(L)
            rows.extend(r)
            cols.extend(c)
            vals.extend(L[r, c])
            ptr.append(len(rows))
            D += L.conj().T @ L
        return (
            np.asarray(rows, dtype=np.intp),
            np.asarray(cols, dtype=np.intp),
            np.asarray(vals, dtype=np.complex128),
            np.asarray(ptr, dtype=np.intp),
            D,
        )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, d) pure or (T, d, d) mixed
    monitors: dict = field(default_factory=dict)

    @property
    def is_pure(self) -> bool:
        return self.states.ndim == 2

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def overlap(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.complex128)
        if self.is_pure:
            return np.abs(self.states @ vec.conj()) ** 2
        return np.abs(np.einsum("i,tij,j->t", vec.conj(), self.states, vec))

    def population(self, index: int) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.states[:, index]) ** 2
        return np.abs(self.states[:, index, index])

    def to_csv(self, path, observables: dict) -> None:
        """Write ``t`` plus one column per observable (name -> curve), in the given order."""
        names = list(observables)
        io.write_columns(path, ["t", *names], [self.times, *(observables[n] for n in names)])


def _pure_monitors(states: np.ndarray) -> dict:
    if not np.all(np.isfinite(states)):
        return {"norm_drift": math.inf}
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(states, axis=1)
    return {"norm_drift": float(np.max(np.abs(norms - 1.0)))}


def _mixed_monitors(states: np.ndarray) -> dict:
    if not np.all(np.isfinite(states)):
        return {"trace_drift": math.inf, "hermiticity": math.inf, "min_eigenvalue": -math.inf}
    tr = np.real(np.trace(states, axis1=1, axis2=2))
    herm = np.max(np.abs(states - states.conj().transpose(0, 2, 1)))
    herm_part = 0.5 * (states + states.conj().transpose(0, 2, 1))
    lo = np.linalg.eigvalsh(herm_part).min()
    return {
        "trace_drift": float(np.max(np.abs(tr - 1.0))),
        "hermiticity": float(herm),
        "min_eigenvalue": float(lo),
    }


def _half_step_times(grid: TimeGrid) -> np.ndarray:
    return np.linspace(grid.t_start, grid.t_end, 2 * grid.n_steps + 1)


def evolve_schrodinger(H: TimeDependentOperator, psi0, grid: TimeGrid, *,
                       refine: bool = True, max_doublings: int = 3,
                       norm_tol: float = NORM_TOL, kernel: str | None = None) -> Trajectory:
    """Integrate ``psi' = -i H(t) psi``; states are reported on ``grid.times``."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    k = get_kernel(kernel)
    for level in range(max_doublings + 1 if refine else 1):
        factor = 2**level
        g = grid.refined(factor)
        Hs = np.ascontiguousarray(H.sample(_half_step_times(g)), dtype=np.complex128)
        states = k.rk4_unitary(Hs, psi0, g.h, g.n_steps, factor)
        mon = _pure_monitors(states)
        mon.update(n_steps=g.n_steps, refinements=level)
        if mon["norm_drift"] <= norm_tol:
            return Trajectory(grid.times, states, mon)
        log.debug("norm drift %.2e with %d steps; refining", mon["norm_drift"], g.n_steps)
    if not refine:
        return Trajectory(grid.times, states, mon)
    raise IntegrationError(
        f"norm drift {mon['norm_drift']:.3e} exceeds {norm_tol:.1e} after {max_doublings} step doublings"
    )


def evolve_lindblad(H: TimeDependentOperator, L: LindbladSet, rho0, grid: TimeGrid, *,
                    refine: bool = True, max_doublings: int = 3,
                    trace_tol: float = TRACE_TOL, positivity_tol: float = POSITIVITY_TOL,
                    kernel: str | None = None) -> Trajectory:
    """Integrate ``rho' = i[rho, H] + sum_k (L rho L^dag - {L^dag L, rho}/2)``."""
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.ndim == 1:
        rho0 = projector(rho0)
    if abs(np.trace(rho0).real - 1.0) > 1e-9 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-9:
        raise ValueError("initial density matrix must be Hermitian with unit trace")
    rows, cols, vals, ptr, D = L.sparse()
    if D.size == 0:
        D = np.zeros_like(rho0)
    k = get_kernel(kernel)
    for level in range(max_doublings + 1 if refine else 1):
        factor = 2**level
        g = grid.refined(factor)
        Hs = np.ascontiguousarray(H.sample(_half_step_times(g)), dtype=np.complex128)
        states = k.rk4_lindblad(Hs, D, rows, cols, vals, ptr, rho0, g.h, g.n_steps, factor)
        mon = _mixed_monitors(states)
        mon.update(n_steps=g.n_steps, refinements=level)
        ok = (mon["trace_drift"] <= trace_tol and mon["min_eigenvalue"] >= -positivity_tol
              and mon["hermiticity"] <= HERMITICITY_TOL)
        if ok:
            return Trajectory(grid.times, states, mon)
        log.debug("trace drift %.2e, min eigenvalue %.2e; refining", mon["trace_drift"], mon["min_eigenvalue"])
    if not refine:
        return Trajectory(grid.times, states, mon)
    raise IntegrationError(
        f"trace drift {mon['trace_drift']:.3e} / min eigenvalue {mon['min_eigenvalue']:.3e} / "
        f"hermiticity {mon['hermiticity']:.3e} out of tolerance after {max_doublings} step doublings"
    )


def lindblad_ops(cfg: SystemConfig, gamma: float, kappa: float) -> LindbladSet:
    """Spontaneous emission e->f and e->g on every atom (rate gamma/2 each) and cavity loss.

    Ordered as (e->f, e->g) for atoms 1..N, then the cavity operator: 2N+1 in total.
    """
    if gamma < 0 or kappa < 0:
        raise ValueError("decay rates must be non-negative")
    d, g0 = cfg.dim, ground_index(cfg.n_atoms)
    ops = []
    amp = np.sqrt(gamma / 2)
    for k in range(1, cfg.n_atoms + 1):
        e = excited_index(k)
        Lf = np.zeros((d, d), dtype=np.complex128)
        Lf[f_index(k), e] = amp
        Lg = np.zeros((d, d), dtype=np.complex128)
        Lg[g0, e] = amp
        ops += [Lf, Lg]
    La = np.zeros((d, d), dtype=np.complex128)
    La[g0, PHOTON] = np.sqrt(kappa)
    ops.append(La)
    return LindbladSet(ops)
