"""Drive schedules: STIRAP Gaussians, constant Zeno drives, and the shortcut pulse.

All schedules are vectorized: ``omega1(t)`` and ``omega_s(t)`` accept scalars
or arrays. Times are in units of 1/lambda, amplitudes in units of lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import io

# Phase of the first-atom drive in the shortcut scheme. With rho' = i[rho, H]
# the adiabatically eliminated coupling equals the counter-diabatic term
# i*theta_dot|zeta><psi1| + h.c. only for a +i phase.
DRIVE_PHASE = 1j

SIGN_TOL = 1e-10


class PulseSignError(ValueError):
    """theta_dot went negative, so the shortcut amplitude sqrt(N*Delta*theta_dot) is imaginary."""


@dataclass(frozen=True)
class PulseSchedule:
    omega1: Callable
    omega_s: Callable
    tf: float
    label: str
    d_omega1: Callable | None = None
    d_omega_s: Callable | None = None
    params: dict = field(default_factory=dict)

    def sample(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.omega1(t)), np.asarray(self.omega_s(t))

    @property
    def is_real(self) -> bool:
        """True when both drives sample to real values across the pulse window."""
        return all(not np.iscomplexobj(x) or not np.any(x.imag) for x in self.sample(np.linspace(0, self.tf, 9)))

    def to_csv(self, path, times) -> None:
        times = np.asarray(times, dtype=float)
        o1, os_ = self.sample(times)
        o1 = np.broadcast_to(o1, times.shape).astype(complex)
        os_ = np.broadcast_to(os_, times.shape).astype(complex)
        io.write_columns(
            path,
            ["t", "re_omega1", "im_omega1", "re_omega_s", "im_omega_s"],
            [times, o1.real, o1.imag, os_.real, os_.imag],
        )


@dataclass(frozen=True)
class StirapParams:
    omega0: float = 1.0
    tf: float = 80.0
    t0: float | None = None
    tc: float | None = None
    alpha: float = math.pi / 4

    def __post_init__(self):
        if self.t0 is None:
            object.__setattr__(self, "t0", 0.15 * self.tf)
        if self.tc is None:
            object.__setattr__(self, "tc", 0.2 * self.tf)
        if not self.tf > 0:
            raise ValueError(f"tf must be positive, got {self.tf}")
        if not self.tc > 0:
            raise ValueError(f"tc must be positive, got {self.tc}")
        if not 0 < self.t0 < self.tf:
            raise ValueError(f"t0 must lie in (0, tf), got {self.t0}")


@dataclass(frozen=True)
class ShortcutParams:
    delta: float = 3.0
    tf: float = 35.0
    correction: float = 1.04
    n_atoms: int = 3
    amplitude_scale: float = 1.0  # multiplies the whole shortcut amplitude (the nu scale)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.tf > 0:
            raise ValueError(f"tf must be positive, got {self.tf}")
        if not self.correction > 0:
            raise ValueError(f"correction must be positive, got {self.correction}")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 2:
            raise ValueError(f"n_atoms must be an integer >= 2, got {self.n_atoms}")
        if not self.amplitude_scale > 0:
            raise ValueError("amplitude_scale must be positive")


def stirap_schedule(p: StirapParams) -> PulseSchedule:
    """Counter-intuitive Gaussian pair: Omega_s leads, Omega_1 follows."""
    s, c = math.sin(p.alpha), math.cos(p.alpha)
    a0, t0, tc, tf = p.omega0, p.t0, p.tc, p.tf

    def y1(t):
        return (t - t0 - tf / 2) / tc

    def y2(t):
        return (t + t0 - tf / 2) / tc

    def omega1(t):
        return s * a0 * np.exp(-y1(t) ** 2)

    def omega_s(t):
        return a0 * np.exp(-y2(t) ** 2) + c * a0 * np.exp(-y1(t) ** 2)

    def d_omega1(t):
        return -2.0 * y1(t) / tc * s * a0 * np.exp(-y1(t) ** 2)

    def d_omega_s(t):
        return -2.0 / tc * a0 * (y2(t) * np.exp(-y2(t) ** 2) + c * y1(t) * np.exp(-y1(t) ** 2))

    return PulseSchedule(
        omega1, omega_s, tf, "stirap", d_omega1, d_omega_s,
        params={"omega0": a0, "t0": t0, "tc": tc, "alpha": p.alpha},
    )


def zeno_beta(omega1, omega_s) -> float:
    return math.sqrt((2 * omega1**2 + omega_s**2) / 3)


def zeno_schedule(omega1: float, branch: str = "+") -> PulseSchedule:
    """Constant drives with ``omega_s = (1 +/- sqrt 3) omega1`` and ``tf = pi / beta``."""
    if branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")
    if omega1 == 0:
        raise ValueError("Zeno drive amplitude must be nonzero")
    if branch == "+" and omega1 < 0:
        raise ValueError("the + branch needs omega1 > 0")
    sign = 1.0 if branch == "+" else -1.0
    os_ = (1 + sign * math.sqrt(3)) * omega1
    beta = zeno_beta(omega1, os_)
    tf = math.pi / beta

    def const(value):
        return lambda t: np.full(np.shape(t), value, dtype=float)[()]

    zero = const(0.0)
    return PulseSchedule(
        const(float(omega1)), const(float(os_)), tf, "zeno", zero, zero,
        params={"omega1": omega1, "omega_s": os_, "beta": beta, "branch": branch},
    )


def theta(schedule: PulseSchedule, t, n_atoms: int = 3):
    """Mixing angle of the zero-energy Zeno eigenvector, arctan(sqrt(N-1) Omega_1 / Omega_s)."""
    o1, os_ = schedule.sample(t)
    o1, os_ = np.real(o1), np.real(os_)
    if np.any((o1 == 0) & (os_ == 0)):
        raise ValueError("theta undefined where both pulses vanish")
    return np.arctan2(math.sqrt(n_atoms - 1) * o1, os_)[()]


def theta_dot(schedule: PulseSchedule, t, n_atoms: int = 3):
    if schedule.d_omega1 is None or schedule.d_omega_s is None:
        raise ValueError(f"schedule {schedule.label!r} has no analytic derivatives")
    t = np.asarray(t, dtype=float)
    o1, os_ = np.real(schedule.omega1(t)), np.real(schedule.omega_s(t))
    d1, ds = np.real(schedule.d_omega1(t)), np.real(schedule.d_omega_s(t))
    r = math.sqrt(n_atoms - 1)
    den = os_**2 + r**2 * o1**2
    if np.any(den == 0):
        raise ValueError("theta_dot undefined where both pulses vanish")
    return (r * (d1 * os_ - o1 * ds) / den)[()]


def shortcut_nu(delta: float, tf: float) -> float:
    """Dominant amplitude scale sqrt(6 sqrt2 Delta / tf) of the shortcut pulse."""
    return math.sqrt(6 * math.sqrt(2) * delta / tf)


def shortcut_schedule(p: ShortcutParams, base: StirapParams | None = None,
                      check_until: float | None = None) -> PulseSchedule:
    """Engineered pulse ``Omega_x = sqrt(N Delta theta_dot)`` from a STIRAP shape.

    ``Omega_s = Omega_x`` on atoms 2..N and ``Omega_1 = i * correction *
    Omega_x / sqrt(N - 1)``. theta_dot is checked for sign on a dense grid over
    ``[0, max(tf, check_until)]``; a negative value raises PulseSignError.
    """
    if base is None:
        base = StirapParams(tf=p.tf)
    if not math.isclose(base.tf, p.tf):
        raise ValueError(f"base STIRAP tf={base.tf} differs from shortcut tf={p.tf}")
    stirap = stirap_schedule(base)
    n = p.n_atoms
    t_end = max(p.tf, check_until or 0.0)
    grid = np.linspace(0.0, t_end, 4001)
    td = theta_dot(stirap, grid, n)
    if td.min() < -SIGN_TOL:
        bad = grid[np.argmin(td)]
        raise PulseSignError(f"theta_dot = {td.min():.3e} < 0 at t = {bad:.4g}")

    def omega_x(t):
        td = np.asarray(theta_dot(stirap, t, n))
        if np.any(td < -SIGN_TOL):
            raise PulseSignError(f"theta_dot = {td.min():.3e} < 0")
        return (p.amplitude_scale * np.sqrt(n * p.delta * np.maximum(td, 0.0)))[()]

    def omega1(t):
        return DRIVE_PHASE * p.correction * omega_x(t) / math.sqrt(n - 1)

    nu = shortcut_nu(p.delta, p.tf)
    return PulseSchedule(
        omega1, omega_x, p.tf, "shortcut",
        params={
            "delta": p.delta, "correction": p.correction, "n_atoms": n,
            "amplitude_scale": p.amplitude_scale, "nu": nu,
            "omega_x": omega_x, "stirap": stirap,
        },
    )


def shortcut_G(schedule: PulseSchedule, t):
    """Dimensionless shape ``G = Omega_x / nu`` of a shortcut schedule."""
    p = schedule.params
    ox = np.asarray(p["omega_x"](t)) / p["amplitude_scale"]
    return (ox / p["nu"])[()]
