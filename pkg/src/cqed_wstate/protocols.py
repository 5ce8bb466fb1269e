"""The three W-state protocols, the effective-model chain and a job runner for sweeps.

Every protocol starts from ``|f, g, ..., g>|0>`` and integrates the full
Hamiltonian; reduced models only appear in :func:`effective_model_chain` and
as diagnostics.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .core import PHOTON, SystemConfig, basis_vector, dark_state, f_index, fidelity, w_state
from .dynamics import (
    DEFAULT_STEPS,
    TimeGrid,
    Trajectory,
    evolve_lindblad,
    evolve_schrodinger,
    lindblad_ops,
)
from .hamiltonians import (
    TimeDependentOperator,
    eigensystem_derivative,
    heff_stack,
    hz_stack,
    symmetric_projector,
    system_operator,
    zeno_basis_states,
)
from .pulses import (
    PulseSchedule,
    ShortcutParams,
    StirapParams,
    shortcut_nu,
    shortcut_schedule,
    stirap_schedule,
    zeno_schedule,
)

ZENO_WARN_OMEGA = 0.1


@dataclass
class ProtocolResult:
    protocol: str
    final_fidelity: float
    trajectory: Trajectory
    fidelity_curve: np.ndarray
    populations: dict
    diagnostics: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)  # model populations to compare against

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "final_fidelity": self.final_fidelity,
            "params": self.params,
            "diagnostics": self.diagnostics,
            "monitors": self.trajectory.monitors,
        }

    def write(self, out_dir, trajectory_name: str = "trajectory.csv") -> Path:
        """Write ``result.json`` and the trajectory CSV into ``out_dir``."""
        out_dir = Path(out_dir)
        obs = {"fidelity": self.fidelity_curve, **self.populations}
        self.trajectory.to_csv(out_dir / trajectory_name, obs)
        doc = self.summary()
        doc["trajectory_csv"] = trajectory_name
        return io.write_json(out_dir / "result.json", doc)


def _psi_name(index: int) -> str:
    return f"psi{index + 1}"


def tracked_states(cfg: SystemConfig) -> dict[str, np.ndarray]:
    """psi1, the photon state and every 'atom k in f' state, named by canonical index, plus phi1."""
    d = cfg.dim
    names = {_psi_name(f_index(1)): basis_vector(d, f_index(1)),
             _psi_name(PHOTON): basis_vector(d, PHOTON)}
    for k in range(2, cfg.n_atoms + 1):
        names[_psi_name(f_index(k))] = basis_vector(d, f_index(k))
    names["phi1"] = zeno_basis_states(cfg.n_atoms)["phi1"]
    return dict(sorted(names.items(), key=lambda kv: (kv[0] == "phi1", len(kv[0]), kv[0])))


def _leakage(cfg: SystemConfig, traj: Trajectory) -> dict:
    """Population outside the psi1-reachable subspace, and on mu- for N >= 3."""
    P = symmetric_projector(cfg.n_atoms)
    Q = np.eye(cfg.dim) - P
    if traj.is_pure:
        out_sym = np.real(np.einsum("ti,ij,tj->t", traj.states.conj(), Q, traj.states))
    else:
        out_sym = np.real(np.einsum("ij,tji->t", Q, traj.states))
    diag = {"antisymmetric_leakage": float(np.max(np.abs(out_sym)))}
    mm = zeno_basis_states(cfg.n_atoms).get("mu_minus")
    if mm is not None:
        diag["max_mu_minus"] = float(np.max(traj.overlap(mm)))
    return diag


def _evolve(cfg, H, grid, gamma, kappa, kernel=None) -> Trajectory:
    psi0 = basis_vector(cfg.dim, f_index(1))
    if gamma > 0 or kappa > 0:
        return evolve_lindblad(H, lindblad_ops(cfg, gamma, kappa), psi0, grid, kernel=kernel)
    return evolve_schrodinger(H, psi0, grid, kernel=kernel)


def _result(protocol, cfg, traj, params, diagnostics) -> ProtocolResult:
    target = w_state(cfg)
    fid = traj.overlap(target)
    pops = {name: traj.overlap(v) for name, v in tracked_states(cfg).items()}
    diagnostics = {**diagnostics, **_leakage(cfg, traj)}
    return ProtocolResult(protocol, float(fid[-1]), traj, fid, pops, diagnostics, params)


def run_adiabatic(cfg: SystemConfig | None = None, stirap: StirapParams | None = None,
                  grid: TimeGrid | None = None, *, gamma: float = 0.0, kappa: float = 0.0,
                  kernel: str | None = None) -> ProtocolResult:
    """STIRAP through the dark state, with the instantaneous dark-state populations as reference."""
    cfg = cfg or SystemConfig()
    stirap = stirap or StirapParams()
    if cfg.detuning != 0:
        raise ValueError("the adiabatic protocol uses the resonant model (detuning = 0)")
    grid = grid or TimeGrid(0.0, stirap.tf)
    sched = stirap_schedule(stirap)
    traj = _evolve(cfg, system_operator(cfg, sched), grid, gamma, kappa, kernel)
    res = _result("adiabatic", cfg, traj, {"omega0": stirap.omega0, "tf": stirap.tf,
                                           "n_atoms": cfg.n_atoms, "gamma": gamma, "kappa": kappa}, {})
    # the dark state depends only on the pulse ratio, so use the unit-amplitude shape
    shape = stirap_schedule(replace(stirap, omega0=1.0))
    o1, os_ = shape.sample(traj.times)
    dark = np.array([dark_state(a, b, cfg.lam, cfg.n_atoms) for a, b in zip(o1, os_)])
    dark_pops = {}
    for name in res.populations:
        if name == "phi1":
            continue
        idx = int(name[3:]) - 1
        dark_pops[name] = np.abs(dark[:, idx]) ** 2
    res.reference = dark_pops
    res.diagnostics["max_dark_deviation"] = {
        n: float(np.max(np.abs(res.populations[n] - dark_pops[n]))) for n in dark_pops
    }
    return res


def zeno_analytic(omega1: float, omega_s: float, t, n_atoms: int = 3) -> dict:
    """Closed-form amplitudes on psi1, phi1, zeta under the constant Zeno Hamiltonian."""
    t = np.asarray(t, dtype=float)
    a = math.sqrt(n_atoms - 1) * omega1 / math.sqrt(n_atoms)
    b = omega_s / math.sqrt(n_atoms)
    beta = math.hypot(a, b)
    c = np.cos(beta * t)
    s = np.sin(beta * t)
    return {
        "psi1": (b**2 + a**2 * c) / beta**2,
        "phi1": 1j * a * s / beta,
        "zeta": a * b * (1 - c) / beta**2,
        "beta": beta,
    }


def run_zeno(cfg: SystemConfig | None = None, omega1: float = 0.05, branch: str = "+",
             grid: TimeGrid | None = None, *, t_end: float | None = None,
             gamma: float = 0.0, kappa: float = 0.0, kernel: str | None = None) -> ProtocolResult:
    """Constant drives for ``tf = pi / beta`` (or ``t_end``) under the full resonant Hamiltonian."""
    cfg = cfg or SystemConfig()
    if cfg.detuning != 0:
        raise ValueError("the Zeno protocol uses the resonant model (detuning = 0)")
    if abs(omega1) > ZENO_WARN_OMEGA * cfg.lam:
        warnings.warn(f"omega1 = {omega1} is not small against the Zeno gap sqrt(3)*lambda", stacklevel=2)
    sched = zeno_schedule(omega1, branch)
    t_end = sched.tf if t_end is None else t_end
    grid = grid or TimeGrid(0.0, t_end)
    traj = _evolve(cfg, system_operator(cfg, sched), grid, gamma, kappa, kernel)
    os_ = sched.params["omega_s"]
    ana = zeno_analytic(omega1, os_, traj.times, cfg.n_atoms)
    n = cfg.n_atoms
    analytic = {"psi1": np.abs(ana["psi1"]) ** 2, "phi1": np.abs(ana["phi1"]) ** 2}
    for k in range(2, n + 1):
        analytic[_psi_name(f_index(k))] = np.abs(ana["zeta"]) ** 2 / (n - 1)
    res = _result("zeno", cfg, traj, {"omega1": omega1, "branch": branch, "tf": sched.tf,
                                      "t_end": t_end, "beta": sched.params["beta"],
                                      "n_atoms": n, "gamma": gamma, "kappa": kappa}, {})
    v = zeno_basis_states(n)
    res.reference = analytic
    res.diagnostics["analytic_max_deviation"] = float(
        max(np.max(np.abs(res.populations[k] - analytic[k])) for k in analytic)
    )
    w_red = np.array([1 / math.sqrt(n), math.sqrt((n - 1) / n)])
    amp = np.stack([ana["psi1"], ana["zeta"]], axis=-1)
    res.diagnostics["analytic_final_fidelity"] = float(np.abs(amp[-1] @ w_red) ** 2)
    res.diagnostics["max_zeno_leakage"] = float(np.max(traj.overlap(v["phi2"]) + traj.overlap(v["phi3"])))
    return res


def run_shortcut(cfg: SystemConfig | None = None, sp: ShortcutParams | None = None,
                 base: StirapParams | None = None, grid: TimeGrid | None = None, *,
                 t_end: float | None = None, gamma: float = 0.0, kappa: float = 0.0,
                 kernel: str | None = None) -> ProtocolResult:
    """Engineered detuned drives; the evolution runs to ``t_end`` (default ``sp.tf``)."""
    sp = sp or ShortcutParams()
    cfg = cfg or SystemConfig(n_atoms=sp.n_atoms, detuning=sp.delta)
    if cfg.detuning != sp.delta:
        raise ValueError(f"cfg.detuning ({cfg.detuning}) must equal the shortcut delta ({sp.delta})")
    if cfg.n_atoms != sp.n_atoms:
        raise ValueError(f"cfg.n_atoms ({cfg.n_atoms}) must equal sp.n_atoms ({sp.n_atoms})")
    t_end = sp.tf if t_end is None else t_end
    grid = grid or TimeGrid(0.0, t_end)
    sched = shortcut_schedule(sp, base, check_until=grid.t_end)
    traj = _evolve(cfg, system_operator(cfg, sched), grid, gamma, kappa, kernel)
    params = {"delta": sp.delta, "tf": sp.tf, "correction": sp.correction, "n_atoms": sp.n_atoms,
              "nu": sched.params["nu"] * sp.amplitude_scale, "T": grid.t_end,
              "gamma": gamma, "kappa": kappa}
    res = _result("shortcut", cfg, traj, params, {})
    res.diagnostics["max_phi1"] = float(np.max(res.populations["phi1"]))
    res.diagnostics["max_photon"] = float(np.max(res.populations[_psi_name(PHOTON)]))
    return res


def run_shortcut_n_atoms(cfg: SystemConfig, sp: ShortcutParams | None = None,
                         base: StirapParams | None = None, grid: TimeGrid | None = None,
                         **kwargs) -> ProtocolResult:
    """Shortcut protocol for N atoms; ``sp.n_atoms`` is taken from ``cfg``."""
    sp = sp or ShortcutParams(delta=cfg.detuning or 3.0)
    if sp.n_atoms != cfg.n_atoms:
        sp = ShortcutParams(sp.delta, sp.tf, sp.correction, cfg.n_atoms, sp.amplitude_scale)
    return run_shortcut(cfg, sp, base, grid, **kwargs)


@dataclass(frozen=True)
class ChainResult:
    full: float
    zeno: float
    effective: float


def _reduced_operator(stack_fn, sched: PulseSchedule, dim: int) -> TimeDependentOperator:
    def stack(times):
        o1, os_ = sched.sample(times)
        return stack_fn(o1, os_)

    return TimeDependentOperator(lambda t: stack(np.atleast_1d(float(t)))[0], dim, stack)


def effective_model_chain(sp: ShortcutParams | None = None, base: StirapParams | None = None,
                          grid: TimeGrid | None = None, lam: float = 1.0,
                          kernel: str | None = None) -> ChainResult:
    """Final W fidelities under the full, Zeno-projected (3-level) and eliminated (2-level) models."""
    sp = sp or ShortcutParams()
    n = sp.n_atoms
    grid = grid or TimeGrid(0.0, sp.tf)
    cfg = SystemConfig(n_atoms=n, lam=lam, detuning=sp.delta)
    full = run_shortcut(cfg, sp, base, grid, kernel=kernel).final_fidelity
    sched = shortcut_schedule(sp, base, check_until=grid.t_end)
    w3 = np.array([1 / math.sqrt(n), math.sqrt((n - 1) / n), 0.0], dtype=complex)
    hz = _reduced_operator(lambda a, b: hz_stack(a, b, sp.delta, n), sched, 3)
    zeno = evolve_schrodinger(hz, np.array([1, 0, 0], dtype=complex), grid, kernel=kernel)
    heff = _reduced_operator(lambda a, b: heff_stack(a, b, sp.delta, n), sched, 2)
    eff = evolve_schrodinger(heff, np.array([1, 0], dtype=complex), grid, kernel=kernel)
    return ChainResult(full, fidelity(zeno.final, w3), fidelity(eff.final, w3[:2]))


def adiabaticity_measure(cfg: SystemConfig | None, stirap, t: float, dt: float = 1e-4) -> float:
    """``max_n |<Psi_0|d_t Psi_n>| / |xi_n|`` over the bright eigenstates of the resonant Hamiltonian.

    ``stirap`` is a StirapParams or any real PulseSchedule. The eigenproblem
    is restricted to the states reachable from psi1, where the spectrum is
    nondegenerate; Psi_0 is the eigenvector with eigenvalue closest to zero.
    """
    cfg = cfg or SystemConfig()
    sched = stirap_schedule(stirap) if isinstance(stirap, StirapParams) else stirap
    H = system_operator(cfg, sched)
    v = zeno_basis_states(cfg.n_atoms)
    d = cfg.dim
    B = np.stack([v["psi1"], basis_vector(d, 1), basis_vector(d, PHOTON), v["mu_plus"], v["zeta"]], axis=1)
    sub = lambda s: B.conj().T @ H.evaluate(s) @ B  # noqa: E731
    vals, V, dV = eigensystem_derivative(sub, t, dt)
    i0 = int(np.argmin(np.abs(vals)))
    ratios = [abs(np.vdot(V[:, i0], dV[:, n])) / abs(vals[n]) for n in range(len(vals)) if n != i0]
    return float(max(ratios))


# --- job contract for sweeps -------------------------------------------------

PROTOCOLS = ("adiabatic", "zeno", "shortcut")

DEFAULTS = {
    "adiabatic": {"omega0": 1.0, "tf": 80.0, "n_atoms": 3, "gamma": 0.0, "kappa": 0.0, "T": None},
    "zeno": {"omega1": 0.05, "branch": "+", "tf": None, "n_atoms": 3, "gamma": 0.0, "kappa": 0.0},
    "shortcut": {"delta": 3.0, "tf": 35.0, "correction": 1.04, "nu": None, "T": None,
                 "n_atoms": 3, "gamma": 0.0, "kappa": 0.0},
}

# parameters a sweep axis or robustness scan may vary
SWEEPABLE = {
    "adiabatic": ("omega0", "tf", "gamma", "kappa", "T"),
    "zeno": ("omega1", "tf", "gamma", "kappa"),
    "shortcut": ("delta", "tf", "correction", "nu", "T", "gamma", "kappa"),
}


def job_params(protocol: str, overrides: dict | None = None) -> dict:
    """Defaults for ``protocol`` merged with ``overrides``; unknown keys raise KeyError."""
    if protocol not in DEFAULTS:
        raise KeyError(f"unknown protocol {protocol!r}")
    params = dict(DEFAULTS[protocol])
    for k, v in (overrides or {}).items():
        if k not in params:
            raise KeyError(f"parameter {k!r} is not valid for protocol {protocol!r}")
        params[k] = v
    return params


def nominal_value(protocol: str, name: str, params: dict) -> float:
    """The value a parameter takes when left at its default (resolving derived defaults)."""
    v = params.get(name)
    if v is not None:
        return float(v)
    if protocol == "zeno" and name == "tf":
        return zeno_schedule(params["omega1"], params["branch"]).tf
    if name == "T":
        return float(params["tf"])
    if protocol == "shortcut" and name == "nu":
        return shortcut_nu(params["delta"], params["tf"])
    raise KeyError(f"{name!r} has no nominal value for {protocol!r}")


def run_job(job: dict, n_steps: int = DEFAULT_STEPS, kernel: str | None = None) -> ProtocolResult:
    """Run one protocol from a flat parameter dict (``{"protocol": ..., **params}``)."""
    job = dict(job)
    protocol = job.pop("protocol")
    p = job_params(protocol, job)
    n = int(p["n_atoms"])
    rates = {"gamma": float(p["gamma"]), "kappa": float(p["kappa"])}
    if protocol == "adiabatic":
        st = StirapParams(omega0=float(p["omega0"]), tf=float(p["tf"]))
        T = nominal_value(protocol, "T", p)
        return run_adiabatic(SystemConfig(n_atoms=n), st, TimeGrid(0.0, T, n_steps), kernel=kernel, **rates)
    if protocol == "zeno":
        T = nominal_value(protocol, "tf", p)
        return run_zeno(SystemConfig(n_atoms=n), float(p["omega1"]), p["branch"],
                        TimeGrid(0.0, T, n_steps), t_end=T, kernel=kernel, **rates)
    delta, tf = float(p["delta"]), float(p["tf"])
    scale = nominal_value(protocol, "nu", p) / shortcut_nu(delta, tf)
    sp = ShortcutParams(delta, tf, float(p["correction"]), n, scale)
    T = nominal_value(protocol, "T", p)
    cfg = SystemConfig(n_atoms=n, detuning=delta)
    return run_shortcut(cfg, sp, None, TimeGrid(0.0, T, n_steps), kernel=kernel, **rates)


def job_fidelity(job: dict, n_steps: int = DEFAULT_STEPS) -> float:
    return run_job(job, n_steps).final_fidelity
