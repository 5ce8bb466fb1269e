"""Parameter sweeps, robustness scans and decoherence maps with CSV export.

Every grid cell is an independent :func:`protocols.run_job` call, so cells
fan out over a process pool and are gathered back by index. A failing cell
becomes NaN in the matrix and its message goes to the error sidecar.
"""
from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .backend import NAME as KERNEL_NAME
from .dynamics import DEFAULT_STEPS
from .protocols import DEFAULTS, SWEEPABLE, job_params, nominal_value, run_job

EXPERIMENTAL_GAMMA = 2.62 / 750
EXPERIMENTAL_KAPPA = 3.5 / 750


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ValueError(f"axis {self.name!r}: n_points must be a positive integer")
        if self.n_points > 1 and not self.stop > self.start:
            raise ValueError(f"axis {self.name!r}: grid must be increasing (start < stop)")
        if self.n_points == 1 and self.stop != self.start:
            raise ValueError(f"axis {self.name!r}: a single point needs start == stop")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)


@dataclass(frozen=True)
class SweepSpec:
    protocol: str
    axis1: Axis
    axis2: Axis | None = None
    fixed: dict = field(default_factory=dict)
    n_steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if self.protocol not in SWEEPABLE:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        allowed = SWEEPABLE[self.protocol]
        for ax in (self.axis1, self.axis2):
            if ax is not None and ax.name not in allowed:
                raise ValueError(f"{ax.name!r} cannot be swept for {self.protocol}; choose from {allowed}")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ValueError("the two axes must vary different parameters")
        job_params(self.protocol, self.fixed)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.axis1.n_points,) if self.axis2 is None else (self.axis1.n_points, self.axis2.n_points)

    def jobs(self) -> list[dict]:
        """One job dict per cell, in C order."""
        base = {"protocol": self.protocol, **self.fixed}
        if self.axis2 is None:
            return [{**base, self.axis1.name: float(a)} for a in self.axis1.values]
        return [
            {**base, self.axis1.name: float(a), self.axis2.name: float(b)}
            for a in self.axis1.values for b in self.axis2.values
        ]


@dataclass
class SweepResult:
    axis1_name: str
    axis1: np.ndarray
    fidelity: np.ndarray
    axis2_name: str | None = None
    axis2: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # "i" or "i,j" -> message

    def write(self, out_dir, name: str = "matrix") -> Path:
        """Write ``<name>.csv``, ``meta.json`` and, when cells failed, ``errors.json``."""
        out_dir = Path(out_dir)
        path = out_dir / f"{name}.csv"
        if self.axis2 is None:
            io.write_columns(path, [self.axis1_name, "fidelity"], [self.axis1, self.fidelity])
        else:
            rows = [",".join([f"{self.axis1_name}\\{self.axis2_name}", *map(io.fmt, self.axis2)])]
            for a, row in zip(self.axis1, self.fidelity):
                rows.append(",".join([io.fmt(a), *map(io.fmt, row)]))
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("\n".join(rows) + "\n")
        io.write_json(out_dir / "meta.json", {**self.meta, "csv": path.name})
        if self.errors:
            io.write_json(out_dir / "errors.json", self.errors)
        return path


def read_matrix(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of the 2-D CSV layout: (axis1, axis2, matrix)."""
    lines = Path(path).read_text().strip().splitlines()
    axis2 = np.array([float(x) for x in lines[0].split(",")[1:]])
    body = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return body[:, 0], axis2, body[:, 1:]


def _cell(args) -> tuple[float, str | None]:
    job, n_steps = args
    try:
        return run_job(job, n_steps).final_fidelity, None
    except Exception as exc:  # a single bad cell must not abort the sweep
        return math.nan, f"{type(exc).__name__}: {exc}"


def _run_cells(jobs: list[dict], n_steps: int, workers: int) -> list[tuple[float, str | None]]:
    args = [(j, n_steps) for j in jobs]
    if workers <= 1 or len(jobs) <= 1:
        return [_cell(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, args, chunksize=max(1, len(args) // (4 * workers))))


def _meta(protocol: str, fixed: dict, n_steps: int, varied=(), **extra) -> dict:
    params = {k: v for k, v in job_params(protocol, fixed).items() if k not in varied}
    return {
        "protocol": protocol,
        "fixed": params,
        "n_steps": n_steps,
        "integrator": "rk4",
        "kernel": KERNEL_NAME,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }


def sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Final W fidelity over a 1-D or 2-D parameter grid."""
    out = _run_cells(spec.jobs(), spec.n_steps, workers)
    fid = np.array([f for f, _ in out]).reshape(spec.shape)
    errors = {}
    for flat, (_, err) in enumerate(out):
        if err is not None:
            key = ",".join(map(str, np.unravel_index(flat, spec.shape)))
            errors[key] = err
    ax2 = spec.axis2
    varied = [a.name for a in (spec.axis1, ax2) if a is not None]
    meta = _meta(spec.protocol, spec.fixed, spec.n_steps, varied, axis1=spec.axis1.name,
                 axis2=None if ax2 is None else ax2.name, failed_cells=len(errors))
    return SweepResult(spec.axis1.name, spec.axis1.values, fid,
                       None if ax2 is None else ax2.name, None if ax2 is None else ax2.values,
                       meta, errors)


def robustness_scan(protocol: str, parameter: str, relative_range=(-0.1, 0.1, 21), *,
                    fixed: dict | None = None, n_steps: int = DEFAULT_STEPS,
                    workers: int = 1) -> SweepResult:
    """Fidelity at ``x' = x (1 + d)`` for each relative deviation ``d``.

    ``relative_range`` is ``(start, stop, n_points)`` or an explicit array.
    The nominal ``x`` is the protocol default (after ``fixed`` overrides).
    The unperturbed fidelity is stored as ``meta["baseline"]``.
    """
    fixed = dict(fixed or {})
    if parameter not in SWEEPABLE.get(protocol, ()):
        raise ValueError(f"{parameter!r} cannot be scanned for {protocol!r}")
    if isinstance(relative_range, tuple) and len(relative_range) == 3:
        rel = Axis(f"d{parameter}/{parameter}", *relative_range).values
    else:
        rel = np.asarray(relative_range, dtype=float)
        if rel.ndim != 1 or rel.size == 0 or np.any(np.diff(rel) <= 0):
            raise ValueError("relative deviations must be a nonempty increasing sequence")
    x0 = nominal_value(protocol, parameter, job_params(protocol, fixed))
    base = {"protocol": protocol, **fixed}
    jobs = [{**base, parameter: x0 * (1 + d)} for d in rel] + [{**base, parameter: x0}]
    out = _run_cells(jobs, n_steps, workers)
    fid = np.array([f for f, _ in out[:-1]])
    errors = {str(i): e for i, (_, e) in enumerate(out[:-1]) if e is not None}
    meta = _meta(protocol, fixed, n_steps, (parameter,), parameter=parameter, nominal=x0,
                 baseline=out[-1][0], failed_cells=len(errors))
    return SweepResult(f"d{parameter}/{parameter}", rel, fid, meta=meta, errors=errors)


def decoherence_map(protocol: str = "shortcut", gamma=(0.0, 0.1, 21), kappa=(0.0, 0.1, 21), *,
                    fixed: dict | None = None, n_steps: int = DEFAULT_STEPS,
                    workers: int = 1) -> SweepResult:
    """Lindblad fidelity over a (gamma, kappa) grid; gamma runs down the rows."""
    if min(gamma[0], kappa[0]) < 0:
        raise ValueError("decay rates must be non-negative")
    spec = SweepSpec(protocol, Axis("gamma", *gamma), Axis("kappa", *kappa), dict(fixed or {}), n_steps)
    return sweep(spec, workers)


__all__ = [
    "Axis", "SweepSpec", "SweepResult", "sweep", "robustness_scan", "decoherence_map",
    "read_matrix", "DEFAULTS", "EXPERIMENTAL_GAMMA", "EXPERIMENTAL_KAPPA",
]
