"""Compare the compiled and numpy RK4 kernels on the default protocol workloads.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--steps N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cqed_wstate.backend import get_kernel
from cqed_wstate.core import SystemConfig, basis_vector, projector
from cqed_wstate.dynamics import TimeGrid, lindblad_ops
from cqed_wstate.hamiltonians import system_operator
from cqed_wstate.pulses import ShortcutParams, shortcut_schedule


def workload(n_atoms: int, n_steps: int):
    cfg = SystemConfig(n_atoms=n_atoms, detuning=3.0)
    sched = shortcut_schedule(ShortcutParams(n_atoms=n_atoms))
    grid = TimeGrid(0.0, 35.0, n_steps)
    Hs = np.ascontiguousarray(system_operator(cfg, sched).sample(np.linspace(0, 35, 2 * n_steps + 1)))
    psi0 = basis_vector(cfg.dim, 0)
    return cfg, Hs, psi0, grid.h


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args(argv)

    try:
        kernels = {"cython": get_kernel("cython")}
    except ImportError:
        kernels = {}
        print("compiled kernel not built; timing the numpy fallback only")
    kernels["python"] = get_kernel("python")

    print(f"{'case':<22}{'kernel':<8}{'seconds':>10}{'rel. time':>10}  max|diff|")
    for n_atoms in (3, 5):
        cfg, Hs, psi0, h = workload(n_atoms, args.steps)
        rows, cols, vals, ptr, D = lindblad_ops(cfg, 0.1, 0.1).sparse()
        rho0 = projector(psi0)
        cases = {
            f"unitary N={n_atoms}": lambda k: k.rk4_unitary(Hs, psi0, h, args.steps),
            f"lindblad N={n_atoms}": lambda k: k.rk4_lindblad(Hs, D, rows, cols, vals, ptr, rho0, h, args.steps),
        }
        for case, run in cases.items():
            ref_t, ref_out = None, None
            for name, k in kernels.items():
                t = best_of(lambda: run(k), args.repeat)
                out = run(k)
                if ref_out is None:
                    ref_t, ref_out, speed, diff = t, out, 1.0, 0.0
                else:
                    speed, diff = t / ref_t, float(np.max(np.abs(out - ref_out)))
                print(f"{case:<22}{name:<8}{t:>10.4f}{speed:>10.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()
