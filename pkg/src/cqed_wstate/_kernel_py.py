"""Pure-numpy RK4 steppers; same signatures and results as the compiled ``_kernel``."""
from __future__ import annotations

import numpy as np


def _check(H, d, n_steps, save_every):
    if H.shape != (2 * n_steps + 1, d, d):
        raise ValueError("Hamiltonian stack has the wrong shape")
    if save_every < 1 or n_steps % save_every:
        raise ValueError("save_every must divide n_steps")


# divergence is reported by the callers' conservation monitors, as for the compiled kernel
@np.errstate(over="ignore", invalid="ignore")
def rk4_unitary(H, psi0, h, n_steps, save_every=1):
    d = psi0.shape[0]
    _check(H, d, n_steps, save_every)
    A = -1j * np.asarray(H)
    psi = np.array(psi0, dtype=np.complex128)
    out = np.empty((n_steps // save_every + 1, d), dtype=np.complex128)
    out[0] = psi
    slot = 1
    for step in range(n_steps):
        A0, Am, A1 = A[2 * step], A[2 * step + 1], A[2 * step + 2]
        k1 = A0 @ psi
        k2 = Am @ (psi + 0.5 * h * k1)
        k3 = Am @ (psi + 0.5 * h * k2)
        k4 = A1 @ (psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % save_every == 0:
            out[slot] = psi
            slot += 1
    return out


def _dense_jumps(rows, cols, vals, ptr, d):
    ops = np.zeros((len(ptr) - 1, d, d), dtype=np.complex128)
    for m in range(len(ptr) - 1):
        for a in range(ptr[m], ptr[m + 1]):
            ops[m, rows[a], cols[a]] += vals[a]
    return ops


@np.errstate(over="ignore", invalid="ignore")
def rk4_lindblad(H, D, rows, cols, vals, ptr, rho0, h, n_steps, save_every=1):
    d = rho0.shape[0]
    _check(H, d, n_steps, save_every)
    L = _dense_jumps(rows, cols, vals, ptr, d)
    Ld = L.conj().transpose(0, 2, 1)
    D = np.asarray(D)

    def rhs(Hk, rho):
        out = -1j * (Hk @ rho - rho @ Hk) - 0.5 * (D @ rho + rho @ D)
        if len(L):
            out += (L @ rho @ Ld).sum(axis=0)
        return out

    rho = np.array(rho0, dtype=np.complex128)
    out = np.empty((n_steps // save_every + 1, d, d), dtype=np.complex128)
    out[0] = rho
    slot = 1
    for step in range(n_steps):
        H0, Hm, H1 = H[2 * step], H[2 * step + 1], H[2 * step + 2]
        k1 = rhs(H0, rho)
        k2 = rhs(Hm, rho + 0.5 * h * k1)
        k3 = rhs(Hm, rho + 0.5 * h * k2)
        k4 = rhs(H1, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        if (step + 1) % save_every == 0:
            out[slot] = rho
            slot += 1
    return out
