# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 steppers over pre-sampled Hamiltonians.

``H`` is always a stack of shape ``(2 * n_steps + 1, d, d)``: entry ``2k`` is
the Hamiltonian at ``t_k``, entry ``2k + 1`` at the midpoint ``t_k + h/2``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


cdef inline void _matvec(const cplx* A, const cplx* x, cplx* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef cplx acc
    for i in range(d):
        acc = 0
        for j in range(d):
            acc = acc + A[i * d + j] * x[j]
        out[i] = acc


cdef inline void _schrodinger_rhs(const cplx* H, const cplx* psi, cplx* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef cplx mi = -1j
    _matvec(H, psi, out, d)
    for i in range(d):
        out[i] = mi * out[i]


def rk4_unitary(const cplx[:, :, ::1] H, const cplx[::1] psi0, double h,
                Py_ssize_t n_steps, Py_ssize_t save_every=1):
    cdef Py_ssize_t d = psi0.shape[0]
    if H.shape[0] != 2 * n_steps + 1 or H.shape[1] != d or H.shape[2] != d:
        raise ValueError("Hamiltonian stack has the wrong shape")
    if save_every < 1 or n_steps % save_every:
        raise ValueError("save_every must divide n_steps")
    cdef Py_ssize_t n_saved = n_steps // save_every + 1
    out_arr = np.empty((n_saved, d), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef cplx[::1] psi = np.array(psi0, dtype=np.complex128)
    cdef cplx[::1] tmp = np.empty(d, dtype=np.complex128)
    cdef cplx[::1] k1 = np.empty(d, dtype=np.complex128)
    cdef cplx[::1] k2 = np.empty(d, dtype=np.complex128)
    cdef cplx[::1] k3 = np.empty(d, dtype=np.complex128)
    cdef cplx[::1] k4 = np.empty(d, dtype=np.complex128)
    cdef Py_ssize_t step, i, slot = 1
    cdef double hh = 0.5 * h, h6 = h / 6.0
    out[0, :] = psi
    with nogil:
        for step in range(n_steps):
            _schrodinger_rhs(&H[2 * step, 0, 0], &psi[0], &k1[0], d)
            for i in range(d):
                tmp[i] = psi[i] + hh * k1[i]
            _schrodinger_rhs(&H[2 * step + 1, 0, 0], &tmp[0], &k2[0], d)
            for i in range(d):
                tmp[i] = psi[i] + hh * k2[i]
            _schrodinger_rhs(&H[2 * step + 1, 0, 0], &tmp[0], &k3[0], d)
            for i in range(d):
                tmp[i] = psi[i] + h * k3[i]
            _schrodinger_rhs(&H[2 * step + 2, 0, 0], &tmp[0], &k4[0], d)
            for i in range(d):
                psi[i] = psi[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if (step + 1) % save_every == 0:
                for i in range(d):
                    out[slot, i] = psi[i]
                slot += 1
    return out_arr


cdef void _lindblad_rhs(const cplx* H, const cplx* D, const cplx* rho, cplx* out,
                        const Py_ssize_t* rows, const Py_ssize_t* cols, const cplx* vals,
                        const Py_ssize_t* ptr, Py_ssize_t n_ops, Py_ssize_t d) noexcept nogil:
    # With X = -i H rho - D rho / 2 the dissipator-free part is X + X^dag
    # (every RK stage is Hermitian), D = sum_m L_m^dag L_m.
    cdef Py_ssize_t i, j, k, m, a, b
    cdef cplx acc
    cdef cplx mi = -1j
    for i in range(d):
        for j in range(d):
            acc = 0
            for k in range(d):
                acc = acc + (mi * H[i * d + k] - 0.5 * D[i * d + k]) * rho[k * d + j]
            out[i * d + j] = acc
    for i in range(d):
        out[i * d + i] = 2.0 * out[i * d + i].real
        for j in range(i + 1, d):
            acc = out[i * d + j] + out[j * d + i].conjugate()
            out[i * d + j] = acc
            out[j * d + i] = acc.conjugate()
    for m in range(n_ops):
        for a in range(ptr[m], ptr[m + 1]):
            for b in range(ptr[m], ptr[m + 1]):
                out[rows[a] * d + rows[b]] = out[rows[a] * d + rows[b]] + \
                    vals[a] * rho[cols[a] * d + cols[b]] * vals[b].conjugate()


def rk4_lindblad(const cplx[:, :, ::1] H, const cplx[:, ::1] D,
                 const Py_ssize_t[::1] rows, const Py_ssize_t[::1] cols,
                 const cplx[::1] vals, const Py_ssize_t[::1] ptr,
                 const cplx[:, ::1] rho0, double h,
                 Py_ssize_t n_steps, Py_ssize_t save_every=1):
    cdef Py_ssize_t d = rho0.shape[0]
    if H.shape[0] != 2 * n_steps + 1 or H.shape[1] != d or H.shape[2] != d:
        raise ValueError("Hamiltonian stack has the wrong shape")
    if save_every < 1 or n_steps % save_every:
        raise ValueError("save_every must divide n_steps")
    cdef Py_ssize_t n_ops = ptr.shape[0] - 1
    cdef Py_ssize_t n_saved = n_steps // save_every + 1
    out_arr = np.empty((n_saved, d, d), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_arr
    cdef cplx[:, ::1] rho = np.array(rho0, dtype=np.complex128)
    cdef cplx[:, ::1] tmp = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] k1 = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] k2 = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] k3 = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] k4 = np.empty((d, d), dtype=np.complex128)
    cdef Py_ssize_t step, i, j, slot = 1
    cdef double hh = 0.5 * h, h6 = h / 6.0
    cdef cplx sym
    cdef const Py_ssize_t* rp = &rows[0] if rows.shape[0] else NULL
    cdef const Py_ssize_t* cp = &cols[0] if cols.shape[0] else NULL
    cdef const cplx* vp = &vals[0] if vals.shape[0] else NULL
    out[0, :, :] = rho
    with nogil:
        for step in range(n_steps):
            _lindblad_rhs(&H[2 * step, 0, 0], &D[0, 0], &rho[0, 0], &k1[0, 0],
                          rp, cp, vp, &ptr[0], n_ops, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = rho[i, j] + hh * k1[i, j]
            _lindblad_rhs(&H[2 * step + 1, 0, 0], &D[0, 0], &tmp[0, 0], &k2[0, 0],
                          rp, cp, vp, &ptr[0], n_ops, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = rho[i, j] + hh * k2[i, j]
            _lindblad_rhs(&H[2 * step + 1, 0, 0], &D[0, 0], &tmp[0, 0], &k3[0, 0],
                          rp, cp, vp, &ptr[0], n_ops, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = rho[i, j] + h * k3[i, j]
            _lindblad_rhs(&H[2 * step + 2, 0, 0], &D[0, 0], &tmp[0, 0], &k4[0, 0],
                          rp, cp, vp, &ptr[0], n_ops, d)
            for i in range(d):
                for j in range(d):
                    rho[i, j] = rho[i, j] + h6 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            for i in range(d):
                rho[i, i] = rho[i, i].real
                for j in range(i + 1, d):
                    sym = 0.5 * (rho[i, j] + rho[j, i].conjugate())
                    rho[i, j] = sym
                    rho[j, i] = sym.conjugate()
            if (step + 1) % save_every == 0:
                for i in range(d):
                    for j in range(d):
                        out[slot, i, j] = rho[i, j]
                slot += 1
    return out_arr
