# cython: language_level=3
"""Compiled numerical kernels: cyclic Jacobi rotations and the
Euler-Maruyama stepper for the two-variable diffusion.

Each function mirrors its numpy twin in ``fallback.py`` operation for
operation so that both backends produce the same results (bit-identical
for the stepper given identical noise; identical to solver tolerance for
the eigensolver, whose convergence test accumulates in a different order).
"""

import cython

from libc.math cimport sqrt

BACKEND = "compiled"


@cython.boundscheck(False)
@cython.wraparound(False)
cdef double _off_norm(double[:, ::1] a) nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q
    cdef double acc = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            acc += a[p, q] * a[p, q]
    return sqrt(2.0 * acc)


@cython.boundscheck(False)
@cython.wraparound(False)
cdef double _fro_norm(double[:, ::1] a) nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += a[i, j] * a[i, j]
    return sqrt(acc)


@cython.boundscheck(False)
@cython.wraparound(False)
def jacobi_rotate(double[:, ::1] a, double[:, ::1] v, double rel_tol, int max_sweeps):
    """Diagonalize symmetric ``a`` in place by cyclic Jacobi rotations.

    ``v`` accumulates the rotations (pass the identity; on return the input
    matrix equals ``v @ a @ v.T``).  Returns the number of sweeps executed,
    or -1 if ``max_sweeps`` did not suffice.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef int result = -1
    cdef double norm, thresh, apq, tau, t, c, s, xp, xq
    norm = _fro_norm(a)
    if norm == 0.0:
        return 0
    thresh = rel_tol * norm
    with nogil:
        for sweep in range(1, max_sweeps + 1):
            if _off_norm(a) <= thresh:
                result = sweep - 1
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for k in range(n):
                        xp = a[k, p]
                        xq = a[k, q]
                        a[k, p] = c * xp - s * xq
                        a[k, q] = s * xp + c * xq
                    for k in range(n):
                        xp = a[p, k]
                        xq = a[q, k]
                        a[p, k] = c * xp - s * xq
                        a[q, k] = s * xp + c * xq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        xp = v[k, p]
                        xq = v[k, q]
                        v[k, p] = c * xp - s * xq
                        v[k, q] = s * xp + c * xq
        if result == -1 and _off_norm(a) <= thresh:
            result = max_sweeps
    return result


@cython.boundscheck(False)
@cython.wraparound(False)
def sde_quadratic_chunk(
    double[::1] u,
    double[::1] v,
    double[:, ::1] dw,
    double c0,
    double c1,
    double eta_sigma2,
    double kappa,
    double dt,
):
    """Advance the two-variable diffusion through one chunk of noise.

    ``u`` and ``v`` are path arrays updated in place; ``dw`` has shape
    (steps, paths).  Curvature field h(u) = c0 + c1*u**2; noise scale
    sqrt(2*eta_sigma2*h(u)) so the frozen-u stationary variance of ``v``
    is exactly ``eta_sigma2``.
    """
    cdef Py_ssize_t nsteps = dw.shape[0]
    cdef Py_ssize_t npaths = dw.shape[1]
    cdef Py_ssize_t step, i
    cdef double one_plus_kappa = 1.0 + kappa
    cdef double two_es2 = 2.0 * eta_sigma2
    cdef double ui, vi, h, unew, vnew
    if u.shape[0] != npaths or v.shape[0] != npaths:
        raise ValueError("path arrays must match the noise chunk width")
    with nogil:
        for step in range(nsteps):
            for i in range(npaths):
                ui = u[i]
                vi = v[i]
                h = c0 + (c1 * ui) * ui
                unew = ui - ((one_plus_kappa * (vi * vi)) * (c1 * ui)) * dt
                vnew = (vi - (vi * h) * dt) + sqrt(two_es2 * h) * dw[step, i]
                u[i] = unew
                v[i] = vnew
