"""Pure-numpy implementations of the hot numerical kernels.

These mirror the compiled extension in ``_core.pyx`` operation for
operation: the same rotation ordering, the same elementwise expression
grouping, the same convergence thresholds.  The Euler-Maruyama stepper is
bit-identical to the compiled version given the same noise increments;
the Jacobi solver may differ in the final ulps only because its
convergence test accumulates sums in a different order.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _off_norm(a: np.ndarray) -> float:
    """Frobenius norm of the strict off-diagonal part, computed without
    cancellation (never as a difference of large totals)."""
    n = a.shape[0]
    iu = np.triu_indices(n, k=1)
    vals = a[iu]
    return float(np.sqrt(2.0 * float(vals @ vals)))


def jacobi_rotate(a: np.ndarray, v: np.ndarray, rel_tol: float, max_sweeps: int) -> int:
    """Diagonalize symmetric ``a`` in place by cyclic Jacobi rotations.

    ``v`` accumulates the rotations (pass the identity; on return the input
    matrix equals ``v @ a @ v.T``).  Sweeps run in fixed row-cyclic order
    until the off-diagonal Frobenius norm drops below
    ``rel_tol * ||a_input||_F``.  Returns the number of sweeps executed, or
    -1 if ``max_sweeps`` did not suffice.
    """
    n = a.shape[0]
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return 0
    thresh = rel_tol * norm
    for sweep in range(1, max_sweeps + 1):
        if _off_norm(a) <= thresh:
            return sweep - 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if _off_norm(a) <= thresh:
        return max_sweeps
    return -1


def sde_quadratic_chunk(
    u: np.ndarray,
    v: np.ndarray,
    dw: np.ndarray,
    c0: float,
    c1: float,
    eta_sigma2: float,
    kappa: float,
    dt: float,
) -> None:
    """Advance the two-variable diffusion through one chunk of noise.

    ``u`` and ``v`` are path arrays updated in place; ``dw`` has shape
    (steps, paths) and holds the Brownian increments for this chunk.  The
    curvature field is the quadratic family h(u) = c0 + c1*u**2, for which
    the slow variable feels the deterministic pull -(1+kappa)*v**2*c1*u and
    the fast variable is linearly damped with state-dependent noise
    sqrt(2*eta_sigma2*h(u)) — scaled so its frozen-u stationary variance is
    exactly ``eta_sigma2``.
    """
    one_plus_kappa = 1.0 + kappa
    two_es2 = 2.0 * eta_sigma2
    for step in range(dw.shape[0]):
        h = c0 + (c1 * u) * u
        unew = u - ((one_plus_kappa * (v * v)) * (c1 * u)) * dt
        vnew = (v - (v * h) * dt) + np.sqrt(two_es2 * h) * dw[step]
        u[:] = unew
        v[:] = vnew
