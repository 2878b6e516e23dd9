"""Dense symmetric linear algebra: eigendecomposition, spectral projectors,
and order-statistic selection.

The eigensolver is a cyclic Jacobi iteration (rotations in fixed row order,
off-diagonal Frobenius threshold ``1e-12 * ||A||_F``, at most 100 sweeps).
Jacobi is slower than LAPACK but simple, deterministic, and accurate to the
last digits for the dense p <= ~256 problems this laboratory works with —
accuracy and reproducibility dominate speed here.  The rotation loop runs in
the compiled kernel when available (see :mod:`irelab._kernels`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import jacobi_rotate

__all__ = [
    "SymMatrix",
    "EigenDecomposition",
    "Projector",
    "SpectralGapWarning",
    "sym_eigh",
    "spectral_projector",
    "kth_smallest_abs",
]

#: eigenvalue gap below which a projector cut is considered numerically
#: degenerate (the projector is then basis-dependent and a warning is issued)
DEGENERATE_GAP = 1e-8

_JACOBI_REL_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100


class SpectralGapWarning(UserWarning):
    """A spectral projector was cut inside a numerically degenerate cluster."""


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix; symmetrized exactly at construction."""

    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        object.__setattr__(self, "a", 0.5 * (a + a.T))

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigen pairs of a symmetric matrix, eigenvalues sorted descending."""

    eigvals: np.ndarray
    eigvecs: np.ndarray  # orthonormal columns, eigvecs[:, k] pairs with eigvals[k]

    @property
    def dim(self) -> int:
        return self.eigvals.shape[0]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector onto the span of eigenvectors i..j (1-based)."""

    matrix: np.ndarray
    span: tuple[int, int] = field(default=(1, 1))

    @property
    def rank(self) -> int:
        i, j = self.span
        return j - i + 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def sym_eigh(a: np.ndarray | SymMatrix) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    The input is symmetrized as (A + A^T)/2 before factorization.  Output
    eigenvalues are sorted descending (ties keep their diagonal order) and
    each eigenvector's largest-magnitude component is made positive, so the
    result is a deterministic function of the input.
    """
    mat = a.a if isinstance(a, SymMatrix) else np.asarray(a, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix entries must be finite")
    n = mat.shape[0]
    work = np.ascontiguousarray(0.5 * (mat + mat.T))
    vecs = np.eye(n)
    sweeps = jacobi_rotate(work, vecs, _JACOBI_REL_TOL, _JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise np.linalg.LinAlgError(
            f"Jacobi iteration did not converge within {_JACOBI_MAX_SWEEPS} sweeps"
        )
    vals = np.diag(work).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # canonical sign: flip each column so its largest-|.| entry is positive
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(n)])
    signs[signs == 0.0] = 1.0
    vecs = vecs * signs
    return EigenDecomposition(eigvals=vals, eigvecs=vecs)


def spectral_projector(decomp: EigenDecomposition, i: int, j: int) -> Projector:
    """Projector onto the span of eigenvectors ``i..j`` (1-based, inclusive).

    Warns with :class:`SpectralGapWarning` when either cut point falls inside
    an eigenvalue cluster tighter than ``DEGENERATE_GAP`` — the projector is
    then only defined up to the solver's ordering within the cluster.
    """
    p = decomp.dim
    if not (1 <= i <= j <= p):
        raise ValueError(f"projector range must satisfy 1 <= i <= j <= p, got ({i}, {j}) with p={p}")
    vals = decomp.eigvals
    for cut, lo, hi in (("lower", i - 2, i - 1), ("upper", j - 1, j)):
        if 0 <= lo and hi < p and abs(vals[lo] - vals[hi]) < DEGENERATE_GAP:
            warnings.warn(
                f"{cut} cut of projector span ({i}, {j}) splits a degenerate "
                f"eigenvalue cluster (gap {abs(vals[lo] - vals[hi]):.3e})",
                SpectralGapWarning,
                stacklevel=2,
            )
    cols = decomp.eigvecs[:, i - 1 : j]
    return Projector(matrix=cols @ cols.T, span=(i, j))


def kth_smallest_abs(h: np.ndarray, k: int) -> float:
    """The k-th smallest entry of ``|h|`` (1-based, ties counted with
    multiplicity), found by selection rather than a full sort."""
    h = np.asarray(h, dtype=float).ravel()
    if not (1 <= k <= h.size):
        raise ValueError(f"k must satisfy 1 <= k <= {h.size}, got {k}")
    return float(np.partition(np.abs(h), k - 1)[k - 1])
