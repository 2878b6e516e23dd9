"""Hot numerical kernels with a compiled core and a numpy fallback.

At import time the package prefers the Cython extension ``_core`` and
silently falls back to the pure-numpy twin in :mod:`.fallback` when the
extension was not built.  Set the environment variable
``IRELAB_KERNELS=fallback`` (or ``=compiled``) to force a backend; forcing
``compiled`` raises if the extension is unavailable.

Both backends expose the same two functions:

``jacobi_rotate(a, v, rel_tol, max_sweeps) -> int``
    In-place cyclic Jacobi diagonalization; see :mod:`irelab.linalg`.

``sde_quadratic_chunk(u, v, dw, c0, c1, eta_sigma2, kappa, dt) -> None``
    In-place Euler-Maruyama stepping for the two-variable diffusion with
    quadratic curvature field; see :mod:`irelab.theory`.
"""

from __future__ import annotations

import os

_requested = os.environ.get("IRELAB_KERNELS", "auto").lower()
if _requested not in ("auto", "compiled", "fallback"):
    raise ImportError(
        f"IRELAB_KERNELS must be 'auto', 'compiled' or 'fallback', got {_requested!r}"
    )

if _requested == "fallback":
    from . import fallback as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "compiled kernels requested via IRELAB_KERNELS=compiled "
                "but the extension is not built"
            ) from None
        from . import fallback as _impl

BACKEND: str = _impl.BACKEND
jacobi_rotate = _impl.jacobi_rotate
sde_quadratic_chunk = _impl.sde_quadratic_chunk

__all__ = ["BACKEND", "jacobi_rotate", "sde_quadratic_chunk"]
