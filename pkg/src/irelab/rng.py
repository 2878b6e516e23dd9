"""Seedable counter-based random streams.

Every stochastic component of the laboratory draws from a
:class:`numpy.random.Generator` backed by the Philox 4x64 counter-based bit
generator.  Philox is keyed, not state-evolved, so independent streams are
derived *algebraically* from a 64-bit master seed and a stream index:

    stream_key(seed, index) = seed XOR splitmix64(index + 1)

The splitmix64 finalizer decorrelates consecutive indices, so Monte-Carlo
repetition ``i`` of a sweep cell always sees the same stream no matter how
many worker threads are running or in which order cells complete.  This is
what makes CSV outputs byte-identical across ``--jobs`` settings.
"""

from __future__ import annotations

import numpy as np

__all__ = ["splitmix64", "stream_key", "spawn_stream"]

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer (a 64-bit bijective mixer)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_key(master_seed: int, index: int = 0) -> int:
    """64-bit key of the ``index``-th stream derived from ``master_seed``."""
    if master_seed < 0 or master_seed > _MASK64:
        raise ValueError(f"master seed must be an unsigned 64-bit integer, got {master_seed}")
    if index < 0:
        raise ValueError(f"stream index must be non-negative, got {index}")
    return (master_seed ^ splitmix64(index + 1)) & _MASK64


def spawn_stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Return the independent random stream ``index`` under ``master_seed``."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, index)))
