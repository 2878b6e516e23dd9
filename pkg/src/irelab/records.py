"""Shared result containers: per-step trajectory tables and named check
outcomes.

Both the theory harness and the batch runner produce these, so they live in
a small leaf module with no dependencies beyond numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TrajectoryLog", "CheckResult"]


class TrajectoryLog:
    """Append-only table of per-step scalars with a fixed column set.

    Two columns carry invariants that are enforced on the way in whenever
    they are present: ``step`` must strictly increase, and ``evals`` (the
    cumulative gradient-evaluation counter) must never decrease.  ``status``
    is the run outcome (``completed`` / ``converged`` / ``diverged``) and
    ``meta`` holds free-form scalars about the producing run.
    """

    def __init__(self, columns, status: str = "completed", meta: dict | None = None):
        self.columns = tuple(str(c) for c in columns)
        if not self.columns:
            raise ValueError("a trajectory log needs at least one column")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"duplicate column names in {self.columns}")
        self.status = status
        self.meta = dict(meta or {})
        self._rows: list[tuple[float, ...]] = []

    def _index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}; columns are {self.columns}") from None

    def __len__(self) -> int:
        return len(self._rows)

    def append(self, row) -> None:
        row = tuple(float(x) for x in row)
        if len(row) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        if self._rows:
            last = self._rows[-1]
            if "step" in self.columns:
                j = self._index("step")
                if row[j] <= last[j]:
                    raise ValueError(f"step must strictly increase ({row[j]} after {last[j]})")
            if "evals" in self.columns:
                j = self._index("evals")
                if row[j] < last[j]:
                    raise ValueError("cumulative evaluation counter cannot decrease")
        self._rows.append(row)

    def column(self, name: str) -> np.ndarray:
        j = self._index(name)
        return np.array([r[j] for r in self._rows])

    def last(self, name: str) -> float:
        if not self._rows:
            raise IndexError("empty trajectory log")
        return self._rows[-1][self._index(name)]

    def rows(self) -> list[tuple[float, ...]]:
        return list(self._rows)


@dataclass(frozen=True)
class CheckResult:
    """One verified claim: a measured value against a human-readable bound."""

    name: str
    value: float
    bound: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        text = f"{self.name}: value={self.value:.6g} bound[{self.bound}] {flag}"
        return f"{text} ({self.detail})" if self.detail else text
