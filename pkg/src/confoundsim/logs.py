"""Columnar interaction logs.

A :class:`Log` stores one simulated impression per row in parallel numpy
arrays (day, covariates, action, behaviour-policy propensity, click and
optional sale outcomes, optional A/B arm).  Rows are ordered by day so a
day slice is a contiguous range.  :class:`Interaction` is the scalar view
of a single row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["ARM_LABELS", "Interaction", "Log"]

# Arm codes stored in the log; -1 marks rows logged outside any A/B split.
ARM_LABELS = {-1: "", 0: "A", 1: "B"}
ARM_CODES = {label: code for code, label in ARM_LABELS.items()}


@dataclass(frozen=True)
class Interaction:
    """One logged impression."""

    day: int
    x1: int
    x2: int
    a: int
    propensity: float
    c: int
    d: int | None = None
    s: int | None = None
    arm: str | None = None

    def to_dict(self) -> dict:
        payload = {
            "day": self.day,
            "x1": self.x1,
            "x2": self.x2,
            "a": self.a,
            "propensity": self.propensity,
            "c": self.c,
        }
        if self.d is not None:
            payload["d"] = self.d
        if self.s is not None:
            payload["s"] = self.s
        if self.arm:
            payload["arm"] = self.arm
        return payload


@dataclass
class Log:
    """Day-ordered collection of interactions, stored column-wise.

    ``d`` is ``None`` outside two-decision environments.  ``s`` is ``None``
    when sales are not simulated; otherwise ``s[i] == -1`` whenever
    ``c[i] == 0`` (a sale is observable only after a click).  ``arm`` holds
    A/B arm codes (-1 outside any split).
    """

    day: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    a: np.ndarray
    propensity: np.ndarray
    c: np.ndarray
    d: np.ndarray | None = None
    s: np.ndarray | None = None
    arm: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.day)
        for name in ("x1", "x2", "a", "propensity", "c"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} length mismatch")
        for name in ("d", "s", "arm"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"column {name!r} length mismatch")
        if n and np.any(np.diff(self.day) < 0):
            raise ValueError("rows must be ordered by nondecreasing day")
        if np.any((self.propensity <= 0) | (self.propensity > 1)):
            raise ValueError("propensities must lie in (0, 1]")
        if self.s is not None and np.any((self.c == 0) & (self.s != -1)):
            raise ValueError("sale outcome must be absent (-1) when c == 0")

    @classmethod
    def empty(cls, with_decisions=False, with_sales=False, with_arms=False) -> "Log":
        z = np.zeros(0, dtype=np.int32)
        return cls(
            day=z.copy(),
            x1=z.copy(),
            x2=z.copy(),
            a=z.copy(),
            propensity=np.zeros(0, dtype=np.float64),
            c=np.zeros(0, dtype=np.int8),
            d=z.copy() if with_decisions else None,
            s=np.zeros(0, dtype=np.int8) if with_sales else None,
            arm=np.zeros(0, dtype=np.int8) if with_arms else None,
        )

    def __len__(self) -> int:
        return len(self.day)

    def __getitem__(self, i: int) -> Interaction:
        s = None if self.s is None else int(self.s[i])
        return Interaction(
            day=int(self.day[i]),
            x1=int(self.x1[i]),
            x2=int(self.x2[i]),
            a=int(self.a[i]),
            propensity=float(self.propensity[i]),
            c=int(self.c[i]),
            d=None if self.d is None else int(self.d[i]),
            s=None if s == -1 else s,
            arm=None if self.arm is None else ARM_LABELS[int(self.arm[i])],
        )

    @property
    def days(self) -> np.ndarray:
        return np.unique(self.day)

    def _take(self, mask: np.ndarray) -> "Log":
        take = lambda col: None if col is None else col[mask]
        return Log(
            day=self.day[mask],
            x1=self.x1[mask],
            x2=self.x2[mask],
            a=self.a[mask],
            propensity=self.propensity[mask],
            c=self.c[mask],
            d=take(self.d),
            s=take(self.s),
            arm=take(self.arm),
        )

    def day_slice(self, day: int) -> "Log":
        """Rows logged on exactly ``day`` (contiguous because rows are day-ordered)."""
        lo = int(np.searchsorted(self.day, day, side="left"))
        hi = int(np.searchsorted(self.day, day, side="right"))
        return self._take(slice(lo, hi))

    def arm_slice(self, arm: str) -> "Log":
        if self.arm is None:
            raise ValueError("log has no arm column")
        return self._take(self.arm == ARM_CODES[arm])

    @staticmethod
    def concat(parts) -> "Log":
        """Concatenate logs; the result must still be day-ordered."""
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")

        def cat(name):
            cols = [getattr(p, name) for p in parts]
            present = [col is not None for col in cols]
            if not any(present):
                return None
            if not all(present):
                raise ValueError(f"column {name!r} present in some parts only")
            return np.concatenate(cols)

        return Log(
            day=np.concatenate([p.day for p in parts]),
            x1=np.concatenate([p.x1 for p in parts]),
            x2=np.concatenate([p.x2 for p in parts]),
            a=np.concatenate([p.a for p in parts]),
            propensity=np.concatenate([p.propensity for p in parts]),
            c=np.concatenate([p.c for p in parts]),
            d=cat("d"),
            s=cat("s"),
            arm=cat("arm"),
        )

    def to_ndjson(self, fh) -> None:
        """Write one JSON object per interaction, in log order."""
        for i in range(len(self)):
            fh.write(json.dumps(self[i].to_dict(), sort_keys=True))
            fh.write("\n")
