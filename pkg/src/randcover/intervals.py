"""Finite unions of open intervals in canonical (sorted, disjoint) form."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"IVRL"


@dataclass(frozen=True)
class IntervalUnion:
    lefts: np.ndarray
    rights: np.ndarray

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_intervals(cls, lefts, rights) -> "IntervalUnion":
        """Canonicalise arbitrary intervals: sort, merge overlapping or touching ones."""
        lefts = np.asarray(lefts, dtype=float).ravel()
        rights = np.asarray(rights, dtype=float).ravel()
        keep = rights > lefts
        lefts, rights = lefts[keep], rights[keep]
        if lefts.size == 0:
            return cls.empty()
        order = np.argsort(lefts, kind="stable")
        lefts, rights = lefts[order], rights[order]
        reach = np.maximum.accumulate(rights)
        # touching endpoints merge: the shared point is measure zero
        starts = np.empty(lefts.size, dtype=bool)
        starts[0] = True
        starts[1:] = lefts[1:] > reach[:-1]
        idx = np.flatnonzero(starts)
        ends = np.append(idx[1:] - 1, lefts.size - 1)
        return cls(lefts[idx], reach[ends])

    @classmethod
    def from_balls(cls, centers, radii) -> "IntervalUnion":
        centers = np.asarray(centers, dtype=float)
        radii = np.asarray(radii, dtype=float)
        return cls.from_intervals(centers - radii, centers + radii)

    def __len__(self) -> int:
        return int(self.lefts.size)

    @property
    def total_length(self) -> float:
        return float(np.sum(self.rights - self.lefts))

    def is_canonical(self) -> bool:
        if len(self) == 0:
            return True
        return bool(np.all(self.rights > self.lefts)
                    and np.all(self.lefts[1:] > self.rights[:-1]))

    def canonical(self) -> "IntervalUnion":
        return IntervalUnion.from_intervals(self.lefts, self.rights)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion.from_intervals(
            np.concatenate([self.lefts, other.lefts]),
            np.concatenate([self.rights, other.rights]))

    def _covers(self, x: np.ndarray) -> np.ndarray:
        i = np.searchsorted(self.lefts, x, side="right") - 1
        ok = i >= 0
        out = np.zeros(x.shape, dtype=bool)
        out[ok] = x[ok] < self.rights[i[ok]]
        return out

    def intersection(self, other: "IntervalUnion") -> "IntervalUnion":
        """Sorted sweep over the merged endpoint list."""
        if len(self) == 0 or len(other) == 0:
            return IntervalUnion.empty()
        pts = np.unique(np.concatenate([self.lefts, self.rights, other.lefts, other.rights]))
        mids = 0.5 * (pts[:-1] + pts[1:])
        both = self._covers(mids) & other._covers(mids)
        return IntervalUnion.from_intervals(pts[:-1][both], pts[1:][both])

    def clip(self, lo: float, hi: float) -> "IntervalUnion":
        return self.intersection(IntervalUnion(np.array([lo]), np.array([hi])))

    def contains(self, other: "IntervalUnion") -> bool:
        """Every interval of ``other`` lies inside one interval of ``self``."""
        if len(other) == 0:
            return True
        if len(self) == 0:
            return False
        i = np.searchsorted(self.lefts, other.lefts, side="right") - 1
        if np.any(i < 0):
            return False
        return bool(np.all(other.rights <= self.rights[i]))

    # -- export -------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("left,right\n")
        for a, b in zip(self.lefts.tolist(), self.rights.tolist()):
            buf.write(f"{a!r},{b!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "IntervalUnion":
        rows = [ln.split(",") for ln in text.strip().splitlines()[1:] if ln]
        if not rows:
            return cls.empty()
        arr = np.array(rows, dtype=float)
        return cls.from_intervals(arr[:, 0], arr[:, 1])

    def to_bytes(self) -> bytes:
        """Run-length layout: magic, uint64 n, float64 first left, then
        alternating float64 run lengths (n inside runs, n - 1 gaps), little endian."""
        n = len(self)
        head = _MAGIC + struct.pack("<Q", n)
        if n == 0:
            return head
        runs = np.empty(2 * n - 1)
        runs[0::2] = self.rights - self.lefts
        runs[1::2] = self.lefts[1:] - self.rights[:-1]
        return head + struct.pack("<d", self.lefts[0]) + runs.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "IntervalUnion":
        if data[:4] != _MAGIC:
            raise ValueError("not an interval run-length file")
        (n,) = struct.unpack("<Q", data[4:12])
        if n == 0:
            return cls.empty()
        (start,) = struct.unpack("<d", data[12:20])
        runs = np.frombuffer(data[20:], dtype="<f8")
        edges = start + np.concatenate([[0.0], np.cumsum(runs)])
        return cls(edges[0::2].copy(), edges[1::2].copy())
