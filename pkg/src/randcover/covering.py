"""Sampled coverings B(omega_k, r_k) and finite surrogates of the limsup set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .intervals import IntervalUnion
from .measures import CantorScheme, sample_points
from .radii import RadiiSequence

MAX_MATERIALISED = 50_000_000


@dataclass
class CoveringRealization:
    """One omega: centres are re-derived from the seed, never stored on disk."""

    scheme: CantorScheme
    radii: RadiiSequence
    K: int
    seed: int
    threads: int = 1
    _centers: np.ndarray | None = field(default=None, repr=False)

    @property
    def centers(self) -> np.ndarray:
        if self._centers is None:
            if self.K == 0:
                self._centers = np.empty(0)
            elif self.K > MAX_MATERIALISED:
                raise InvalidParameter(f"K = {self.K} too large to materialise centres")
            else:
                self._centers = sample_points(self.scheme, int(self.K), self.seed, self.threads)
        return self._centers

    @property
    def radii_prefix(self) -> np.ndarray:
        return self.radii.prefix(int(self.K)) if self.K else np.empty(0)

    def manifest(self) -> dict:
        return {"scheme": {"kind": self.scheme.kind, "parameters": self.scheme.parameters,
                           "depth_limit": self.scheme.depth_limit},
                "radii": self.radii.rule(), "seed": int(self.seed), "K": int(self.K)}


def realize(scheme: CantorScheme, radii: RadiiSequence, K: int, seed: int,
            threads: int = 1) -> CoveringRealization:
    if K < 0:
        raise InvalidParameter("K must be non-negative")
    if K > radii.length:
        raise InvalidParameter("radii sequence shorter than K")
    return CoveringRealization(scheme, radii, K, int(seed), threads)


def union_range(real: CoveringRealization, start: int, stop: int) -> IntervalUnion:
    """Canonical union of B(omega_k, r_k) for start <= k <= stop (1-based)."""
    if real.K == 0:
        return IntervalUnion.empty()
    if not 1 <= start <= stop <= real.K:
        raise InvalidParameter(f"bad index range [{start}, {stop}] for K = {real.K}")
    c = real.centers[start - 1:stop]
    r = real.radii_prefix[start - 1:stop]
    return IntervalUnion.from_balls(c, r)


def geometric_blocks(K: int, n0: int = 1000, m: int = 4) -> list[int]:
    """n_j = ceil(n0 * rho**j) with rho = (K / n0)**(1/m); n_m = K."""
    if not 0 <= n0 < K:
        raise InvalidParameter("need 0 <= n0 < K")
    base = max(n0, 1)
    rho = (K / base) ** (1.0 / m)
    bounds = [n0] + [min(K, int(math.ceil(base * rho ** j))) for j in range(1, m)] + [K]
    for a, b in zip(bounds, bounds[1:]):
        if b <= a:
            raise InvalidParameter("block schedule collapses; lower m or n0")
    return bounds


@dataclass
class LimsupApprox:
    union: IntervalUnion
    blocks: list[int]
    degenerate: bool = False


def limsup_approx(real: CoveringRealization, block_bounds) -> LimsupApprox:
    """E_m = intersection over j of the union of balls with n_{j-1} < k <= n_j.

    A single block is accepted but flagged degenerate (it is just a union).
    """
    bounds = [int(b) for b in block_bounds]
    if len(bounds) < 2:
        raise InvalidParameter("need at least one block (two bounds)")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise InvalidParameter("block bounds must increase")
    if bounds[-1] > real.K or bounds[0] < 0:
        raise InvalidParameter("block bounds outside [0, K]")
    out = None
    for a, b in zip(bounds, bounds[1:]):
        u = union_range(real, a + 1, b)
        out = u if out is None else out.intersection(u)
        if len(out) == 0:
            break
    return LimsupApprox(out, bounds, degenerate=len(bounds) == 2)


def multiplicity_profile(real: CoveringRealization, x_grid) -> np.ndarray:
    """Number of k with |x - omega_k| < r_k at each grid point."""
    x = np.asarray(x_grid, dtype=float)
    if real.K == 0:
        return np.zeros(x.shape, dtype=np.int64)
    c, r = real.centers, real.radii_prefix
    lefts = np.sort(c - r)
    rights = np.sort(c + r)
    opened = np.searchsorted(lefts, x, side="left")
    closed = np.searchsorted(rights, x, side="right")
    return (opened - closed).astype(np.int64)
