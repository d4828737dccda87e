"""Cantor-type generating measures on the line.

A scheme is a base interval plus one :class:`LevelSpec` per construction
level.  Every built-in scheme is *level-homogeneous*: all construction
intervals of a given level are translates of each other and split the same
way, so a level spec describes the whole level.

Points of the support are handled in two forms.  Plain floats are enough
for fixed-ratio schemes, but lengths in the spaced construction fall below
float resolution after two or three levels, so the sampler also produces
*addresses* (one child index per level, stored as float64) and
:func:`ball_mass` evaluates masses in cylinder-local coordinates when given
an address.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConstructionDegenerate, InvalidParameter

CHUNK = 1 << 15
MIN_LENGTH = 1e-300
_EPS = 1e-12


@dataclass(frozen=True)
class LevelSpec:
    """How each construction interval of the previous level is split.

    Either ``child_offsets``/``child_weights`` are given explicitly, or
    ``spacing`` is set and the children sit at ``i * spacing`` with uniform
    weights (used when the branching number is too large to list).
    """

    branching: int
    child_length: float
    child_offsets: tuple[float, ...] | None = None
    child_weights: tuple[float, ...] | None = None
    spacing: float | None = None

    def __post_init__(self):
        if self.branching < 1:
            raise InvalidParameter("branching must be positive")
        if not self.child_length > 0:
            raise InvalidParameter("child_length must be positive")
        if self.spacing is None:
            if self.child_offsets is None or self.child_weights is None:
                raise InvalidParameter("explicit level needs offsets and weights")
            if not (len(self.child_offsets) == len(self.child_weights) == self.branching):
                raise InvalidParameter("offsets/weights length must equal branching")
            offs = self.child_offsets
            for a, b in zip(offs, offs[1:]):
                if a + self.child_length > b * (1 + _EPS) + _EPS * self.child_length:
                    raise InvalidParameter("children overlap or are unsorted")
            if any(w <= 0 for w in self.child_weights):
                raise InvalidParameter("child weights must be positive")
            if abs(math.fsum(self.child_weights) - 1.0) > 1e-12:
                raise InvalidParameter("child weights must sum to 1")
        elif self.spacing < self.child_length * (1 - _EPS):
            raise InvalidParameter("spacing smaller than child length")

    @property
    def uniform(self) -> bool:
        if self.spacing is not None:
            return True
        w0 = self.child_weights[0]
        return all(abs(w - w0) <= 1e-15 for w in self.child_weights)

    @property
    def span(self) -> float:
        """Right end of the last child relative to the parent's left end."""
        return self.offset(self.branching - 1) + self.child_length

    def offset(self, i):
        if self.spacing is not None:
            return np.asarray(i, dtype=float) * self.spacing
        return np.asarray(self.child_offsets)[np.asarray(i, dtype=np.int64)]

    def weight(self, i):
        if self.spacing is not None:
            return np.full(np.shape(i), 1.0 / float(self.branching))
        return np.asarray(self.child_weights)[np.asarray(i, dtype=np.int64)]

    @property
    def max_weight(self) -> float:
        if self.spacing is not None:
            return 1.0 / float(self.branching)
        return max(self.child_weights)

    @property
    def sum_sq_weights(self) -> float:
        if self.spacing is not None:
            return 1.0 / float(self.branching)
        return math.fsum(w * w for w in self.child_weights)

    @property
    def min_gap(self) -> float:
        if self.branching == 1:
            return math.inf
        if self.spacing is not None:
            return self.spacing - self.child_length
        offs = self.child_offsets
        return min(b - a - self.child_length for a, b in zip(offs, offs[1:]))

    def scaled(self, lam: float) -> "LevelSpec":
        return LevelSpec(
            branching=self.branching,
            child_length=self.child_length * lam,
            child_offsets=None if self.child_offsets is None
            else tuple(o * lam for o in self.child_offsets),
            child_weights=self.child_weights,
            spacing=None if self.spacing is None else self.spacing * lam,
        )


@dataclass(frozen=True)
class CantorScheme:
    kind: str
    parameters: dict
    left: float
    ell0: float
    levels: tuple[LevelSpec, ...]
    uniform_cylinders: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        prev = self.ell0
        for n, spec in enumerate(self.levels, start=1):
            if spec.span > prev * (1 + 1e-9):
                raise InvalidParameter(f"level {n} children exceed parent length")
            if spec.child_length >= prev:
                raise InvalidParameter(f"level {n} does not contract")
            prev = spec.child_length

    @property
    def depth_limit(self) -> int:
        return len(self.levels)

    @property
    def lengths(self) -> np.ndarray:
        """ell_n for n = 0..depth_limit."""
        return np.array([self.ell0] + [s.child_length for s in self.levels])

    @property
    def hull(self) -> tuple[float, float]:
        return (self.left, self.left + self.ell0)

    def level_mass(self, n: int) -> float:
        """Mass of a depth-n cylinder (uniform-weight levels only)."""
        m = 1.0
        for spec in self.levels[:n]:
            if not spec.uniform:
                raise InvalidParameter("level_mass needs uniform weights")
            m /= float(spec.branching)
        return m

    def cylinder_count(self, n: int) -> float:
        return float(np.prod([float(s.branching) for s in self.levels[:n]]))

    def cylinders(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Left endpoints and masses of all depth-n construction intervals."""
        if self.cylinder_count(n) > 5e7:
            raise InvalidParameter(f"too many cylinders at depth {n} to enumerate")
        lefts = np.array([self.left])
        mass = np.array([1.0])
        for spec in self.levels[:n]:
            idx = np.arange(spec.branching)
            lefts = (lefts[:, None] + spec.offset(idx)[None, :]).ravel()
            mass = (mass[:, None] * spec.weight(idx)[None, :]).ravel()
        return lefts, mass

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "parameters": self.parameters,
             "depth_limit": self.depth_limit},
            sort_keys=True,
        )


# -- builders ---------------------------------------------------------------

def _binary_levels(ratios: Sequence[float], ell0: float) -> tuple[LevelSpec, ...]:
    levels = []
    parent = ell0
    for rho in ratios:
        child = parent * rho
        levels.append(LevelSpec(2, child, (0.0, parent - child), (0.5, 0.5)))
        parent = child
    return tuple(levels)


def _depth_for_ratio(ratio, ell0):
    return min(40, int(math.log(MIN_LENGTH / ell0) / math.log(ratio)))


def build_middle_cantor(ratio: float, ell0: float = 1.0, depth: int | None = None,
                        left: float = 0.0) -> CantorScheme:
    """Two equal-weight children of relative length ``ratio`` at each level."""
    if not 0 < ratio < 0.5:
        raise InvalidParameter("ratio must lie in (0, 1/2)")
    if ell0 <= 0:
        raise InvalidParameter("ell0 must be positive")
    depth = _depth_for_ratio(ratio, ell0) if depth is None else int(depth)
    if depth < 1:
        raise InvalidParameter("depth must be at least 1")
    return CantorScheme(
        kind="middle",
        parameters={"ratio": ratio, "ell0": ell0, "left": left},
        left=left, ell0=ell0,
        levels=_binary_levels([ratio] * depth, ell0),
        metadata={"dimension": math.log(2) / -math.log(ratio)},
    )


def oscillating_ratios(alpha, beta, block_bounds, depth):
    """Per-level ratio: alpha on even blocks [b_2k, b_2k+1), beta on odd ones."""
    ratios = []
    for n in range(1, depth + 1):
        k = int(np.searchsorted(block_bounds, n, side="right")) - 1
        ratios.append(alpha if k < 0 or k % 2 == 0 else beta)
    return ratios


def build_oscillating_cantor(alpha: float, beta: float,
                             block_bounds: Sequence[int] | None = None,
                             ell0: float = 1.0, depth: int = 40,
                             left: float = 0.0) -> CantorScheme:
    if not (0 < alpha < 0.5 and 0 < beta < 0.5):
        raise InvalidParameter("alpha and beta must lie in (0, 1/2)")
    if block_bounds is None:
        block_bounds = [2 ** k for k in range(0, 16)]
    block_bounds = [int(b) for b in block_bounds]
    if any(b2 <= b1 for b1, b2 in zip(block_bounds, block_bounds[1:])):
        raise InvalidParameter("block_bounds must be strictly increasing")
    ratios = oscillating_ratios(alpha, beta, block_bounds, depth)
    s = math.log(2) / -math.log(alpha)
    u = math.log(2) / -math.log(beta)
    return CantorScheme(
        kind="oscillating",
        parameters={"alpha": alpha, "beta": beta, "block_bounds": block_bounds,
                    "ell0": ell0, "left": left},
        left=left, ell0=ell0,
        levels=_binary_levels(ratios, ell0),
        metadata={"s": s, "u": u, "consistent": s < u,
                  "frostman_exponent": min(s, u), "upper_exponent": max(s, u)},
    )


def spaced_exponent(s: float, u: float) -> float:
    """Exponent v with ell_{k+1} = ell_k ** v."""
    return u * (1 - s) / (s * (1 - u))


def build_spaced_cantor(s: float, u: float, ell0: float,
                        depth: int | None = None) -> CantorScheme:
    """Cantor set with lengths ell_{k+1} = ell_k**v and spacing L_k = ell_k**(s/u).

    Level k keeps the leftmost segment of length ell_k out of each of the
    N_k = floor(ell_{k-1} / L_k) consecutive pieces of length L_k.
    """
    if not 0 < s < u < 1:
        raise InvalidParameter("need 0 < s < u < 1")
    if not 0 < ell0 < 1:
        raise InvalidParameter("ell0 must lie in (0, 1)")
    v = spaced_exponent(s, u)
    q = (1 - s) / (1 - u)
    levels = []
    ell_prev = ell0
    k = 0
    while depth is None or k < depth:
        ell_k = ell_prev ** v
        if ell_k < MIN_LENGTH:
            if depth is not None:
                raise InvalidParameter(
                    f"depth {depth} not realizable: ell_{k + 1} underflows")
            break
        big_l = ell_prev ** q
        n_k = int(math.floor(ell_prev / big_l))
        if n_k < 2:
            raise ConstructionDegenerate(k + 1, n_k)
        levels.append(LevelSpec(n_k, ell_k, spacing=big_l))
        ell_prev = ell_k
        k += 1
    if not levels:
        raise InvalidParameter("no realizable level")
    return CantorScheme(
        kind="spaced",
        parameters={"s": s, "u": u, "ell0": ell0},
        left=0.0, ell0=ell0, levels=tuple(levels),
        metadata={"s": s, "u": u, "v": v,
                  "L": [lv.spacing for lv in levels],
                  "N": [lv.branching for lv in levels]},
    )


def build_lebesgue(a: float = 0.0, b: float = 1.0, depth: int = 52) -> CantorScheme:
    """Uniform measure on [a, b] as the dyadic binary scheme."""
    if not a < b:
        raise InvalidParameter("need a < b")
    ell0 = b - a
    levels = []
    parent = ell0
    for _ in range(depth):
        child = parent / 2
        levels.append(LevelSpec(2, child, (0.0, child), (0.5, 0.5)))
        parent = child
    return CantorScheme(
        kind="lebesgue", parameters={"a": a, "b": b}, left=a, ell0=ell0,
        levels=tuple(levels), uniform_cylinders=True, metadata={"dimension": 1.0},
    )


def scale_scheme(scheme: CantorScheme, lam: float) -> CantorScheme:
    """Image of the scheme under x -> lam * x."""
    if lam <= 0:
        raise InvalidParameter("scale must be positive")
    params = dict(scheme.parameters)
    params["scale"] = params.get("scale", 1.0) * lam
    return replace(
        scheme, parameters=params, left=scheme.left * lam, ell0=scheme.ell0 * lam,
        levels=tuple(lv.scaled(lam) for lv in scheme.levels),
    )


_BUILDERS = {
    "middle": lambda p, d: build_middle_cantor(p["ratio"], p["ell0"], d, p.get("left", 0.0)),
    "oscillating": lambda p, d: build_oscillating_cantor(
        p["alpha"], p["beta"], p["block_bounds"], p["ell0"], d, p.get("left", 0.0)),
    "spaced": lambda p, d: build_spaced_cantor(p["s"], p["u"], p["ell0"], d),
    "lebesgue": lambda p, d: build_lebesgue(p["a"], p["b"], d),
}


def scheme_from_dict(doc: dict) -> CantorScheme:
    kind = doc["kind"]
    if kind not in _BUILDERS:
        raise InvalidParameter(f"unknown scheme kind {kind!r}")
    params = dict(doc["parameters"])
    lam = params.pop("scale", None)
    scheme = _BUILDERS[kind](params, doc.get("depth_limit"))
    return scheme if lam is None else scale_scheme(scheme, lam)


def scheme_from_json(text: str) -> CantorScheme:
    return scheme_from_dict(json.loads(text))


# -- masses ------------------------------------------------------------------

def _local_mass(scheme: CantorScheme, level: int, lo: float, hi: float,
                stop_len: float = 0.0) -> tuple[float, float]:
    """Mass bracket of (lo, hi) for a normalised level-``level`` cylinder at 0."""
    lengths = scheme.lengths
    depth = scheme.depth_limit
    acc_lo = acc_hi = 0.0
    width = hi - lo
    stack = [(level, 0.0, 1.0)]
    while stack:
        n, left, w = stack.pop()
        ln = lengths[n]
        c0, c1 = left, left + ln
        tol = _EPS * min(ln, width)
        if c1 <= lo + tol or c0 >= hi - tol:
            continue
        if c0 >= lo - tol and c1 <= hi + tol:
            acc_lo += w
            acc_hi += w
            continue
        if scheme.uniform_cylinders:
            frac = (min(c1, hi) - max(c0, lo)) / ln
            acc_lo += w * frac
            acc_hi += w * frac
            continue
        if n >= depth or ln < stop_len:
            acc_hi += w
            continue
        spec = scheme.levels[n]
        cl = spec.child_length
        if spec.spacing is not None:
            sp = spec.spacing
            nb = float(spec.branching)
            o_lo = max(0.0, math.floor((lo - left - cl) / sp) + 1)
            o_hi = min(nb - 1, math.ceil((hi - left) / sp) - 1)
            if o_lo > o_hi:
                continue
            f_lo = max(o_lo, math.ceil((lo - left - tol) / sp))
            f_hi = min(o_hi, math.floor((hi - left - cl + tol) / sp))
            wc = w / nb
            if f_hi >= f_lo:
                cnt = f_hi - f_lo + 1
                acc_lo += wc * cnt
                acc_hi += wc * cnt
                partial = [i for i in (o_lo, o_lo + 1, o_hi - 1, o_hi)
                           if o_lo <= i <= o_hi and not f_lo <= i <= f_hi]
            else:
                partial = [o_lo] if o_lo == o_hi else [o_lo, o_hi]
            for i in sorted(set(partial)):
                stack.append((n + 1, left + i * sp, wc))
        else:
            for o, wc in zip(spec.child_offsets, spec.child_weights):
                stack.append((n + 1, left + o, w * wc))
    return acc_lo, min(acc_hi, 1.0)


def interval_mass_bounds(scheme: CantorScheme, lo: float, hi: float) -> tuple[float, float]:
    """Bracket for mu((lo, hi)), exact when the descent resolves every cylinder."""
    if hi <= lo:
        return 0.0, 0.0
    stop = (hi - lo) * 1e-3
    return _local_mass(scheme, 0, lo - scheme.left, hi - scheme.left, stop)


def interval_mass(scheme: CantorScheme, lo: float, hi: float) -> float:
    a, b = interval_mass_bounds(scheme, lo, hi)
    return 0.5 * (a + b)


def _relative_positions(scheme: CantorScheme, digits: np.ndarray) -> np.ndarray:
    """rel[:, j] = position of the address's left end inside its level-j cylinder."""
    digits = np.atleast_2d(digits)
    depth = digits.shape[1]
    offs = np.empty(digits.shape, dtype=float)
    for n in range(depth):
        offs[:, n] = scheme.levels[n].offset(digits[:, n])
    rel = np.zeros((digits.shape[0], depth + 1))
    rel[:, :depth] = np.cumsum(offs[:, ::-1], axis=1)[:, ::-1]
    return rel


def _address_ball_bounds(scheme, digits, r):
    """Mass brackets of B(x, r) for points given by addresses (vectorised).

    ``r`` is a scalar or one radius per address.
    """
    digits = np.atleast_2d(digits)
    npts, depth = digits.shape
    rel = _relative_positions(scheme, digits)
    lengths = scheme.lengths
    prefix = np.ones(npts)
    lo_out = np.zeros(npts)
    hi_out = np.zeros(npts)
    active = np.ones(npts, dtype=bool)
    r = np.broadcast_to(np.asarray(r, dtype=float), (npts,))
    for j in range(depth):
        spec = scheme.levels[j]
        i = digits[:, j]
        c = rel[:, j]
        cl = spec.child_length
        nb = float(spec.branching)
        left_ok = i <= 0
        right_ok = i >= nb - 1
        if spec.branching > 1:
            im1 = np.maximum(i - 1, 0)
            ip1 = np.minimum(i + 1, nb - 1)
            left_ok |= (c - r) >= spec.offset(im1) + cl
            right_ok |= (c + r) <= spec.offset(ip1)
        go = active & left_ok & right_ok
        stop = active & ~go
        for p in np.flatnonzero(stop):
            a, b = _local_mass(scheme, j, rel[p, j] - r[p], rel[p, j] + r[p])
            lo_out[p] = prefix[p] * a
            hi_out[p] = prefix[p] * b
        active = go
        prefix[go] *= spec.weight(i[go])
    if active.any():
        ld = lengths[depth]
        ra = r[active]
        frac = np.minimum(ra, ld) / ld
        exact = np.full(ra.shape, True) if scheme.uniform_cylinders else ra >= ld
        lo_out[active] = prefix[active] * np.where(exact, frac, 0.0)
        hi_out[active] = prefix[active] * np.where(exact, frac, 1.0)
    return lo_out, hi_out


def ball_mass_bounds(scheme: CantorScheme, x, r: float):
    """Bracket for mu(B(x, r)); ``x`` is a float, float array or address array."""
    x = np.asarray(x)
    if x.ndim == 2:
        return _address_ball_bounds(scheme, x, r)
    if x.ndim == 0:
        return interval_mass_bounds(scheme, float(x) - r, float(x) + r)
    pairs = [interval_mass_bounds(scheme, xi - r, xi + r) for xi in x.tolist()]
    arr = np.array(pairs).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def ball_mass(scheme: CantorScheme, x, r: float):
    lo, hi = ball_mass_bounds(scheme, x, r)
    if np.ndim(lo) == 0:
        return 0.5 * (lo + hi)
    return 0.5 * (np.asarray(lo) + np.asarray(hi))


# -- sampling ----------------------------------------------------------------

def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(chunk,)))


def _sample_digits(scheme, rng, count, depth):
    digits = np.empty((count, depth))
    for n in range(depth):
        spec = scheme.levels[n]
        if spec.branching == 1:
            digits[:, n] = 0
        elif spec.uniform:
            nb = spec.branching
            if nb < 2 ** 62:
                digits[:, n] = rng.integers(0, nb, size=count)
            else:
                digits[:, n] = np.floor(rng.random(count) * float(nb))
        else:
            digits[:, n] = rng.choice(spec.branching, size=count, p=spec.child_weights)
    return digits


def _chunks(count):
    return [(c, min(CHUNK, count - c * CHUNK)) for c in range((count + CHUNK - 1) // CHUNK)]


def sample_addresses(scheme: CantorScheme, count: int, seed: int,
                     depth: int | None = None, threads: int = 1) -> np.ndarray:
    """i.i.d. mu-distributed addresses, shape (count, depth)."""
    if count < 1:
        raise InvalidParameter("count must be at least 1")
    depth = scheme.depth_limit if depth is None else depth

    def work(job):
        c, n = job
        return _sample_digits(scheme, _chunk_rng(seed, c), n, depth)

    jobs = _chunks(count)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    return np.concatenate(parts)


def addresses_to_points(scheme: CantorScheme, digits: np.ndarray) -> np.ndarray:
    """Left endpoints of the addressed cylinders."""
    return scheme.left + _relative_positions(scheme, digits)[:, 0]


def sample_points(scheme: CantorScheme, count: int, seed: int,
                  threads: int = 1) -> np.ndarray:
    """i.i.d. mu-distributed points (left endpoints of the deepest cylinder).

    Chunks draw from independent streams keyed by (seed, chunk index), so the
    output does not depend on ``threads``.
    """
    if count < 1:
        raise InvalidParameter("count must be at least 1")

    if scheme.uniform_cylinders:
        def work(job):
            c, n = job
            return scheme.left + scheme.ell0 * _chunk_rng(seed, c).random(n)
    else:
        def work(job):
            c, n = job
            d = _sample_digits(scheme, _chunk_rng(seed, c), n, scheme.depth_limit)
            return addresses_to_points(scheme, d)

    jobs = _chunks(count)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, jobs))
    else:
        parts = [work(j) for j in jobs]
    return np.concatenate(parts)


# -- Frostman parameters -----------------------------------------------------

def frostman_fit(scheme: CantorScheme, x_samples, r_grid) -> tuple[float, float]:
    """Fit (C, s) with mu(B(x, r)) <= C r**s on all sampled pairs.

    The exponent is the least-squares slope of the upper envelope
    r -> max_x mu(B(x, r)); C is then the largest observed ratio.
    """
    r_grid = np.unique(np.asarray(r_grid, dtype=float))
    if r_grid.size < 2:
        raise InvalidParameter("frostman_fit needs at least two scales")
    x_samples = np.asarray(x_samples)
    if x_samples.size == 0:
        raise InvalidParameter("no sample points")
    masses = np.array([np.atleast_1d(ball_mass_bounds(scheme, x_samples, r)[1])
                       for r in r_grid])
    env = masses.max(axis=1)
    keep = (env > 0) & (env < 1)
    if keep.sum() < 2:
        keep = env > 0
    s, _ = np.polyfit(np.log(r_grid[keep]), np.log(env[keep]), 1)
    ratios = masses / r_grid[:, None] ** s
    return float(ratios.max()), float(s)


def certified_frostman_constant(scheme: CantorScheme, s: float) -> float:
    """C with mu(B(x, r)) <= C r**s for all x and all r >= G_D / 2.

    G_n is the smallest gap between distinct depth-n construction intervals.
    A ball of diameter below G_n meets at most one depth-n interval, which
    bounds its mass by the largest depth-n weight.  For self-similar schemes
    the per-level constants are identical, so the bound holds at all scales.
    """
    if scheme.uniform_cylinders:
        return (2.0 / scheme.ell0) ** s
    gap = math.inf
    weight = 1.0
    best = 0.0
    for spec in scheme.levels:
        gap = min(gap, spec.min_gap)
        if not gap > 0:
            return math.inf
        best = max(best, weight / (gap / 2) ** s)
        weight *= spec.max_weight
    return best
