"""Riesz t-potentials and t-energies of Cantor-type measures with certified brackets.

Every built-in scheme is level-homogeneous with uniform child weights, so all
depth-n cylinders carry translates of one normalised measure nu_n.  The
quadrature therefore only needs

* E(n)    = I_t(nu_n), the self-energy of a depth-n cylinder, and
* J(n, d) = J_t(nu_n, nu_n + d), the mutual energy of two depth-n cylinders
  whose left ends are d apart,

and both are computed by recursive refinement with memoisation.  A pair of
cells is resolved as soon as its kernel bracket [dmax**-t, dmin**-t] is
tight; otherwise it is split into children.  At the leaf depth either the
cells are treated as uniform intervals (closed forms, this computes the
energy of the truncated measure mu_D) or bounded with the Frostman potential
bound sup phi(nu) <= K * m**(-t/s), K = C**(t/s) * s / (s - t), which holds
for the infinite construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InvalidParameter, PrecisionNotReached,
                     ZeroMeasureRestriction)
from .intervals import IntervalUnion
from .measures import (CantorScheme, _local_mass, addresses_to_points,
                       ball_mass_bounds, certified_frostman_constant,
                       interval_mass_bounds, sample_addresses, sample_points)
from .radii import RadiiSequence

DIVERGENCE_THRESHOLD = 1e12
MAX_BRANCHING = 4096
METHODS = ("recursive-exact", "cylinder-quadrature", "monte-carlo")


@dataclass
class EnergyReport:
    value: float | None
    lower: float
    upper: float
    method: str
    error_bound: float
    diverged: bool = False
    budget: int = 0
    depth: int = 0

    def csv_row(self) -> dict:
        return {"method": self.method, "value": "" if self.value is None else self.value,
                "lower": self.lower, "upper": self.upper, "error_bound": self.error_bound,
                "diverged": int(self.diverged), "budget": self.budget, "depth": self.depth}


ENERGY_CSV_HEADER = ["method", "value", "lower", "upper", "error_bound", "diverged",
                     "budget", "depth"]


def _make_report(lo, hi, method, used, depth, tol=None) -> EnergyReport:
    if lo > DIVERGENCE_THRESHOLD:
        return EnergyReport(None, float(lo), math.inf, method, math.inf, True, used, depth)
    if tol is not None and not (hi - lo) <= tol * lo:
        raise PrecisionNotReached(float(lo), float(hi),
                                  f"{method}: bracket [{lo:.6g}, {hi:.6g}] wider than tolerance {tol}")
    if not math.isfinite(hi):
        return EnergyReport(None, float(lo), math.inf, method, math.inf, False, used, depth)
    lo, hi = float(lo), float(hi)
    return EnergyReport(0.5 * (lo + hi), lo, hi, method, 0.5 * (hi - lo), False, int(used), depth)


# -- closed forms for uniform intervals ---------------------------------------

def _g(z, t):
    z = np.abs(np.asarray(z, dtype=float))
    if t == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)) - z, 0.0)
    return z ** (2 - t) / ((1 - t) * (2 - t))


def uniform_pair_energy(a1, b1, a2, b2, t):
    """Mutual t-energy of the normalised uniform measures on [a1,b1] and [a2,b2]."""
    a1, b1, a2, b2 = (np.asarray(v, dtype=float) for v in (a1, b1, a2, b2))
    overlap = (np.minimum(b1, b2) - np.maximum(a1, a2)) > 0
    raw = -(_g(b1 - b2, t) - _g(b1 - a2, t) - _g(a1 - b2, t) + _g(a1 - a2, t))
    out = raw / ((b1 - a1) * (b2 - a2))
    if t >= 1:
        out = np.where(overlap, np.inf, out)
    return out


def uniform_self_energy(length: float, t: float) -> float:
    if t >= 1:
        return math.inf
    return 2 * length ** -t / ((1 - t) * (2 - t))


def uniform_potential(x, a, b, t):
    """Potential at x of the normalised uniform measure on [a, b]."""
    x = np.asarray(x, dtype=float)
    if t >= 1:
        inside = (x >= a) & (x <= b)
        val = np.abs(np.abs(x - a) ** (1 - t) - np.abs(x - b) ** (1 - t)) / (abs(1 - t) * (b - a)) \
            if t != 1 else np.abs(np.log(np.abs(x - a)) - np.log(np.abs(x - b))) / (b - a)
        return np.where(inside, np.inf, val)

    def G(z):
        return np.sign(z) * np.abs(z) ** (1 - t) / (1 - t)

    return (G(x - a) - G(x - b)) / (b - a)


# -- Frostman parameters of the built-in models --------------------------------

def frostman_parameters(scheme: CantorScheme) -> tuple[float, float]:
    """Certified (C, s) with mu(B(x, r)) <= C r**s for the built-in models."""
    if scheme.uniform_cylinders or scheme.kind == "lebesgue":
        return 2.0 / scheme.ell0, 1.0
    if scheme.kind == "middle":
        s = scheme.metadata["dimension"]
    elif scheme.kind == "oscillating":
        s = scheme.metadata["frostman_exponent"]
    elif scheme.kind == "spaced":
        s = scheme.parameters["s"]
    else:
        raise InvalidParameter(f"no Frostman exponent known for {scheme.kind!r}")
    return certified_frostman_constant(scheme, s), s


def lemma_constant(C: float, s: float, t: float) -> float:
    """K = C**(t/s) * s / (s - t); infinite unless 0 < t < s."""
    if not 0 < t < s:
        return math.inf
    return C ** (t / s) * s / (s - t)


# -- cylinder-pair engine --------------------------------------------------------

class _Engine:
    def __init__(self, scheme: CantorScheme, t: float, leaf: str = "frostman",
                 depth: int | None = None, rel_tol: float = 1e-3, budget: int = 400_000,
                 frostman: tuple[float, float] | None = None):
        if not t > 0:
            raise InvalidParameter("t must be positive")
        if leaf not in ("frostman", "uniform"):
            raise InvalidParameter("leaf must be 'frostman' or 'uniform'")
        D = scheme.depth_limit if depth is None else int(depth)
        if not 0 <= D <= scheme.depth_limit:
            raise InvalidParameter("depth outside the realizable range")
        for spec in scheme.levels[:D]:
            if not spec.uniform:
                raise InvalidParameter("energy quadrature needs uniform child weights")
            if spec.branching > MAX_BRANCHING:
                raise InvalidParameter(
                    f"branching {spec.branching} too large for pair quadrature; truncate depth")
        self.scheme, self.t, self.leaf, self.D = scheme, t, leaf, D
        self.rel_tol, self.budget = rel_tol, budget
        self.lengths = scheme.lengths
        self.exact = scheme.uniform_cylinders
        self.C, self.s = frostman if frostman is not None else frostman_parameters(scheme)
        self.K = lemma_constant(self.C, self.s, t)
        self.mass = [1.0]
        for spec in scheme.levels[:D]:
            self.mass.append(self.mass[-1] / spec.branching)
        self.nodes = 0
        self._E: dict = {}
        self._J: dict = {}
        self._diffs: dict = {}

    # normalised sup-potential bound for nu_n (Frostman leaf only)
    def sup_phi(self, n: int) -> float:
        if self.leaf != "frostman":
            return math.inf
        return self.K * self.mass[n] ** (-self.t / self.s)

    def _kernel(self, dmin, dmax):
        t = self.t
        return dmax ** -t, (dmin ** -t if dmin > 0 else math.inf)

    def _resolved(self, dmin, dmax) -> bool:
        return dmin > 0 and (dmax / dmin) ** self.t - 1 <= self.rel_tol

    def _level_diffs(self, n: int):
        """Distinct child offset differences o_j - o_i at level n+1 with counts."""
        if n not in self._diffs:
            spec = self.scheme.levels[n]
            nb = spec.branching
            if spec.spacing is not None:
                k = np.arange(-(nb - 1), nb)
                vals, cnt = k * spec.spacing, (nb - np.abs(k)).astype(float)
            else:
                o = np.asarray(spec.child_offsets)
                diff = (o[None, :] - o[:, None]).ravel()
                q = np.round(diff / spec.child_length, 9)
                _, idx, cnt = np.unique(q, return_index=True, return_counts=True)
                vals, cnt = diff[idx], cnt.astype(float)
            self._diffs[n] = (vals, cnt, 1.0 / (nb * nb))
        return self._diffs[n]

    def E(self, n: int) -> tuple[float, float]:
        if n in self._E:
            return self._E[n]
        ln = self.lengths[n]
        if self.exact or (self.leaf == "uniform" and n == self.D):
            v = uniform_self_energy(ln, self.t)
            out = (v, v)
        elif n == self.D:
            out = (ln ** -self.t, self.sup_phi(n))
        else:
            lo, hi = self._combine(n, 0.0)
            out = (lo, hi)
        self._E[n] = out
        return out

    def J(self, n: int, d: float) -> tuple[float, float]:
        d = abs(d)
        ln = self.lengths[n]
        if d <= 1e-12 * ln:
            return self.E(n)
        key = (n, round(d / ln, 9))
        if key in self._J:
            return self._J[key]
        self.nodes += 1
        dmin, dmax = d - ln, d + ln
        if self.exact or (self.leaf == "uniform" and n == self.D):
            v = float(uniform_pair_energy(0.0, ln, d, d + ln, self.t))
            out = (v, v)
        elif self._resolved(dmin, dmax) or (n == self.D and dmin > 0):
            out = self._kernel(dmin, dmax)
        elif n == self.D or self.nodes > self.budget:
            lo, hi = self._kernel(max(dmin, 0.0), dmax)
            out = (lo, min(hi, self.sup_phi(n)))
        else:
            out = self._combine(n, d)
        self._J[key] = out
        return out

    def _combine(self, n: int, d: float) -> tuple[float, float]:
        vals, cnt, w2 = self._level_diffs(n)
        lo = hi = 0.0
        for v, c in zip((d + vals).tolist(), cnt.tolist()):
            a, b = self.J(n + 1, v)
            lo += c * a
            hi += c * b
        return w2 * lo, w2 * hi

    def pair(self, n: int, x: float, m: int, y: float) -> tuple[float, float]:
        """Mutual energy of the normalised cylinder measures at (n, x) and (m, y)."""
        if n == m:
            return self.J(n, y - x)
        if n > m:
            n, x, m, y = m, y, n, x
        lx, ly = self.lengths[n], self.lengths[m]
        dmin = max(0.0, max(x, y) - min(x + lx, y + ly))
        dmax = max(x + lx, y + ly) - min(x, y)
        if self.exact:
            v = float(uniform_pair_energy(x, x + lx, y, y + ly, self.t))
            return v, v
        if self._resolved(dmin, dmax):
            return self._kernel(dmin, dmax)
        if dmin >= 0 and (x + lx <= y or y + ly <= x) and self.nodes > self.budget:
            lo, hi = self._kernel(dmin, dmax)
            return lo, min(hi, self.K * self.mass[n] ** (-self.t / self.s) if self.leaf == "frostman" else hi)
        self.nodes += 1
        spec = self.scheme.levels[n]
        idx = np.arange(spec.branching)
        offs = spec.offset(idx)
        keep = (x + offs + spec.child_length > y - 1e-15) & (x + offs < y + ly + 1e-15)
        lo = hi = 0.0
        # children far from (m, y) are bracketed directly
        for o, near in zip(offs.tolist(), keep.tolist()):
            cx = x + o
            if near or not self._resolved(*self._gap(cx, spec.child_length, y, ly)):
                a, b = self.pair(n + 1, cx, m, y)
            else:
                a, b = self._kernel(*self._gap(cx, spec.child_length, y, ly))
            lo += a
            hi += b
        w = 1.0 / spec.branching
        return w * lo, w * hi

    @staticmethod
    def _gap(x, lx, y, ly):
        dmin = max(0.0, max(x, y) - min(x + lx, y + ly))
        dmax = max(x + lx, y + ly) - min(x, y)
        return dmin, dmax


# -- measure views ---------------------------------------------------------------

@dataclass
class MeasureView:
    """The normalised restriction mu_A for an interval A = [lo, hi]."""

    scheme: CantorScheme
    lo: float
    hi: float
    mass_lo: float
    mass_hi: float

    @property
    def is_whole(self) -> bool:
        a, b = self.scheme.hull
        return self.lo <= a and self.hi >= b

    def interval_mass(self, a: float, b: float) -> float:
        lo, hi = max(a, self.lo), min(b, self.hi)
        if hi <= lo:
            return 0.0
        m_lo, m_hi = interval_mass_bounds(self.scheme, lo, hi)
        return 0.5 * (m_lo + m_hi) / (0.5 * (self.mass_lo + self.mass_hi))


def restricted_normalized(scheme: CantorScheme, A=None) -> MeasureView:
    a, b = scheme.hull
    if A is None:
        return MeasureView(scheme, a, b, 1.0, 1.0)
    lo, hi = float(A[0]), float(A[1])
    if hi <= lo:
        raise InvalidParameter("empty restriction interval")
    if lo <= a and hi >= b:
        return MeasureView(scheme, lo, hi, 1.0, 1.0)
    m_lo, m_hi = interval_mass_bounds(scheme, lo, hi)
    if m_hi <= 0:
        raise ZeroMeasureRestriction(f"mu([{lo}, {hi}]) = 0")
    return MeasureView(scheme, lo, hi, m_lo, m_hi)


@dataclass
class _Cells:
    level: np.ndarray
    left: np.ndarray
    length: np.ndarray
    mlo: np.ndarray
    mhi: np.ndarray
    full: np.ndarray


def _view_cells(view: MeasureView, depth: int, min_len: float = 0.0) -> _Cells:
    """Cylinders meeting A: full ones (inside A) and partial ones at the stop level.

    Full cylinders are split until shorter than ``min_len`` (0 keeps them
    maximal); partial ones are split down to ``depth`` or ``min_len`` and
    then carry a mass bracket for their part inside A.
    """
    sch = view.scheme
    lengths = sch.lengths
    a, b = view.lo, view.hi
    stack = [(0, sch.left, 1.0)]
    out = []
    while stack:
        n, x, m = stack.pop()
        ln = lengths[n]
        if x + ln <= a or x >= b:
            continue
        inside = x >= a and x + ln <= b
        stop = n >= depth or ln <= min_len
        if inside and (stop or min_len == 0.0):
            out.append((n, x, ln, m, m, True))
            continue
        if not inside and stop:
            lo, hi = _local_mass(sch, n, a - x, b - x)
            if hi > 0:
                out.append((n, x, ln, m * lo, m * hi, False))
            continue
        spec = sch.levels[n]
        if spec.branching > MAX_BRANCHING:
            raise InvalidParameter("branching too large for cell decomposition")
        w = m / spec.branching
        for o in spec.offset(np.arange(spec.branching)).tolist():
            stack.append((n + 1, x + o, w))
    if not out:
        raise ZeroMeasureRestriction("restriction meets no cylinder")
    arr = list(zip(*out))
    return _Cells(np.array(arr[0]), np.array(arr[1], dtype=float), np.array(arr[2], dtype=float),
                  np.array(arr[3], dtype=float), np.array(arr[4], dtype=float),
                  np.array(arr[5], dtype=bool))


def _cell_pair_bounds(c1: _Cells, c2: _Cells, t: float, K: float, s: float, same: bool):
    """Vectorised certified bounds for sum m_P m_Q J(P, Q) over all cell pairs.

    Full diagonal pairs use [l**-t, K m**(-t/s)], touching pairs use the
    sup-potential bound, separated pairs the kernel bracket.
    """
    x1, l1 = c1.left[:, None], c1.length[:, None]
    x2, l2 = c2.left[None, :], c2.length[None, :]
    dmin = np.maximum(0.0, np.maximum(x1, x2) - np.minimum(x1 + l1, x2 + l2))
    dmax = np.maximum(x1 + l1, x2 + l2) - np.minimum(x1, x2)
    mlo = c1.mlo[:, None] * c2.mlo[None, :]
    mhi1, mhi2 = c1.mhi[:, None], c2.mhi[None, :]
    lo = mlo * dmax ** -t
    with np.errstate(divide="ignore"):
        sep = np.where(dmin > 0, mhi1 * mhi2 * np.where(dmin > 0, dmin, 1.0) ** -t, np.inf)
    if math.isfinite(K):
        touch = np.minimum(mhi1 * K * mhi2 ** (1 - t / s), mhi2 * K * mhi1 ** (1 - t / s))
    else:
        touch = np.full(sep.shape, np.inf)
    hi = np.where(dmin > 0, sep, touch)
    if same:
        i = np.arange(len(c1.left))
        lo[i, i] = c1.mlo ** 2 * c1.length ** -t
        hi[i, i] = K * c1.mhi ** (2 - t / s) if math.isfinite(K) else np.inf
    return float(lo.sum()), float(hi.sum())


def coarse_view_energy(view: MeasureView, t: float, cells_per_side: int = 256,
                       frostman: tuple[float, float] | None = None) -> tuple[float, float]:
    """Fast certified bracket for I_t(mu_A) from one layer of small cells."""
    sch = view.scheme
    if sch.uniform_cylinders:
        a, b = max(view.lo, sch.hull[0]), min(view.hi, sch.hull[1])
        v = uniform_self_energy(b - a, t)
        return v, v
    C, s = frostman if frostman is not None else frostman_parameters(sch)
    K = lemma_constant(C, s, t)
    span = min(view.hi, sch.hull[1]) - max(view.lo, sch.hull[0])
    cells = _view_cells(view, sch.depth_limit, span / cells_per_side)
    lo, hi = _cell_pair_bounds(cells, cells, t, K, s, same=True)
    M_lo, M_hi = cells.mlo.sum(), cells.mhi.sum()
    return lo / M_hi ** 2, hi / M_lo ** 2 if M_lo > 0 else math.inf


def _view_energy(engine: _Engine, view: MeasureView) -> tuple[float, float]:
    if view.is_whole:
        return engine.E(0)
    sch = view.scheme
    if sch.uniform_cylinders:
        a, b = max(view.lo, sch.hull[0]), min(view.hi, sch.hull[1])
        v = uniform_self_energy(b - a, engine.t)
        return v, v
    return _mutual_cells(engine, view, view, same=True)


def _mutual_cells(engine: _Engine, v1: MeasureView, v2: MeasureView, same: bool):
    c1 = _view_cells(v1, engine.D)
    c2 = c1 if same else _view_cells(v2, engine.D)
    t, K, s = engine.t, engine.K, engine.s
    lo = hi = 0.0
    for i in range(len(c1.left)):
        for j in range(len(c2.left)):
            if c1.full[i] and c2.full[j]:
                a, b = engine.pair(int(c1.level[i]), c1.left[i], int(c2.level[j]), c2.left[j])
                m = c1.mlo[i] * c2.mlo[j]
                lo += m * a
                hi += m * b
            else:
                sub1 = _Cells(*(f[i:i + 1] for f in (c1.level, c1.left, c1.length, c1.mlo, c1.mhi, c1.full)))
                sub2 = _Cells(*(f[j:j + 1] for f in (c2.level, c2.left, c2.length, c2.mlo, c2.mhi, c2.full)))
                a, b = _cell_pair_bounds(sub1, sub2, t, K, s, same=same and i == j)
                lo += a
                hi += b
    n1 = (c1.mlo.sum(), c1.mhi.sum())
    n2 = (c2.mlo.sum(), c2.mhi.sum())
    if n1[0] <= 0 or n2[0] <= 0:
        return lo / (n1[1] * n2[1]), math.inf
    return lo / (n1[1] * n2[1]), hi / (n1[0] * n2[0])


# -- public energies ---------------------------------------------------------------

def is_self_similar(scheme: CantorScheme) -> bool:
    """All levels are the same split rescaled by one fixed ratio."""
    if len(scheme.levels) < 2:
        return False
    lengths = scheme.lengths
    ref = scheme.levels[0]
    rho = lengths[1] / lengths[0]
    for n, spec in enumerate(scheme.levels):
        if abs(lengths[n + 1] / lengths[n] - rho) > 1e-12 * rho or spec.branching != ref.branching:
            return False
        if spec.spacing is not None or ref.spacing is not None:
            return False
        o = np.asarray(spec.child_offsets) / lengths[n]
        o0 = np.asarray(ref.child_offsets) / lengths[0]
        if np.max(np.abs(o - o0)) > 1e-9 or spec.child_weights != ref.child_weights:
            return False
    return True


def _as_view(target) -> MeasureView:
    if isinstance(target, MeasureView):
        return target
    if isinstance(target, CantorScheme):
        return restricted_normalized(target)
    raise InvalidParameter("expected a CantorScheme or MeasureView")


def t_energy(target, t: float, method: str = "cylinder-quadrature", *,
             depth: int | None = None, leaf: str = "frostman", rel_tol: float = 1e-3,
             budget: int = 400_000, tol: float | None = None, n_pairs: int = 400_000,
             seed: int = 0, mc_depth: int | None = None) -> EnergyReport:
    """I_t of a scheme or of a normalised restriction, with a certified bracket.

    ``tol`` is the admissible relative bracket width; exceeding it raises
    PrecisionNotReached carrying the bracket.
    """
    view = _as_view(target)
    sch = view.scheme
    if not t > 0:
        raise InvalidParameter("t must be positive")
    if method == "recursive-exact":
        if not view.is_whole:
            raise InvalidParameter("recursive-exact applies to the whole measure")
        if not is_self_similar(sch):
            raise InvalidParameter("recursive-exact needs a strictly self-similar scheme")
        spec = sch.levels[0]
        rho = sch.lengths[1] / sch.lengths[0]
        a = math.fsum(w * w for w in spec.child_weights) * rho ** -t
        if a >= 1:
            return EnergyReport(None, math.inf, math.inf, method, math.inf, True, 0, 0)
        eng = _Engine(sch, t, leaf, depth, rel_tol, budget)
        lo, hi = _cross_terms(eng)
        return _make_report(lo / (1 - a), hi / (1 - a), method, eng.nodes, eng.D, tol)
    if method == "cylinder-quadrature":
        eng = _Engine(sch, t, leaf, depth, rel_tol, budget)
        lo, hi = _view_energy(eng, view)
        return _make_report(lo, hi, method, eng.nodes, eng.D, tol)
    if method == "monte-carlo":
        if not view.is_whole:
            raise InvalidParameter("monte-carlo applies to the whole measure")
        lo, hi, d = _monte_carlo(sch, t, n_pairs, seed, mc_depth, leaf)
        return _make_report(lo, hi, method, n_pairs, d, tol)
    raise InvalidParameter(f"unknown method {method!r}")


def _cross_terms(eng: _Engine) -> tuple[float, float]:
    """sum_{i != j} w_i w_j J(1, o_j - o_i)."""
    vals, cnt, w2 = eng._level_diffs(0)
    lo = hi = 0.0
    for v, c in zip(vals.tolist(), cnt.tolist()):
        if abs(v) <= 1e-12 * eng.lengths[1]:
            continue
        a, b = eng.J(1, v)
        lo += c * a
        hi += c * b
    return w2 * lo, w2 * hi


def _prefix_lefts(scheme: CantorScheme, digits: np.ndarray, d: int) -> np.ndarray:
    x = np.full(digits.shape[0], scheme.left)
    for n in range(d):
        x = x + scheme.levels[n].offset(digits[:, n])
    return x


def _default_mc_depth(scheme: CantorScheme) -> int:
    d = 0
    while d < scheme.depth_limit and scheme.cylinder_count(d + 1) <= 2 ** 20:
        d += 1
    return d


def _monte_carlo(scheme, t, n_pairs, seed, d, leaf):
    """Far-field average over sampled pairs plus an analytic near field.

    Pairs in the same depth-d cylinder, or in touching depth-d cylinders, are
    excluded from the sample; their contribution is bracketed by the
    quadrature engine at depth d (Frostman bound on the diagonal).
    """
    d = _default_mc_depth(scheme) if d is None else int(d)
    if n_pairs < 100:
        raise InvalidParameter("need at least 100 pairs")
    ld = scheme.lengths[d]
    ss = np.random.SeedSequence(int(seed), spawn_key=(7,))
    sx, sy = ss.spawn(2)
    if scheme.uniform_cylinders:
        X = sample_points(scheme, n_pairs, int(sx.generate_state(1)[0]))
        Y = sample_points(scheme, n_pairs, int(sy.generate_state(1)[0]))
        cx = scheme.left + np.floor((X - scheme.left) / ld) * ld
        cy = scheme.left + np.floor((Y - scheme.left) / ld) * ld
    else:
        DX = sample_addresses(scheme, n_pairs, int(sx.generate_state(1)[0]))
        DY = sample_addresses(scheme, n_pairs, int(sy.generate_state(1)[0]))
        X, Y = addresses_to_points(scheme, DX), addresses_to_points(scheme, DY)
        cx, cy = _prefix_lefts(scheme, DX, d), _prefix_lefts(scheme, DY, d)
    gap = np.abs(cx - cy)
    near = gap <= ld * (1 + 1e-9)
    with np.errstate(divide="ignore"):
        k = np.where(near, 0.0, np.abs(X - Y) ** -t)
    mean = float(k.mean())
    se = float(k.std(ddof=1) / math.sqrt(n_pairs))
    # near field: diagonal cylinders and touching neighbours at depth d
    eng = _Engine(scheme, t, leaf if not scheme.uniform_cylinders else "uniform", d,
                  budget=0 if not scheme.uniform_cylinders else 400_000)
    sq = float(np.prod([1.0 / spec.branching for spec in scheme.levels[:d]]))
    e_lo, e_hi = eng.E(d) if scheme.uniform_cylinders else (ld ** -t, eng.sup_phi(d))
    near_lo, near_hi = sq * e_lo, sq * e_hi
    touching = _touching_pairs(scheme, d)
    if touching:
        j_lo, j_hi = eng.J(d, ld) if scheme.uniform_cylinders else (
            (2 * ld) ** -t, eng.sup_phi(d))
        md = eng.mass[d]
        near_lo += touching * md * md * j_lo
        near_hi += touching * md * md * j_hi
    return mean - 4 * se + near_lo, mean + 4 * se + near_hi, d


def _touching_pairs(scheme: CantorScheme, d: int) -> int:
    """Ordered pairs of distinct depth-d cylinders sharing an endpoint."""
    if all(spec.min_gap > 0 for spec in scheme.levels[:d]):
        return 0
    lefts, _ = scheme.cylinders(d)
    ld = scheme.lengths[d]
    lefts = np.sort(lefts)
    return 2 * int(np.sum(np.abs(np.diff(lefts) - ld) <= 1e-9 * ld))


def mutual_energy(view1: MeasureView, view2: MeasureView, t: float, *, depth=None,
                  leaf: str = "frostman", rel_tol: float = 1e-3, budget: int = 400_000,
                  tol: float | None = None) -> EnergyReport:
    """J_t(mu_1, mu_2) for two restrictions of the same scheme."""
    if view1.scheme is not view2.scheme and view1.scheme != view2.scheme:
        raise InvalidParameter("mutual energy needs views of the same scheme")
    sch = view1.scheme
    if sch.uniform_cylinders:
        h = sch.hull
        a1, b1 = max(view1.lo, h[0]), min(view1.hi, h[1])
        a2, b2 = max(view2.lo, h[0]), min(view2.hi, h[1])
        v = float(uniform_pair_energy(a1, b1, a2, b2, t))
        return _make_report(v, v, "cylinder-quadrature", 0, 0, tol)
    eng = _Engine(sch, t, leaf, depth, rel_tol, budget)
    lo, hi = _mutual_cells(eng, view1, view2, same=False)
    return _make_report(lo, hi, "cylinder-quadrature", eng.nodes, eng.D, tol)


def t_potential(scheme: CantorScheme, x: float, t: float, depth: int | None = None, *,
                leaf: str = "frostman", rel_tol: float = 1e-4) -> EnergyReport:
    """phi(x) = integral of |x - y|**-t dmu(y), bracketed by cylinder descent."""
    if not t > 0:
        raise InvalidParameter("t must be positive")
    if scheme.uniform_cylinders:
        a, b = scheme.hull
        v = float(uniform_potential(x, a, b, t))
        lo = v if math.isfinite(v) else DIVERGENCE_THRESHOLD * 10
        return _make_report(lo, v, "cylinder-quadrature", 0, 0)
    D = scheme.depth_limit if depth is None else int(depth)
    C, s = frostman_parameters(scheme)
    K = lemma_constant(C, s, t)
    lengths = scheme.lengths
    lefts = np.array([scheme.left])
    mass = np.array([1.0])
    lo = hi = 0.0
    nodes = 0
    for n in range(D + 1):
        ln = lengths[n]
        dmin = np.maximum(0.0, np.maximum(lefts - x, x - lefts - ln))
        dmax = np.maximum(np.abs(x - lefts), np.abs(x - lefts - ln))
        pos = dmin > 0
        with np.errstate(divide="ignore"):
            ok = pos & ((dmax / np.where(pos, dmin, 1.0)) ** t - 1 <= rel_tol)
        if n == D:
            ok = pos
        lo += float(np.sum(mass[ok] * dmax[ok] ** -t))
        hi += float(np.sum(mass[ok] * dmin[ok] ** -t))
        rest = ~ok
        nodes += int(rest.sum())
        if n == D:
            if rest.any():
                if leaf == "uniform":
                    v = uniform_potential(x, lefts[rest], lefts[rest] + ln, t)
                    lo += float(np.sum(mass[rest] * v))
                    hi += float(np.sum(mass[rest] * v))
                else:
                    lo += float(np.sum(mass[rest] * dmax[rest] ** -t))
                    hi += float(np.sum(K * mass[rest] ** (1 - t / s)))
            break
        if not rest.any():
            break
        spec = scheme.levels[n]
        if spec.branching > MAX_BRANCHING:
            raise InvalidParameter("branching too large for potential descent")
        offs = spec.offset(np.arange(spec.branching))
        lefts = (lefts[rest][:, None] + offs[None, :]).ravel()
        mass = np.repeat(mass[rest] / spec.branching, spec.branching)
    return _make_report(lo, hi, "cylinder-quadrature", nodes, D)


def capacity_lower_bound(U: IntervalUnion, t: float, budget: int = 4_000_000) -> float:
    """1 / I_t(uniform measure on U); zero when that energy diverges."""
    if len(U) == 0:
        raise InvalidParameter("U must be non-empty")
    if t >= 1:
        return 0.0
    L = U.rights - U.lefts
    w = L / L.sum()
    n = len(U)
    if n * n > budget:
        raise InvalidParameter("too many intervals for the pair budget")
    E = uniform_pair_energy(U.lefts[:, None], U.rights[:, None],
                            U.lefts[None, :], U.rights[None, :], t)
    I = float(np.sum(w[:, None] * w[None, :] * E))
    return 0.0 if not math.isfinite(I) or I > DIVERGENCE_THRESHOLD else 1.0 / I


def capacity_lower_bound_max(U1: IntervalUnion, U2: IntervalUnion, t: float) -> float:
    """Capacity witness for the union-monotone comparison: best of two witnesses."""
    return max(capacity_lower_bound(U1, t), capacity_lower_bound(U2, t))


# -- Lemma check ----------------------------------------------------------------

@dataclass
class ViolationReport:
    rows: list[dict]
    violations: int
    checked: int

    HEADER = ["x", "r", "t", "mass_lo", "mass_hi", "energy_lo", "energy_hi", "bound", "violated"]

    def to_csv(self) -> str:
        lines = [",".join(self.HEADER)]
        for row in self.rows:
            lines.append(",".join(repr(float(row[h])) if h != "violated" else str(int(row[h]))
                                  for h in self.HEADER))
        return "\n".join(lines) + "\n"


def frostman_energy_check(scheme: CantorScheme, x_samples, radii, t, C: float, s: float,
                          cells_per_side: int = 256) -> ViolationReport:
    """Test I_t(mu_B) <= (C**(t/s) s/(s-t)) mu(B)**(-t/s) on sampled balls B = B(x, r).

    A violation is certified only when the energy's lower bracket exceeds the
    bound evaluated at the upper mass bracket.  The bracket uses the
    certified Frostman parameters of the scheme, independent of (C, s).
    """
    x = np.atleast_1d(np.asarray(x_samples, dtype=float))
    r = np.broadcast_to(np.asarray(radii, dtype=float), x.shape)
    tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
    if np.any(tt <= 0) or np.any(tt >= s):
        raise InvalidParameter("need 0 < t < s")
    cert = frostman_parameters(scheme)
    rows = []
    for xi, ri, ti in zip(x.tolist(), r.tolist(), tt.tolist()):
        view = restricted_normalized(scheme, (xi - ri, xi + ri))
        e_lo, e_hi = coarse_view_energy(view, ti, cells_per_side, cert)
        bound = lemma_constant(C, s, ti) * view.mass_hi ** (-ti / s)
        rows.append({"x": xi, "r": ri, "t": ti, "mass_lo": view.mass_lo, "mass_hi": view.mass_hi,
                     "energy_lo": e_lo, "energy_hi": e_hi, "bound": bound,
                     "violated": e_lo > bound * (1 + 1e-12)})
    v = sum(row["violated"] for row in rows)
    return ViolationReport(rows, int(v), len(rows))


# -- divergence diagnostics --------------------------------------------------------

@dataclass
class DiagnosticConfig:
    t: float
    u: float
    s: float
    C: float | None = None
    b_scale: float | None = None
    sample_count: int = 16
    horizon: int = 1 << 20
    seed: int = 0
    epsilon: float = 0.1
    max_energy_evals: int = 2000

    def __post_init__(self):
        if not 0 < self.t < self.s:
            raise InvalidParameter("need 0 < t < s")
        if not self.u > 0:
            raise InvalidParameter("u must be positive")
        if self.horizon < 8 or self.sample_count < 1:
            raise InvalidParameter("horizon >= 8 and sample_count >= 1 required")

    def lemma_K(self, scheme: CantorScheme) -> float:
        C = self.C if self.C is not None else frostman_parameters(scheme)[0]
        return lemma_constant(C, self.s, self.t)

    def b(self, r, scheme: CantorScheme):
        """b_k = K**-1 * r_k**(t u / s) unless a fixed scale is supplied."""
        c = 1.0 / self.lemma_K(scheme) if self.b_scale is None else self.b_scale
        return c * np.asarray(r, dtype=float) ** (self.t * self.u / self.s)


@dataclass
class GrowthReport:
    checkpoints: list[int]
    partial_sums: np.ndarray
    doubling_ratios: np.ndarray
    increment_ratios: np.ndarray
    trends: list[str]
    member_fraction: np.ndarray
    indeterminate: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def trend(self) -> str:
        div = sum(tr == "divergent" for tr in self.trends)
        return "divergent" if 2 * div >= len(self.trends) else "plateau"

    @property
    def divergent_fraction(self) -> float:
        return sum(tr == "divergent" for tr in self.trends) / len(self.trends)

    def mean_doubling_ratio(self) -> float:
        return float(np.mean(self.doubling_ratios[:, -1]))

    def to_csv(self) -> str:
        lines = ["sample,N,partial_sum,doubling_ratio"]
        for i in range(self.partial_sums.shape[0]):
            for j, N in enumerate(self.checkpoints):
                ratio = "" if j == 0 else repr(float(self.doubling_ratios[i, j - 1]))
                lines.append(f"{i},{N},{float(self.partial_sums[i, j])!r},{ratio}")
        return "\n".join(lines) + "\n"


PLATEAU_Q = 0.995


def _growth(weights: np.ndarray, horizon: int, extras=None, member=None, indet=None) -> GrowthReport:
    """Doubling-window statistics of the partial sums P_N = sum_{k<=N} w_k."""
    cps = []
    N = horizon
    while N >= 8:
        cps.append(N)
        N //= 2
    cps = cps[::-1]
    csum = np.cumsum(weights, axis=1)
    P = csum[:, np.array(cps) - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(P[:, :-1] > 0, P[:, 1:] / P[:, :-1], np.nan)
        inc = np.diff(P, axis=1)
        q = np.where(inc[:, -2] > 0, inc[:, -1] / inc[:, -2], 0.0)
    trends = ["divergent" if qi >= PLATEAU_Q else "plateau" for qi in q.tolist()]
    n = weights.shape[0]
    return GrowthReport(cps, P, ratios, q, trends,
                        np.zeros(n) if member is None else member,
                        np.zeros(n) if indet is None else indet, extras or {})


def _sample_support(scheme: CantorScheme, count: int, seed: int):
    if scheme.uniform_cylinders:
        return sample_points(scheme, count, seed)
    return sample_addresses(scheme, count, seed)


def _masses_along(scheme: CantorScheme, x, r: np.ndarray):
    """Mass brackets of B(x, r_k) for one support point and many radii."""
    if scheme.uniform_cylinders:
        a, b = scheme.hull
        m = (np.minimum(x + r, b) - np.maximum(x - r, a)) / (b - a)
        m = np.maximum(m, 0.0)
        return m, m
    lo = np.empty(r.size)
    hi = np.empty(r.size)
    step = 1 << 14
    for i in range(0, r.size, step):
        rr = r[i:i + step]
        lo[i:i + step], hi[i:i + step] = ball_mass_bounds(scheme, np.repeat(x[None, :], rr.size, 0), rr)
    return lo, hi


def _gap_structure(members: np.ndarray, gamma: float) -> dict:
    """Longest member run and whether windows [ceil(k**(1/gamma)), k] are all members."""
    m = members.astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(m)])
    ks = np.unique(np.geomspace(8, members.size, 24).astype(np.int64))
    starts = np.ceil(ks ** (1 / gamma)).astype(np.int64)
    full = (csum[ks] - csum[starts - 1]) == (ks - starts + 1)
    run = best = 0
    for v in m.tolist():
        run = run + 1 if v else 0
        best = max(best, run)
    return {"longest_run": best, "window_full_fraction": float(full.mean())}


def mass_divergence_diagnostic(scheme: CantorScheme, radii: RadiiSequence,
                               config: DiagnosticConfig) -> GrowthReport:
    """Partial sums of r_k**(tu/s) over the k with mu(B(x, r_k)) >= r_k**u."""
    N = config.horizon
    r = radii.prefix(N)
    pts = _sample_support(scheme, config.sample_count, config.seed)
    w = r ** (config.t * config.u / config.s)
    thresh = r ** config.u
    weights = np.empty((config.sample_count, N))
    member_frac = np.empty(config.sample_count)
    indet = np.empty(config.sample_count)
    gaps = []
    gamma = 1 + config.epsilon / (config.s + config.epsilon)
    for i in range(config.sample_count):
        lo, hi = _masses_along(scheme, pts[i], r)
        member = lo >= thresh
        unknown = ~member & (hi >= thresh)
        weights[i] = np.where(member, w, 0.0)
        member_frac[i] = member.mean()
        indet[i] = unknown.sum()
        if radii.kind == "power":
            gaps.append(_gap_structure(member, gamma))
    extras = {"gap_structure": gaps} if gaps else {}
    return _growth(weights, N, extras, member_frac, indet)


def energy_divergence_diagnostic(scheme: CantorScheme, radii: RadiiSequence,
                                 config: DiagnosticConfig) -> GrowthReport:
    """Partial sums of b_k over the k with I_t(mu_{B(x, r_k)}) <= 1 / b_k.

    Membership is decided exactly for uniform schemes.  Otherwise, with the
    default b_k, a ball carrying mass >= r_k**u is a member by the Lemma bound;
    the remaining k are decided by certified energy brackets, and k whose
    bracket straddles 1/b_k (or beyond the evaluation cap) are indeterminate.
    """
    N = config.horizon
    r = radii.prefix(N)
    pts = _sample_support(scheme, config.sample_count, config.seed)
    b = config.b(r, scheme)
    t = config.t
    weights = np.empty((config.sample_count, N))
    member_frac = np.empty(config.sample_count)
    indet = np.empty(config.sample_count)
    for i in range(config.sample_count):
        if scheme.uniform_cylinders:
            a0, b0 = scheme.hull
            x = pts[i]
            L = np.minimum(x + r, b0) - np.maximum(x - r, a0)
            energy = 2 * L ** -t / ((1 - t) * (2 - t))
            member = energy <= 1 / b
            unknown = np.zeros(N, dtype=bool)
        else:
            lo, hi = _masses_along(scheme, pts[i], r)
            member = np.zeros(N, dtype=bool)
            if config.b_scale is None and config.C is None:
                member = lo >= r ** config.u
            unknown = np.zeros(N, dtype=bool)
            todo = np.flatnonzero(~member)
            x = float(addresses_to_points(scheme, pts[i][None, :])[0])
            for cnt, k in enumerate(todo.tolist()):
                if cnt >= config.max_energy_evals:
                    unknown[todo[cnt:]] = True
                    break
                view = restricted_normalized(scheme, (x - r[k], x + r[k]))
                e_lo, e_hi = coarse_view_energy(view, t)
                if e_hi <= 1 / b[k]:
                    member[k] = True
                elif e_lo <= 1 / b[k]:
                    unknown[k] = True
        weights[i] = np.where(member & ~unknown, b, 0.0)
        member_frac[i] = member.mean()
        indet[i] = unknown.sum()
    return _growth(weights, N, {}, member_frac, indet)
