"""Box counting, limsup-set dimension, local dimensions and spectrum hulls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .covering import CoveringRealization, geometric_blocks, limsup_approx, realize
from .errors import ExtrapolationRefused, InvalidParameter, NoMassAboveThreshold
from .intervals import IntervalUnion
from .measures import CantorScheme, ball_mass_bounds
from .radii import power_radii

_SNAP = 1e-9


@dataclass
class DimensionFit:
    slope: float
    stderr: float
    scale_window: tuple[float, float]
    points: list[tuple[float, float]]
    r2: float
    method: str = "box"
    flags: list[str] = field(default_factory=list)

    def csv_row(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr,
                "delta_min": self.scale_window[0], "delta_max": self.scale_window[1],
                "r2": self.r2, "n_points": len(self.points), "method": self.method,
                "flags": ";".join(self.flags)}


CSV_FIT_HEADER = ["slope", "stderr", "delta_min", "delta_max", "r2", "n_points",
                  "method", "flags"]


def _cell_index(x, a, delta, rounding):
    q = (np.asarray(x, dtype=float) - a) / delta
    near = np.round(q)
    snap = np.abs(q - near) <= np.maximum(_SNAP, 8 * np.finfo(float).eps * np.abs(q))
    return np.where(snap, near, rounding(q))


def box_count(U: IntervalUnion, delta: float, hull: tuple[float, float]) -> int:
    """Cells [a + i delta, a + (i+1) delta) whose open interior meets U."""
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    if len(U) == 0:
        return 0
    a = hull[0]
    first = _cell_index(U.lefts, a, delta, np.floor)
    last = _cell_index(U.rights, a, delta, np.ceil) - 1
    # U is sorted, so ranges only overlap with their predecessor's tail
    prev = np.maximum.accumulate(np.concatenate([[-np.inf], last[:-1]]))
    fresh = last - np.maximum(first, prev + 1) + 1
    return int(np.sum(np.maximum(fresh, 0)))


def _fit(xs, ys, window, method, flags=None) -> DimensionFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    flags = list(flags or [])
    pts = list(zip(xs.tolist(), ys.tolist()))
    if np.ptp(ys) == 0:
        return DimensionFit(0.0, 0.0, window, pts, 0.0, method, flags + ["degenerate"])
    res = stats.linregress(xs, ys)
    return DimensionFit(float(res.slope), float(res.stderr), window, pts,
                        float(res.rvalue ** 2), method, flags)


def box_dimension_fit(U: IntervalUnion, delta_grid, hull) -> DimensionFit:
    """OLS slope of log N(delta) against log 1/delta."""
    deltas = np.unique(np.asarray(delta_grid, dtype=float))
    if deltas.size < 4:
        raise InvalidParameter("need at least 4 scales")
    counts = np.array([box_count(U, d, hull) for d in deltas])
    keep = counts > 0
    if keep.sum() < 4:
        return DimensionFit(0.0, 0.0, (deltas[0], deltas[-1]),
                            [], 0.0, "box", ["degenerate", "empty"])
    return _fit(np.log(1 / deltas[keep]), np.log(counts[keep]),
                (float(deltas[0]), float(deltas[-1])), "box")


# -- limsup-set dimension -----------------------------------------------------

def _scale_matched(real: CoveringRealization, band_ratio=2.0, min_count=32,
                   delta_range=(1e-12, 0.1)) -> DimensionFit:
    """Box counts of radius bands, each counted at its own scale.

    Band b holds the balls with delta_b <= r_k < band_ratio * delta_b; their
    union (clipped to the support hull) is box-counted at scale 2 delta_b.
    """
    r = real.radii_prefix
    c = real.centers
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    hull = real.scheme.hull
    lo = max(float(r_sorted[0]), delta_range[0])
    hi = min(float(r_sorted[-1]), delta_range[1])
    xs, ys, used = [], [], []
    d = lo
    while d * band_ratio <= hi * (1 + 1e-12):
        i0 = np.searchsorted(r_sorted, d, side="left")
        i1 = np.searchsorted(r_sorted, d * band_ratio, side="left")
        if i1 - i0 >= min_count:
            sel = order[i0:i1]
            U = IntervalUnion.from_balls(c[sel], r[sel]).clip(*hull)
            n = box_count(U, 2 * d, hull)
            if n > 0:
                xs.append(math.log(1 / (2 * d)))
                ys.append(math.log(n))
                used.append(2 * d)
        d *= band_ratio
    if len(xs) < 4:
        raise InvalidParameter("fewer than 4 populated radius bands; increase K")
    return _fit(xs, ys, (min(used), max(used)), "scale_matched")


def _distinct_draws(P: float, n: int, rng: np.random.Generator) -> float:
    """Number of distinct cells hit by n uniform draws among P cells."""
    if n <= 2_000_000 and P < 2 ** 62:
        return float(np.unique(rng.integers(0, int(P), size=n)).size)
    lam = n / P
    mean = -P * math.expm1(n * math.log1p(-1.0 / P)) if P > 1 else 1.0
    var = max(P * math.exp(-lam) * (1 - (1 + lam) * math.exp(-lam)), 0.0)
    return max(1.0, min(float(n), mean + math.sqrt(var) * rng.standard_normal()))


def _cylinder_counts(real: CoveringRealization) -> DimensionFit:
    """Block radii on a spaced Cantor set.

    Each ball B(omega_k, r_k) of block j meets the support in exactly the
    level-j construction interval containing omega_k, so at scale ell_j the
    box count is the number of distinct level-j cylinders hit by the block's
    centres.  Centres are uniform over cylinders (uniform weights), which lets
    the count be drawn exactly for small blocks and from the occupancy law
    (normal approximation) for blocks too large to enumerate.
    """
    scheme = real.scheme
    xs, ys, used = [], [], []
    for b in real.radii.blocks:
        if b.stop > real.K:
            break
        rng = np.random.default_rng(np.random.SeedSequence(real.seed, spawn_key=(1 << 20, b.level)))
        n = b.stop - b.start + 1
        P = scheme.cylinder_count(b.level)
        distinct = _distinct_draws(P, n, rng)
        ell = scheme.lengths[b.level]
        xs.append(-math.log(ell))
        ys.append(math.log(distinct))
        used.append(ell)
    if len(xs) < 3:
        raise InvalidParameter("fewer than 3 realizable blocks")
    flags = [] if len(xs) >= 4 else ["few-scales"]
    return _fit(xs, ys, (min(used), max(used)), "cylinder", flags)


def limsup_dimension(real: CoveringRealization, blocks=None, delta_grid=None,
                     method: str = "auto") -> DimensionFit:
    """Estimate f_mu(r) from one realisation.

    ``method``: "scale_matched" (default for power/explicit radii),
    "cylinder" (block radii on spaced Cantor sets), or "intersection"
    (box-count the block-intersection surrogate over ``delta_grid``).
    """
    if method == "auto":
        method = "cylinder" if real.radii.kind == "block" else "scale_matched"
    if method == "scale_matched":
        return _scale_matched(real)
    if method == "cylinder":
        return _cylinder_counts(real)
    if method == "intersection":
        blocks = geometric_blocks(real.K) if blocks is None else blocks
        approx = limsup_approx(real, blocks)
        if delta_grid is None:
            r = real.radii_prefix
            lo = max(float(r[blocks[-1] - 1]), 1e-12)
            hi = min(float(r[blocks[1] - 1]), 0.1)
            delta_grid = np.geomspace(lo, max(hi, 16 * lo), 12)
        fit = box_dimension_fit(approx.union, delta_grid, real.scheme.hull)
        fit.method = "intersection"
        return fit
    raise InvalidParameter(f"unknown method {method!r}")


# -- local dimensions ----------------------------------------------------------

@dataclass
class LocalDimReport:
    x: float
    slopes: list[tuple[float, float]]
    lower_hat: float
    upper_hat: float

    def csv_row(self) -> dict:
        return {"x": self.x, "lower_hat": self.lower_hat, "upper_hat": self.upper_hat,
                "n_slopes": len(self.slopes)}


def local_dims(scheme: CantorScheme, x_samples, scale_grid, mode: str = "slope",
               window: int = 2) -> list[LocalDimReport]:
    """Per-point extremes of log-mass slopes across ``scale_grid``.

    mode "slope": least-squares slopes of log mu(B(x, r)) against log r over
    sliding windows of ``window`` consecutive scales.  mode "ratio": the
    quotient log mu(B(x, r)) / log r at each scale.
    """
    scales = np.unique(np.asarray(scale_grid, dtype=float))
    x_samples = np.asarray(x_samples)
    lo, hi = zip(*(ball_mass_bounds(scheme, x_samples, r) for r in scales))
    mass = 0.5 * (np.atleast_2d(np.array(lo)) + np.atleast_2d(np.array(hi)))
    if mass.shape[0] != scales.size:
        mass = mass.T
    logm = np.log(np.maximum(mass, 1e-300))
    logr = np.log(scales)
    from .measures import addresses_to_points
    xs = addresses_to_points(scheme, x_samples) if x_samples.ndim == 2 else np.atleast_1d(x_samples)
    reports = []
    for p in range(logm.shape[1]):
        if mode == "ratio":
            vals = [(float(scales[i]), float(logm[i, p] / logr[i])) for i in range(scales.size)]
        elif mode == "slope":
            if scales.size < window:
                raise InvalidParameter("scale grid shorter than window")
            vals = []
            for i in range(scales.size - window + 1):
                sl = np.polyfit(logr[i:i + window], logm[i:i + window, p], 1)[0]
                vals.append((float(scales[i]), float(sl)))
        else:
            raise InvalidParameter(f"unknown mode {mode!r}")
        v = [s for _, s in vals]
        reports.append(LocalDimReport(float(xs[p]), vals, min(v), max(v)))
    return reports


@dataclass
class DeltaReport:
    delta: float
    delta_bar: float
    delta_hat: float
    n_used: int
    n_total: int


def delta_functionals(reports, threshold: float) -> DeltaReport:
    """Sample proxies for the essential inf/sup over {lower local dim > threshold}.

    delta = min(upper - lower), delta_bar = max(lower / upper); delta_hat is
    the same difference functional (pass the s3 threshold for it).
    """
    used = [r for r in reports if r.lower_hat > threshold]
    if not used:
        raise NoMassAboveThreshold(f"no sample with lower local dimension above {threshold}")
    diffs = [r.upper_hat - r.lower_hat for r in used]
    ratios = [r.lower_hat / r.upper_hat for r in used]
    return DeltaReport(min(diffs), max(ratios), min(diffs), len(used), len(reports))


# -- spectra --------------------------------------------------------------------

@dataclass
class SpectrumCurve:
    grid: np.ndarray
    values: np.ndarray  # NaN marks -inf (empty level set)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise InvalidParameter("grid and values differ in length")
        if np.any(np.diff(self.grid) <= 0):
            raise InvalidParameter("grid must be strictly increasing")

    def at(self, s: float) -> float:
        if not self.grid[0] <= s <= self.grid[-1]:
            raise ExtrapolationRefused(f"{s} outside [{self.grid[0]}, {self.grid[-1]}]")
        return float(np.interp(s, self.grid, self.values))

    def to_csv(self) -> str:
        lines = ["s,F"] + [f"{g!r},{'' if np.isnan(v) else repr(float(v))}"
                           for g, v in zip(self.grid.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


def lipschitz_hull(F: SpectrumCurve) -> SpectrumCurve:
    """Smallest increasing 1-Lipschitz majorant on the grid.

    hull(s_i) = max_j F(s_j) - max(0, s_j - s_i), evaluated as a backward
    pass A_i = max(F_i, A_{i+1} - h_i) followed by a running maximum.  The
    recurrence form makes the hull of a hull reproduce it bit for bit.
    """
    if F.grid.size == 0 or np.all(np.isnan(F.values)):
        raise InvalidParameter("empty spectrum")
    v = np.where(np.isnan(F.values), -np.inf, F.values)
    h = np.diff(F.grid)
    A = v.copy()
    for i in range(A.size - 2, -1, -1):
        A[i] = max(A[i], A[i + 1] - h[i])
    return SpectrumCurve(F.grid.copy(), np.maximum.accumulate(A))


def analytic_spectrum(scheme: CantorScheme, grid) -> SpectrumCurve:
    """Fine spectrum of the built-in models: one step at the lower local dimension.

    Every support point has the same lower local dimension d, so
    {x : lower dim <= s'} is the whole support (dimension d) for s' >= d and
    empty otherwise.
    """
    grid = np.asarray(grid, dtype=float)
    if scheme.kind in ("lebesgue", "middle"):
        d = scheme.metadata["dimension"]
    elif scheme.kind == "oscillating":
        d = scheme.metadata["frostman_exponent"]
    elif scheme.kind == "spaced":
        d = scheme.parameters["s"]
    else:
        raise InvalidParameter(f"no analytic spectrum for {scheme.kind!r}")
    return SpectrumCurve(grid, np.where(grid >= d - 1e-12, d, np.nan))


def conjecture_sides(scheme: CantorScheme, alpha: float, analytic_F: SpectrumCurve | None = None,
                     K: int = 1_000_000, seed: int = 0, threads: int = 1):
    """(simulated dimension of E_alpha, hull of F at 1/alpha)."""
    if analytic_F is None:
        analytic_F = analytic_spectrum(scheme, np.linspace(0, 2, 201))
    rhs = lipschitz_hull(analytic_F).at(1 / alpha)
    lhs = limsup_dimension(realize(scheme, power_radii(alpha), K, seed, threads))
    return lhs, rhs
