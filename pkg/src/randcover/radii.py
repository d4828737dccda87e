"""Radii sequences and finite-window critical exponents."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameter, UndefinedExponent
from .measures import CantorScheme


@dataclass(frozen=True)
class Block:
    start: int  # first index (1-based, inclusive)
    stop: int   # last index (inclusive)
    radius: float
    level: int


@dataclass
class RadiiSequence:
    """Positive radii r_1, r_2, ... given by a rule.

    ``kind`` is "power", "block" or "explicit".  Power and explicit
    sequences are evaluated into arrays on demand; block sequences are kept
    as a list of constant blocks because their block ends (M_j) can exceed
    any array size.
    """

    kind: str
    parameters: dict
    monotone: bool
    blocks: tuple[Block, ...] = ()
    values: np.ndarray | None = None
    _cache: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        if self.kind == "explicit":
            return len(self.values)
        if self.kind == "block":
            return self.blocks[-1].stop if self.blocks else 0
        return math.inf

    def prefix(self, K: int) -> np.ndarray:
        """r_1..r_K as an array."""
        K = int(K)
        if K > self.length:
            raise InvalidParameter(f"sequence has only {self.length} terms")
        if self.kind == "explicit":
            return np.asarray(self.values[:K], dtype=float)
        if self._cache is not None and len(self._cache) >= K:
            return self._cache[:K]
        if self.kind == "power":
            out = np.arange(1, K + 1, dtype=float) ** -self.parameters["alpha"]
        else:
            if K > 5e8:
                raise InvalidParameter("block prefix too long to materialise")
            out = np.empty(K)
            for b in self.blocks:
                if b.start > K:
                    break
                out[b.start - 1:min(b.stop, K)] = b.radius
        self._cache = out
        return out

    def radius(self, k: int) -> float:
        if self.kind == "power":
            return float(k) ** -self.parameters["alpha"]
        if self.kind == "explicit":
            return float(self.values[k - 1])
        for b in self.blocks:
            if b.start <= k <= b.stop:
                return b.radius
        raise InvalidParameter(f"index {k} beyond the last block")

    def rule(self) -> dict:
        doc = {"kind": self.kind, "parameters": self.parameters}
        if self.kind == "explicit":
            doc["length"] = len(self.values)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.rule(), sort_keys=True)

    def save_text(self, path, K: int | None = None) -> None:
        K = int(self.length if K is None else K)
        np.savetxt(path, self.prefix(K), fmt="%.17g")


def power_radii(alpha: float) -> RadiiSequence:
    if not alpha > 0:
        raise InvalidParameter("alpha must be positive")
    return RadiiSequence("power", {"alpha": float(alpha)}, monotone=True)


def explicit_radii(values) -> RadiiSequence:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0 or np.any(values <= 0):
        raise InvalidParameter("explicit radii must be a non-empty list of positive reals")
    monotone = bool(np.all(np.diff(values) <= 0))
    return RadiiSequence("explicit", {}, monotone=monotone, values=values)


def load_radii(path) -> RadiiSequence:
    return explicit_radii(np.loadtxt(Path(path), ndmin=1))


def reorder_to_decreasing(r: RadiiSequence) -> RadiiSequence:
    if r.kind != "explicit":
        raise InvalidParameter("only explicit sequences can be reordered")
    return explicit_radii(np.sort(r.values)[::-1])


def block_radii(scheme: CantorScheme, gamma: float, s0: float) -> RadiiSequence:
    """r_k = ell_j**gamma / 2 for M_{j-1} < k <= M_j, M_j = floor(ell_j**(-gamma s0))."""
    if scheme.kind != "spaced":
        raise InvalidParameter("block radii need a spaced Cantor scheme")
    s, u = scheme.parameters["s"], scheme.parameters["u"]
    if not s / u - 1e-12 <= gamma <= 1:
        raise InvalidParameter(f"gamma must lie in [s/u, 1] = [{s / u:g}, 1]")
    if not 0 < s0 <= s / gamma + 1e-12:
        raise InvalidParameter(f"s0 must lie in (0, s/gamma] = (0, {s / gamma:g}]")
    blocks = []
    prev = 0
    lengths = scheme.lengths
    for j in range(1, scheme.depth_limit + 1):
        m_j = int(math.floor(lengths[j] ** (-gamma * s0)))
        if m_j > prev:
            blocks.append(Block(prev + 1, m_j, lengths[j] ** gamma / 2, j))
            prev = m_j
    if not blocks:
        raise InvalidParameter("no non-empty block at realizable depth")
    return RadiiSequence(
        "block", {"gamma": gamma, "s0": s0, "scheme": json.loads(scheme.to_json())},
        monotone=True, blocks=tuple(blocks),
    )


def radii_from_rule(doc: dict, scheme: CantorScheme | None = None) -> RadiiSequence:
    kind = doc["kind"]
    p = doc.get("parameters", {})
    if kind == "power":
        return power_radii(p["alpha"])
    if kind == "block":
        from .measures import scheme_from_dict
        sch = scheme if scheme is not None else scheme_from_dict(p["scheme"])
        return block_radii(sch, p["gamma"], p["s0"])
    if kind == "explicit":
        return load_radii(p["path"]) if "path" in p else explicit_radii(p["values"])
    raise InvalidParameter(f"unknown radii kind {kind!r}")


# -- critical exponents -------------------------------------------------------

@dataclass
class ExponentEstimate:
    s1_hat: float
    s2_hat: float
    s3_hat: float
    window: tuple[float, float]
    tail_diagnostic: dict
    non_monotone_caveat: bool = False


def _window_extremes(r: RadiiSequence, lo: float, hi: float) -> tuple[float, float]:
    """min and max of log k / -log r_k over lo <= k <= hi (r_k < 1 only)."""
    if r.kind == "block":
        cands = []
        for b in r.blocks:
            a, z = max(b.start, lo), min(b.stop, hi)
            if a > z or b.radius >= 1:
                continue
            den = -math.log(b.radius)
            cands += [math.log(a) / den, math.log(z) / den]
        if not cands:
            raise UndefinedExponent("no radius below 1 in the window")
        return min(cands), max(cands)
    k = np.arange(int(math.ceil(lo)), int(hi) + 1, dtype=float)
    rk = r.prefix(int(hi))[k.astype(np.int64) - 1]
    keep = rk < 1
    if not keep.any():
        raise UndefinedExponent("no radius below 1 in the window")
    ratio = np.log(k[keep]) / -np.log(rk[keep])
    return float(ratio.min()), float(ratio.max())


def partial_sum_root(radii: np.ndarray, threshold: float = 1.0) -> float:
    """t* with sum r_k**t* = threshold (requires all r_k < 1)."""
    radii = radii[radii < 1]
    logs = np.log(radii)

    def f(t):
        return math.log(np.exp(t * logs).sum()) - math.log(threshold)

    hi = 1.0
    while f(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise UndefinedExponent("partial-sum root not bracketed")
    if f(1e-12) < 0:
        return 0.0
    return brentq(f, 1e-12, hi, xtol=1e-12)


def critical_exponents(r: RadiiSequence, K: int, window_fraction: float = 0.5
                       ) -> ExponentEstimate:
    """Finite-window estimates of s1 <= s2 <= s3 over [ceil(f K), K]."""
    if K < 100:
        raise InvalidParameter("K must be at least 100")
    if K > r.length:
        raise InvalidParameter("sequence shorter than K")
    lo = max(1.0, math.ceil(window_fraction * K))
    s1, s3 = _window_extremes(r, lo, K)
    caveat = False
    if r.monotone:
        s2 = s3
    else:
        caveat = True
        s2 = partial_sum_root(r.prefix(K))
        s2 = min(max(s2, s1), s3)
    half = K // 2
    if half >= 2 and max(1.0, math.ceil(window_fraction * half)) <= half:
        try:
            h1, h3 = _window_extremes(r, max(1.0, math.ceil(window_fraction * half)), half)
            tail = {"s1_half": h1, "s3_half": h3, "drift_s1": s1 - h1, "drift_s3": s3 - h3}
        except UndefinedExponent:
            tail = {}
    else:
        tail = {}
    if not (s1 <= s2 + 1e-12 and s2 <= s3 + 1e-12):
        raise AssertionError("exponent ordering violated")
    s2 = min(max(s2, s1), s3)
    return ExponentEstimate(s1, s2, s3, (lo, float(K)), tail, caveat)
