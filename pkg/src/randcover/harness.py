"""Experiment configs, reproducible runs, sweeps and reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .covering import realize
from .errors import InvalidParameter, RandCoverError
from .estimators import CSV_FIT_HEADER, limsup_dimension
from .measures import (CantorScheme, build_lebesgue, build_middle_cantor,
                       build_oscillating_cantor, build_spaced_cantor, scheme_from_dict)
from .radii import RadiiSequence, block_radii, critical_exponents, load_radii, radii_from_rule

SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"
METHODS = ("auto", "scale_matched", "cylinder", "intersection")
SEED_HEADER = ["seed"] + CSV_FIT_HEADER + ["s1_hat", "s2_hat", "s3_hat"]


# -- spec strings ------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def parse_scheme(spec: str | dict, depth: int | None = None) -> CantorScheme:
    """Build a scheme from a dict, a JSON file path, or a short spec string.

    Short forms: ``lebesgue[:a,b]``, ``middle:ratio``, ``oscillating:alpha,beta``,
    ``spaced:s,u,ell0``.
    """
    if isinstance(spec, dict):
        return scheme_from_dict(spec)
    p = Path(spec)
    if spec.endswith(".json") and p.exists():
        return scheme_from_dict(json.loads(p.read_text()))
    kind, _, args = spec.partition(":")
    try:
        vals = _floats(args) if args else []
        if kind == "lebesgue":
            a, b = vals if vals else (0.0, 1.0)
            return build_lebesgue(a, b, depth or 52)
        if kind == "middle":
            return build_middle_cantor(vals[0], depth=depth)
        if kind == "oscillating":
            return build_oscillating_cantor(vals[0], vals[1], depth=depth or 40)
        if kind == "spaced":
            return build_spaced_cantor(vals[0], vals[1], vals[2], depth)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise InvalidParameter(f"malformed scheme spec {spec!r}") from exc
    raise InvalidParameter(f"unknown scheme spec {spec!r}")


def parse_radii(spec: str | dict, scheme: CantorScheme | None = None) -> RadiiSequence:
    """``power:alpha``, ``block:gamma,s0``, ``file:path`` or a rule dict."""
    if isinstance(spec, dict):
        return radii_from_rule(spec, scheme)
    kind, _, args = spec.partition(":")
    try:
        if kind == "power":
            return radii_from_rule({"kind": "power", "parameters": {"alpha": float(args)}})
        if kind == "block":
            if scheme is None:
                raise InvalidParameter("block radii need a scheme")
            g, s0 = _floats(args)
            return block_radii(scheme, g, s0)
        if kind == "file":
            return load_radii(args)
    except (ValueError, OSError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise InvalidParameter(f"malformed radii spec {spec!r}: {exc}") from exc
    raise InvalidParameter(f"unknown radii spec {spec!r}")


def _scheme_doc(scheme: CantorScheme) -> dict:
    return json.loads(scheme.to_json())


# -- config and manifest -------------------------------------------------------------

@dataclass
class ExperimentConfig:
    name: str
    scheme: dict
    radii: dict
    K: int | None
    seeds: list[int]
    method: str = "auto"
    block_schedule: dict = field(default_factory=lambda: {"n0": 1000, "m": 4})
    delta_grid: list[float] | None = None
    estimators: dict = field(default_factory=lambda: {"dimension": True, "exponents": True})
    output_dir: str = "runs"
    threads: int = 1
    tolerances: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise InvalidParameter(f"unknown config keys: {sorted(extra)}")
        missing = {"name", "scheme", "radii", "seeds"} - set(doc)
        if missing:
            raise InvalidParameter(f"missing config keys: {sorted(missing)}")
        cfg = cls(**{**{"K": None}, **doc})
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParameter(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def build(self) -> tuple[CantorScheme, RadiiSequence, int]:
        scheme = scheme_from_dict(self.scheme)
        radii = radii_from_rule(self.radii, scheme)
        K = int(radii.length) if self.K is None else int(self.K)
        return scheme, radii, K

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidParameter(f"unsupported schema_version {self.schema_version}")
        if not self.seeds:
            raise InvalidParameter("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise InvalidParameter("duplicate seeds")
        if self.method not in METHODS:
            raise InvalidParameter(f"method must be one of {METHODS}")
        if self.threads < 1:
            raise InvalidParameter("threads must be positive")
        if self.K is None and self.radii.get("kind") != "block":
            raise InvalidParameter("K is required unless radii are block radii")
        _, radii, K = self.build()
        if K < 1:
            raise InvalidParameter("K must be positive")
        if K > radii.length:
            raise InvalidParameter("K exceeds the radii sequence")

    def materialized(self) -> dict:
        """Every field, defaults included, with K resolved."""
        doc = asdict(self)
        doc["K"] = self.build()[2]
        return doc

    def content_hash(self) -> str:
        doc = self.materialized()
        doc.pop("output_dir")
        doc.pop("threads")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    tool_version: str
    timestamp: str
    input_hash: str
    results: list[dict]
    failures: list[dict]

    @property
    def status(self) -> str:
        if not self.failures:
            return "ok"
        return "failed" if not self.results else "partial"

    def to_json(self) -> str:
        return json.dumps(asdict(self) | {"status": self.status}, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        doc.pop("status", None)
        return cls(**doc)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(h, "")) for h in header])
    path.write_text(buf.getvalue())


def _one_seed(cfg: ExperimentConfig, scheme, radii, K, seed: int, out: Path) -> dict:
    real = realize(scheme, radii, K, seed)
    row = {"seed": seed}
    files = {}
    if cfg.estimators.get("dimension", True):
        blocks = None
        if cfg.method == "intersection":
            from .covering import geometric_blocks
            blocks = geometric_blocks(K, **cfg.block_schedule)
        fit = limsup_dimension(real, blocks, cfg.delta_grid, cfg.method)
        row.update(fit.csv_row())
        pts = out / f"points_seed{seed}.csv"
        _write_csv(pts, ["log_inv_delta", "log_count"],
                   [{"log_inv_delta": a, "log_count": b} for a, b in fit.points])
        files["points"] = pts.name
    if cfg.estimators.get("exponents", True):
        est = critical_exponents(radii, K)
        row.update({"s1_hat": est.s1_hat, "s2_hat": est.s2_hat, "s3_hat": est.s3_hat})
    res = out / f"seed{seed}.csv"
    _write_csv(res, SEED_HEADER, [row])
    files["result"] = res.name
    return {"seed": seed, "files": files,
            "hashes": {k: _sha(out / v) for k, v in files.items()}}


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int | None = None) -> RunManifest:
    """Run every seed; a failing seed is recorded and the others proceed."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scheme, radii, K = cfg.build()
    threads = cfg.threads if threads is None else threads

    def job(seed):
        try:
            return _one_seed(cfg, scheme, radii, K, int(seed), out), None
        except (RandCoverError, ArithmeticError, MemoryError, ValueError) as exc:
            return None, {"seed": int(seed), "error": f"{type(exc).__name__}: {exc}"}

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            outcomes = list(ex.map(job, cfg.seeds))
    else:
        outcomes = [job(s) for s in cfg.seeds]
    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    manifest = RunManifest(cfg.materialized(), TOOL_VERSION,
                           time.strftime("%Y-%m-%dT%H:%M:%S%z"), cfg.content_hash(),
                           results, failures)
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest


def rerun_manifest(path, out_dir) -> tuple[RunManifest, bool]:
    """Re-execute a stored manifest and compare every result hash."""
    old = RunManifest.load(path)
    cfg = ExperimentConfig.from_dict(old.config)
    new = run_experiment(cfg, out_dir)
    before = {r["seed"]: r["hashes"] for r in old.results}
    after = {r["seed"]: r["hashes"] for r in new.results}
    return new, before == after


# -- triangle sweep --------------------------------------------------------------------

TRIANGLE_HEADER = ["gamma", "s0", "s2_hat", "slope", "stderr", "lower_edge", "upper_edge",
                   "f_theory", "inside", "status"]


def triangle_sweep(s: float, u: float, ell0: float, gammas, s0s, seed: int = 0,
                   tol: float = 0.08, threads: int = 1) -> list[dict]:
    """One simulated (s2_hat, slope) point per admissible (gamma, s0)."""
    scheme = build_spaced_cantor(s, u, ell0)

    def point(g, s0):
        row = {"gamma": g, "s0": s0}
        try:
            radii = block_radii(scheme, g, s0)
            K = radii.blocks[-1].stop
            est = critical_exponents(radii, K)
            fit = limsup_dimension(realize(scheme, radii, K, seed))
            lower, upper = est.s2_hat * s / u, est.s2_hat
            row.update(s2_hat=est.s2_hat, slope=fit.slope, stderr=fit.stderr,
                       lower_edge=lower, upper_edge=upper, f_theory=s0 * g,
                       inside=int(lower - tol <= fit.slope <= upper + tol), status="ok")
        except RandCoverError as exc:
            row.update(status=f"error: {exc}")
        return row

    pairs = [(float(g), float(s0)) for g in gammas for s0 in s0s]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda p: point(*p), pairs))
    return [point(*p) for p in pairs]


def rows_to_csv(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(h, "")) for h in header])
    return buf.getvalue()


# -- report ------------------------------------------------------------------------------

REPORT_HEADER = ["name", "quantity", "mean", "stderr", "n", "flags"]


@dataclass
class Report:
    rows: list[dict]
    warnings: list[str]

    def to_csv(self) -> str:
        return rows_to_csv(REPORT_HEADER, self.rows)

    def text(self) -> str:
        lines = [f"{r['name']} {r['quantity']}: mean={_fmt(r['mean'])} "
                 f"stderr={_fmt(r['stderr']) if r['stderr'] != '' else '-'} n={r['n']}"
                 + (f" [{r['flags']}]" if r["flags"] else "") for r in self.rows]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def report(target) -> Report:
    """Aggregate per-seed results of a run directory (or manifest path)."""
    path = Path(target)
    mpath = path if path.is_file() else path / "manifest.json"
    if not mpath.exists():
        raise InvalidParameter(f"no manifest at {mpath}")
    manifest = RunManifest.load(mpath)
    base = mpath.parent
    warnings = [f"seed {f['seed']} failed: {f['error']}" for f in manifest.failures]
    values: dict[str, list[float]] = {}
    for res in manifest.results:
        f = base / res["files"]["result"]
        try:
            with f.open() as fh:
                rows = list(csv.DictReader(fh))
            if len(rows) != 1 or rows[0].get("seed") != str(res["seed"]):
                raise ValueError("unexpected layout")
            parsed = {q: float(rows[0][q]) for q in ("slope", "s1_hat", "s2_hat", "s3_hat")
                      if rows[0].get(q) not in (None, "")}
        except (OSError, ValueError, KeyError, csv.Error) as exc:
            warnings.append(f"{f.name}: unreadable result ({exc}); row excluded")
            continue
        for q, v in parsed.items():
            values.setdefault(q, []).append(v)
    name = manifest.config.get("name", base.name)
    out = []
    for q, vals in values.items():
        n = len(vals)
        arr = np.asarray(vals)
        se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else ""
        out.append({"name": name, "quantity": q, "mean": float(arr.mean()), "stderr": se,
                    "n": n, "flags": "" if n > 1 else "single-seed"})
    return Report(out, warnings)
