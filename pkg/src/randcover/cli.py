"""Command-line interface.  Tabular output is CSV with a header row.

Exit codes: 0 success, 2 validation error, 3 partial failure.
"""

from __future__ import annotations

import json
import sys
from functools import wraps
from pathlib import Path

import click

from .errors import RandCoverError

EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _guard(fn):
    """Map library errors to exit code 2 with a one-line message."""
    @wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RandCoverError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    return inner


def _emit(text: str, out: str | None, default_name: str) -> None:
    if out is None:
        click.echo(text, nl=False)
        return
    p = Path(out)
    if p.suffix == "":
        p.mkdir(parents=True, exist_ok=True)
        p = p / default_name
    else:
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    click.echo(str(p), err=True)


seed_opt = click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
threads_opt = click.option("--threads", type=click.IntRange(1), default=1, show_default=True,
                           help="Worker threads (results do not depend on it).")
out_opt = click.option("--out", type=click.Path(), default=None,
                       help="Output file or directory (default: stdout).")
scheme_opt = click.option("--scheme", "scheme_spec", required=True,
                          help="lebesgue[:a,b] | middle:ratio | oscillating:alpha,beta | "
                               "spaced:s,u,ell0 | path to scheme JSON.")
depth_opt = click.option("--depth", type=int, default=None, help="Construction depth.")


@click.group()
@click.version_option("0.1.0", prog_name="randcover")
def main():
    """Random covering sets: simulation, dimension estimates and energies."""


# -- scheme ---------------------------------------------------------------------------

@main.group()
def scheme():
    """Generating measures."""


@scheme.command("build")
@scheme_opt
@depth_opt
@out_opt
@_guard
def scheme_build(scheme_spec, depth, out):
    """Print the level table (level, length, branching, cylinder mass) and save the JSON rule."""
    from .harness import parse_scheme, rows_to_csv
    sch = parse_scheme(scheme_spec, depth)
    rows = [{"level": 0, "length": sch.ell0, "branching": "", "mass": 1.0}]
    mass = 1.0
    for n, spec in enumerate(sch.levels, start=1):
        mass /= float(spec.branching)
        rows.append({"level": n, "length": spec.child_length, "branching": spec.branching,
                     "mass": mass})
    _emit(rows_to_csv(["level", "length", "branching", "mass"], rows), out, "levels.csv")
    if out is not None:
        base = Path(out) if Path(out).suffix == "" else Path(out).parent
        (base / "scheme.json").write_text(sch.to_json() + "\n")


# -- radii ------------------------------------------------------------------------------

@main.group()
def radii():
    """Radii sequences."""


@radii.command("analyze")
@click.option("--rule", required=True, help="power:alpha | block:gamma,s0 | file:path")
@click.option("--scheme", "scheme_spec", default=None, help="Scheme (block radii only).")
@click.option("--K", "K", type=int, default=None, help="Horizon (default: 10^6 or last block).")
@click.option("--window-fraction", type=float, default=0.5, show_default=True)
@out_opt
@_guard
def radii_analyze(rule, scheme_spec, K, window_fraction, out):
    """Finite-window critical exponents s1 <= s2 <= s3."""
    from .harness import parse_radii, parse_scheme, rows_to_csv
    from .radii import critical_exponents
    sch = parse_scheme(scheme_spec) if scheme_spec else None
    r = parse_radii(rule, sch)
    if K is None:
        K = int(r.length) if r.kind != "power" else 10 ** 6
    est = critical_exponents(r, K, window_fraction)
    row = {"K": K, "s1_hat": est.s1_hat, "s2_hat": est.s2_hat, "s3_hat": est.s3_hat,
           "window_lo": est.window[0], "window_hi": est.window[1],
           "drift_s1": est.tail_diagnostic.get("drift_s1", ""),
           "drift_s3": est.tail_diagnostic.get("drift_s3", ""),
           "non_monotone": int(est.non_monotone_caveat)}
    _emit(rows_to_csv(list(row), [row]), out, "exponents.csv")


# -- simulate / dimension -----------------------------------------------------------------

def _realization(scheme_spec, rule, K, seed, threads):
    from .covering import realize
    from .harness import parse_radii, parse_scheme
    sch = parse_scheme(scheme_spec)
    r = parse_radii(rule, sch)
    if K is None:
        if r.kind != "block":
            raise click.BadParameter("--K is required for this radii rule")
        K = int(r.blocks[-1].stop)
    return realize(sch, r, K, seed, threads)


@main.command()
@scheme_opt
@click.option("--radii", "rule", required=True, help="power:alpha | block:gamma,s0 | file:path")
@click.option("--K", "K", type=int, default=None)
@click.option("--n0", type=int, default=1000, show_default=True)
@click.option("--m", "m", type=int, default=4, show_default=True)
@seed_opt
@threads_opt
@out_opt
@_guard
def simulate(scheme_spec, rule, K, n0, m, seed, threads, out):
    """Sample a covering and write the block-intersection surrogate as intervals."""
    from .covering import geometric_blocks, limsup_approx
    real = _realization(scheme_spec, rule, K, seed, threads)
    approx = limsup_approx(real, geometric_blocks(real.K, n0, m))
    _emit(approx.union.to_csv(), out, "surrogate.csv")
    if out is not None:
        base = Path(out) if Path(out).suffix == "" else Path(out).parent
        (base / "realization.json").write_text(
            json.dumps(real.manifest() | {"blocks": approx.blocks}, sort_keys=True) + "\n")


@main.command()
@scheme_opt
@click.option("--radii", "rule", required=True)
@click.option("--K", "K", type=int, default=None)
@click.option("--method", type=click.Choice(["auto", "scale_matched", "cylinder", "intersection"]),
              default="auto", show_default=True)
@click.option("--points/--no-points", default=False, help="Emit the raw (log 1/delta, log N) points.")
@seed_opt
@threads_opt
@out_opt
@_guard
def dimension(scheme_spec, rule, K, method, points, seed, threads, out):
    """Estimate the dimension of the covering set for one seed."""
    from .estimators import CSV_FIT_HEADER, limsup_dimension
    from .harness import rows_to_csv
    real = _realization(scheme_spec, rule, K, seed, threads)
    fit = limsup_dimension(real, method=method)
    if points:
        text = rows_to_csv(["log_inv_delta", "log_count"],
                           [{"log_inv_delta": a, "log_count": b} for a, b in fit.points])
    else:
        text = rows_to_csv(CSV_FIT_HEADER, [fit.csv_row()])
    _emit(text, out, "dimension.csv")


# -- energy / diagnose -----------------------------------------------------------------------

@main.command()
@scheme_opt
@click.option("--t", "t", type=float, required=True)
@click.option("--method", type=click.Choice(["recursive-exact", "cylinder-quadrature", "monte-carlo"]),
              default="cylinder-quadrature", show_default=True)
@click.option("--restrict", type=(float, float), default=None, help="Interval A for mu_A.")
@click.option("--leaf", type=click.Choice(["frostman", "uniform"]), default="frostman",
              show_default=True)
@click.option("--pairs", type=int, default=400_000, show_default=True)
@depth_opt
@seed_opt
@out_opt
@_guard
def energy(scheme_spec, t, method, restrict, leaf, pairs, depth, seed, out):
    """t-energy of a measure or of a normalised restriction."""
    from .energy import ENERGY_CSV_HEADER, restricted_normalized, t_energy
    from .harness import parse_scheme, rows_to_csv
    sch = parse_scheme(scheme_spec)
    view = restricted_normalized(sch, restrict)
    rep = t_energy(view, t, method, depth=depth, leaf=leaf, n_pairs=pairs, seed=seed)
    _emit(rows_to_csv(ENERGY_CSV_HEADER, [rep.csv_row()]), out, "energy.csv")


@main.command()
@scheme_opt
@click.option("--radii", "rule", required=True)
@click.option("--kind", type=click.Choice(["mass", "energy"]), default="mass", show_default=True)
@click.option("--t", "t", type=float, required=True)
@click.option("--u", "u", type=float, required=True)
@click.option("--s", "s", type=float, required=True)
@click.option("--samples", type=int, default=8, show_default=True)
@click.option("--horizon", type=int, default=1 << 16, show_default=True)
@seed_opt
@out_opt
@_guard
def diagnose(scheme_spec, rule, kind, t, u, s, samples, horizon, seed, out):
    """Partial-sum growth of the divergence conditions."""
    from .energy import (DiagnosticConfig, energy_divergence_diagnostic,
                         mass_divergence_diagnostic)
    from .harness import parse_radii, parse_scheme
    sch = parse_scheme(scheme_spec)
    r = parse_radii(rule, sch)
    cfg = DiagnosticConfig(t=t, u=u, s=s, sample_count=samples, horizon=horizon, seed=seed)
    fn = mass_divergence_diagnostic if kind == "mass" else energy_divergence_diagnostic
    rep = fn(sch, r, cfg)
    _emit(rep.to_csv(), out, f"{kind}_growth.csv")
    click.echo(f"trend={rep.trend} divergent_fraction={rep.divergent_fraction:.3f}", err=True)


# -- sweep / run / report -----------------------------------------------------------------------

@main.group()
def sweep():
    """Parameter sweeps."""


@sweep.command("triangle")
@click.option("--s", "s", type=float, default=0.4, show_default=True)
@click.option("--u", "u", type=float, default=0.8, show_default=True)
@click.option("--ell0", type=float, default=0.7, show_default=True)
@click.option("--gammas", default="0.5,0.625,0.75,0.875,1.0", show_default=True)
@click.option("--s0s", default="0.2,0.3,0.4", show_default=True)
@click.option("--tol", type=float, default=0.08, show_default=True)
@seed_opt
@threads_opt
@out_opt
@_guard
def sweep_triangle(s, u, ell0, gammas, s0s, tol, seed, threads, out):
    """Simulated (s2_hat, slope) points against the edges s2 and s2 * s/u."""
    from .harness import TRIANGLE_HEADER, _floats, rows_to_csv, triangle_sweep
    rows = triangle_sweep(s, u, ell0, _floats(gammas), _floats(s0s), seed, tol, threads)
    _emit(rows_to_csv(TRIANGLE_HEADER, rows), out, "triangle.csv")
    if any(r["status"] != "ok" for r in rows):
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@threads_opt
@out_opt
@_guard
def run(config, threads, out):
    """Run an experiment config (JSON); writes per-seed CSVs and manifest.json."""
    from .harness import ExperimentConfig, run_experiment
    cfg = ExperimentConfig.load(config)
    man = run_experiment(cfg, out, threads)
    click.echo(f"status={man.status} seeds={len(man.results)} failed={len(man.failures)}", err=True)
    if man.status != "ok":
        sys.exit(EXIT_PARTIAL)


@main.command("report")
@click.argument("directory", type=click.Path(exists=True))
@out_opt
@_guard
def report_cmd(directory, out):
    """Mean/stderr table over the seeds of a run."""
    from .harness import report
    rep = report(directory)
    _emit(rep.to_csv(), out, "report.csv")
    for w in rep.warnings:
        click.echo(f"warning: {w}", err=True)
    if rep.warnings:
        sys.exit(EXIT_PARTIAL)


if __name__ == "__main__":  # pragma: no cover
    main()
