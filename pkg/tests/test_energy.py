import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from randcover import (IntervalUnion, InvalidParameter, PrecisionNotReached,
                       ZeroMeasureRestriction, build_lebesgue, build_middle_cantor,
                       build_oscillating_cantor, capacity_lower_bound, frostman_energy_check,
                       interval_mass, mutual_energy, power_radii, restricted_normalized,
                       sample_points, scale_scheme, t_energy, t_potential)
from randcover.energy import (ENERGY_CSV_HEADER, DiagnosticConfig, capacity_lower_bound_max,
                              energy_divergence_diagnostic, frostman_parameters,
                              lemma_constant, mass_divergence_diagnostic, uniform_pair_energy,
                              uniform_potential, uniform_self_energy)
from randcover.measures import certified_frostman_constant

LOG2_3 = math.log(2) / math.log(3)


def overlap(a, b):
    return a.lower <= b.upper and b.lower <= a.upper


# -- closed forms against numerical quadrature ------------------------------------------

@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_uniform_self_energy_quadrature(t):
    # I_t(U[0,L]) = (2/L^2) * int_0^L (L - h) h^-t dh
    L = 0.7
    val, _ = integrate.quad(lambda h: 2 * (L - h) * h ** -t / L ** 2, 0, L)
    assert uniform_self_energy(L, t) == pytest.approx(val, rel=1e-9)


@pytest.mark.parametrize("t", [0.3, 1.0, 1.5])
def test_uniform_pair_energy_quadrature(t):
    a1, b1, a2, b2 = 0.0, 0.4, 0.9, 1.6
    val, _ = integrate.dblquad(lambda y, x: abs(x - y) ** -t, a1, b1, a2, b2)
    val /= (b1 - a1) * (b2 - a2)
    assert uniform_pair_energy(a1, b1, a2, b2, t) == pytest.approx(val, rel=1e-7)


@pytest.mark.parametrize("x", [0.5, 0.1, 2.0])
def test_uniform_potential_quadrature(x):
    t = 0.5
    pts = [x] if 0 < x < 1 else None
    val, _ = integrate.quad(lambda y: abs(x - y) ** -t, 0, 1, points=pts)
    assert uniform_potential(x, 0.0, 1.0, t) == pytest.approx(val, rel=1e-8)


# -- potentials --------------------------------------------------------------------------

def test_potential_lebesgue_midpoint(unit_lebesgue):
    rep = t_potential(unit_lebesgue, 0.5, 0.5)
    assert rep.lower <= 2 * math.sqrt(2) <= rep.upper
    assert rep.value == pytest.approx(2 * math.sqrt(2), rel=1e-6)


def test_potential_small_t_tends_to_one(middle_third):
    assert t_potential(middle_third, 0.3, 1e-6).value == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("scheme_name", ["middle_third", "unit_lebesgue"])
def test_potential_far_from_support(request, scheme_name):
    sch = request.getfixturevalue(scheme_name)
    D, t = 3.0, 0.7
    rep = t_potential(sch, 1.0 + D, t)
    assert (D + 1.0) ** -t - 1e-12 <= rep.lower <= rep.upper <= D ** -t + 1e-12


def test_potential_bracket_contains_sampled_estimate(middle_third):
    y = sample_points(middle_third, 200_000, seed=1)
    x, t = 0.5, 0.4  # x is in the gap, so the kernel is bounded
    mc = np.mean(np.abs(x - y) ** -t)
    rep = t_potential(middle_third, x, t)
    assert rep.lower * 0.99 <= mc <= rep.upper * 1.01


# -- energies ----------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["recursive-exact", "cylinder-quadrature", "monte-carlo"])
def test_lebesgue_half_energy(unit_lebesgue, method):
    rep = t_energy(unit_lebesgue, 0.5, method, seed=1)
    assert rep.value == pytest.approx(8 / 3, rel=0.01)
    assert rep.lower <= rep.upper
    assert set(rep.csv_row()) == set(ENERGY_CSV_HEADER)


def test_energy_small_t_tends_to_one(middle_third):
    rep = t_energy(middle_third, 1e-6)
    assert rep.value == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("t", [0.3, 0.5])
def test_middle_third_methods_overlap(middle_third, t):
    exact = t_energy(middle_third, t, "recursive-exact")
    quad = t_energy(middle_third, t, "cylinder-quadrature")
    mc = t_energy(middle_third, t, "monte-carlo", seed=2)
    assert overlap(exact, mc) and overlap(exact, quad) and overlap(quad, mc)
    assert math.isfinite(exact.value) and exact.value > 0


def test_recursive_exact_diverges_above_dimension(middle_third):
    rep = t_energy(middle_third, 0.7, "recursive-exact")
    assert rep.diverged and rep.value is None


def test_precision_not_reached_carries_bracket(middle_third):
    with pytest.raises(PrecisionNotReached) as info:
        t_energy(middle_third, 0.6, "cylinder-quadrature", budget=2000, tol=1e-9)
    assert info.value.lower <= info.value.upper


def test_energy_rejects_non_positive_t(middle_third):
    with pytest.raises(InvalidParameter):
        t_energy(middle_third, 0.0)


def test_energy_monotone_in_t(middle_third):
    grid = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55]
    reps = [t_energy(middle_third, t, "recursive-exact") for t in grid]
    for a, b in zip(reps, reps[1:]):
        assert a.lower <= b.upper
        assert a.value <= b.value


@pytest.mark.parametrize("lam", [2.0, 0.5])
@pytest.mark.parametrize("method", ["recursive-exact", "cylinder-quadrature"])
def test_scaling_covariance(middle_third, lam, method):
    t = 0.4
    base = t_energy(middle_third, t, method)
    scaled = t_energy(scale_scheme(middle_third, lam), t, method)
    assert scaled.value == pytest.approx(lam ** -t * base.value, rel=1e-12)


@pytest.mark.parametrize("lam", [2.0, 0.5])
def test_scaling_covariance_lebesgue(lam):
    t = 0.5
    base = t_energy(build_lebesgue(0, 1), t)
    scaled = t_energy(build_lebesgue(0, lam), t)
    assert scaled.value == pytest.approx(lam ** -t * base.value, rel=1e-12)


# -- restrictions and mutual energies ------------------------------------------------------

def test_restriction_identity_and_doubling(middle_third):
    whole = restricted_normalized(middle_third, (-1, 2))
    assert whole.is_whole and whole.mass_lo == whole.mass_hi == 1.0
    left = restricted_normalized(middle_third, (0, 1 / 3))
    assert left.interval_mass(0, 1 / 9) == pytest.approx(0.5)
    with pytest.raises(ZeroMeasureRestriction):
        restricted_normalized(middle_third, (0.34, 0.66))


def test_restricted_cylinder_energy_is_rescaled_whole(middle_third):
    t = 0.4
    whole = t_energy(middle_third, t, "recursive-exact")
    part = t_energy(restricted_normalized(middle_third, (0, 1 / 3)), t)
    assert part.value == pytest.approx(3 ** t * whole.value, rel=2e-3)


def test_mutual_energy_of_view_with_itself(middle_third):
    v = restricted_normalized(middle_third)
    j = mutual_energy(v, v, 0.5)
    i = t_energy(middle_third, 0.5)
    assert overlap(i, j)


def test_mutual_energy_separated_supports(middle_third):
    t = 0.5
    a = restricted_normalized(middle_third, (0, 1 / 3))
    b = restricted_normalized(middle_third, (2 / 3, 1))
    j = mutual_energy(a, b, t)
    D = 1 / 3
    assert (D + 2 / 3) ** -t <= j.lower <= j.upper <= D ** -t
    back = mutual_energy(b, a, t)
    assert overlap(j, back)


def test_bilinearity_on_lebesgue_halves(unit_lebesgue):
    t = 0.5
    h1 = restricted_normalized(unit_lebesgue, (0, 0.5))
    h2 = restricted_normalized(unit_lebesgue, (0.5, 1))
    i1, i2 = t_energy(h1, t), t_energy(h2, t)
    assert i1.value == pytest.approx(0.5 ** -t * 8 / 3, rel=1e-3)
    j = mutual_energy(h1, h2, t)
    whole = 0.25 * (i1.value + i2.value + 2 * j.value)
    assert whole == pytest.approx(8 / 3, rel=1e-3)


# -- capacity ------------------------------------------------------------------------------

def test_capacity_unit_interval():
    U = IntervalUnion.from_intervals([0.0], [1.0])
    assert capacity_lower_bound(U, 0.5) == pytest.approx(0.375, rel=1e-6)


def test_capacity_tiny_set_small_positive():
    U = IntervalUnion.from_intervals([0.0, 0.5], [1e-6, 0.5 + 1e-6])
    cap = capacity_lower_bound(U, 0.9)
    assert 0 < cap < 0.01


def test_capacity_witness_max():
    small = IntervalUnion.from_intervals([0.0], [0.1])
    big = IntervalUnion.from_intervals([0.0, 0.9], [0.1, 1.0])
    both = capacity_lower_bound_max(small, big, 0.5)
    assert both == max(capacity_lower_bound(small, 0.5), capacity_lower_bound(big, 0.5))


def test_capacity_empty_rejected():
    with pytest.raises(InvalidParameter):
        capacity_lower_bound(IntervalUnion.empty(), 0.5)


# -- Lemma bound ----------------------------------------------------------------------------

def _triples(scheme, s, n, seed):
    rng = np.random.default_rng(seed)
    x = sample_points(scheme, n, seed)
    r = 10.0 ** rng.uniform(-6, -0.5, n)
    t = rng.uniform(0.05, 0.95, n) * s
    return x, r, t


def test_lemma_holds_on_lebesgue(unit_lebesgue):
    C, s = frostman_parameters(unit_lebesgue)
    assert (C, s) == (2.0, 1.0)
    x, r, t = _triples(unit_lebesgue, s, 100, 1)
    assert frostman_energy_check(unit_lebesgue, x, r, t, C, s).violations == 0


def test_lemma_holds_on_middle_third(middle_third):
    s = LOG2_3
    C = certified_frostman_constant(middle_third, s)
    x, r, t = _triples(middle_third, s, 60, 2)
    rep = frostman_energy_check(middle_third, x, r, t, C, s)
    assert rep.violations == 0 and rep.checked == 60
    assert rep.to_csv().splitlines()[0].startswith("x,r,t")


def test_lemma_negative_control(middle_third):
    s = LOG2_3
    C = certified_frostman_constant(middle_third, s) / 10
    x, r, t = _triples(middle_third, s, 40, 3)
    assert frostman_energy_check(middle_third, x, r, t, C, s).violations >= 1


def test_lemma_rejects_t_above_s(middle_third):
    with pytest.raises(InvalidParameter):
        frostman_energy_check(middle_third, [0.0], [0.1], [0.7], 3.0, LOG2_3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 10), st.floats(0.2, 1.0), st.floats(0.01, 0.99))
def test_lemma_constant_formula(C, s, frac):
    t = frac * s
    assert lemma_constant(C, s, t) == pytest.approx(C ** (t / s) * s / (s - t))


# -- oscillating Cantor boundedness --------------------------------------------------------

@pytest.mark.parametrize("t", [0.2, 0.3])
def test_oscillating_cylinder_energy_products_bounded(t):
    # I_t of the normalised level-n cylinder times its length**t oscillates with
    # the block pattern of ratios but stays bounded.
    osc = build_oscillating_cantor(0.25, 0.125)
    vals = []
    for n in range(1, 9):
        L = osc.lengths[n]
        rep = t_energy(restricted_normalized(osc, (0.0, L)), t, leaf="uniform", depth=40)
        vals.append(rep.value * L ** t)
    vals = np.array(vals)
    assert vals.max() / vals.min() < 2


# -- divergence diagnostics -----------------------------------------------------------------

def test_mass_diagnostic_lebesgue_doubling_ratio(unit_lebesgue):
    t = 0.3
    cfg = DiagnosticConfig(t=t, u=1.0, s=1.0, sample_count=4, horizon=1 << 16, seed=1)
    rep = mass_divergence_diagnostic(unit_lebesgue, power_radii(2), cfg)
    assert rep.trend == "divergent"
    assert rep.mean_doubling_ratio() == pytest.approx(2 ** (1 - 2 * t), rel=0.05)
    assert np.all(rep.member_fraction > 0.99)
    assert rep.to_csv().startswith("sample,N,partial_sum,doubling_ratio")


def test_mass_diagnostic_plateau(unit_lebesgue):
    cfg = DiagnosticConfig(t=0.6, u=1.0, s=1.0, sample_count=4, horizon=1 << 16, seed=1)
    assert mass_divergence_diagnostic(unit_lebesgue, power_radii(2), cfg).trend == "plateau"


def test_mass_diagnostic_membership_vanishes_for_small_u(middle_third):
    cfg = DiagnosticConfig(t=0.2, u=0.4, s=LOG2_3, sample_count=4, horizon=1 << 14, seed=2)
    rep = mass_divergence_diagnostic(middle_third, power_radii(2), cfg)
    assert np.all(rep.member_fraction < 0.05)


def test_mass_diagnostic_middle_quarter():
    sch = build_middle_cantor(0.25)
    cfg = DiagnosticConfig(t=0.24, u=0.55, s=0.5, sample_count=4, horizon=1 << 16, seed=3)
    rep = mass_divergence_diagnostic(sch, power_radii(2), cfg)
    assert rep.trend == "divergent"
    assert "gap_structure" in rep.extras


@pytest.mark.parametrize("t,trend", [(0.3, "divergent"), (0.6, "plateau")])
def test_energy_diagnostic_agrees_with_mass(unit_lebesgue, t, trend):
    cfg = DiagnosticConfig(t=t, u=1.0, s=1.0, sample_count=4, horizon=1 << 16, seed=1)
    mass = mass_divergence_diagnostic(unit_lebesgue, power_radii(2), cfg)
    energy = energy_divergence_diagnostic(unit_lebesgue, power_radii(2), cfg)
    assert mass.trend == energy.trend == trend


def test_energy_diagnostic_on_singular_measure():
    sch = build_middle_cantor(0.25)
    cfg = DiagnosticConfig(t=0.24, u=0.55, s=0.5, sample_count=2, horizon=1 << 12, seed=3,
                           max_energy_evals=50)
    rep = energy_divergence_diagnostic(sch, power_radii(2), cfg)
    assert rep.partial_sums.shape[0] == 2
    assert np.all(rep.indeterminate >= 0)


def test_diagnostic_config_validation():
    with pytest.raises(InvalidParameter):
        DiagnosticConfig(t=0.6, u=1.0, s=0.5)
    with pytest.raises(InvalidParameter):
        DiagnosticConfig(t=0.1, u=1.0, s=0.5, horizon=4)
