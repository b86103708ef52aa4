import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from csp_weighting import moment as mb
from csp_weighting.errors import ExternalFormulaRequired, ParameterError
from csp_weighting.moment import AsymptoticParams, MomentParams


@st.composite
def moment_params(draw, max_n=20):
    n = draw(st.integers(1, max_n))
    s = draw(st.integers(0, n))
    t = draw(st.integers(0, n - s))
    u = draw(st.integers(0, t))
    v = draw(st.integers(0, u))
    p = draw(st.floats(0.0, 1.0))
    rho = draw(st.floats(0.0, 1.0))
    return MomentParams(n, s, t, u, v, p, rho)


def test_type1_census_matches_clause_enumeration():
    n, s = 5, 3
    core = set(range(s))
    count = 0
    for scope in itertools.combinations(range(n), 3):
        for signs in itertools.product((1, -1), repeat=3):
            pos_core = [x for x, sg in zip(scope, signs) if sg > 0 and x in core]
            rest = [(x, sg) for x, sg in zip(scope, signs) if not (sg > 0 and x in core)]
            if len(pos_core) == 3:
                count += 1
            elif len(pos_core) == 2 and rest[0][0] not in core:
                count += 1
    c = mb.clause_census(MomentParams(n, s, 0))
    assert count == c["type1_three_core"] + c["type1_two_core"] == 13


def test_census_degenerate_rows():
    c = mb.clause_census(MomentParams(10, 3, 0))
    assert c["type3_free_triple"] == c["type3_free_pair_star"] == c["type3_starrable"] == 0
    assert c["type3_invertible_star"] == 0
    c = mb.clause_census(MomentParams(10, 3, 4, 0, 0))
    assert c["type3_invertible_star"] == 0 and c["type3_starrable"] == 0
    assert c["type3_nonstarrable_each"] == 6 + 12


def test_q_factor_edge_values():
    assert mb.q_factor(MomentParams(10, 2, 3, 3, 3, 0.0)) == 1.0
    assert mb.q_factor(MomentParams(10, 2, 3, 1, 0, 0.0)) == 0.0


def test_q_factor_against_arbitrary_precision():
    mp = MomentParams(10, 2, 3, 2, 1, 0.1)
    mpmath.mp.dps = 50
    p = mpmath.mpf("0.1")
    n, s, t, u, v = 10, 2, 3, 2, 1
    pair = mpmath.binomial(t, 2) + s * t
    e1 = (mpmath.binomial(t, 3) + s * mpmath.binomial(t, 2) + 2 * (n - s - t) * pair
          + u * pair + 2 * v * (n - s - t) * (s + t))
    q = ((1 - p) ** e1 * (1 - (1 - p) ** pair) ** (t - u)
         * (1 - (1 - p) ** (2 * (n - s - t) * (s + t))) ** (u - v))
    assert mb.log_q_factor(mp) == pytest.approx(float(mpmath.log(q)), rel=1e-12)
    assert mb.q_factor(mp) == pytest.approx(float(q), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(moment_params())
def test_q_factor_is_a_probability(mp):
    assert 0.0 <= mb.q_factor(mp) <= 1.0


@settings(max_examples=300, deadline=None)
@given(moment_params())
def test_unfolded_sum_equals_closed_form(mp):
    closed, unfolded = mb.log_ez_t(mp), mb.log_ez_t_unfolded(mp)
    if closed == -math.inf:
        assert unfolded == -math.inf
    else:
        assert abs(math.expm1(unfolded - closed)) <= 1e-10


def test_closed_form_special_cases():
    # no starred variable: the rho power is 1 and the non-invertible factor sees no slots
    n, s, t, p, rho = 8, 3, 5, 0.1, 0.2
    x = (1 - p) ** (math.comb(t, 2) + s * t)
    expected = (math.comb(n - s, t) * 2 ** t * (1 - p) ** (math.comb(t, 3) + s * math.comb(t, 2))
                * (1 - x * (rho + (1 - rho) / 2)) ** t)
    assert mb.ez_t(MomentParams(n, s, t, 0, 0, p, rho)) == pytest.approx(expected, rel=1e-12)
    assert mb.log_ez_t(MomentParams(8, 3, 2, 0, 0, 0.1, 0.0)) == -math.inf
    # t = 0: only the star weights remain
    assert mb.ez_t(MomentParams(6, 2, 0, 0, 0, 0.3, 0.5)) == pytest.approx(0.5 ** 4)


def test_monte_carlo_agrees_within_three_sigma():
    mp = MomentParams(8, 2, 3, 0, 0, 0.02, 0.7)
    r = mb.monte_carlo_ez_t(mp, trials=100_000, seed=12345)
    assert abs(r.mean - mb.ez_t(mp)) <= 3 * r.stderr
    again = mb.monte_carlo_ez_t(mp, trials=100_000, seed=12345)
    assert again == r


def test_parameter_validation():
    with pytest.raises(ParameterError):
        MomentParams(5, 3, 3)
    with pytest.raises(ParameterError):
        MomentParams(5, 1, 2, 1, 2)
    with pytest.raises(ParameterError):
        MomentParams(5, 1, 2, p=1.5)
    with pytest.raises(ParameterError):
        AsymptoticParams(4.0, 0.0, 0.1, 0.5, 0.0)
    with pytest.raises(ParameterError):
        AsymptoticParams(4.0, 0.5, 0.6, 0.5, 0.0)
    with pytest.raises(ParameterError):
        AsymptoticParams(4.0, 0.9, 0.05, mb.rho_of_a(0.9), 0.0)
    with pytest.raises(ParameterError):
        AsymptoticParams(-1.0, 0.5, 0.1, 0.5, 0.0)


def test_rho_of_a_values():
    assert mb.rho_of_a(0.0) == pytest.approx(0.7067)
    assert mb.rho_of_a(0.678206) == pytest.approx(0.96157, abs=1e-5)
    assert mb.rho_of_a(1.0) == pytest.approx(1.0825)


def test_exponent_rates():
    ap = AsymptoticParams(4.2, 0.4, 0.2, 0.8, 0.1)
    k = 4 - 0.16 * 2.6
    big_a, big_b = mb.exponent_terms(ap)
    assert big_a == pytest.approx(3 * 4.2 * 0.9 * 0.2 * 1.0 / (2 * k))
    assert big_b == pytest.approx(6 * 4.2 * 0.9 * 0.4 * 0.6 / k)


@pytest.mark.parametrize("alpha,a,b,d", [(4.419, 0.678206, 0.0299196, 0.0), (4.0, 0.3, 0.4, 0.2),
                                         (3.5, 0.5, 0.1, -0.3), (4.45, 0.7, 0.29, 0.05)])
def test_exponent_matches_finite_n(alpha, a, b, d):
    ap = AsymptoticParams(alpha, a, b, mb.rho_of_a(a), d)
    assert mb.finite_exponent(ap, 10**6) == pytest.approx(mb.exponent_h(ap), abs=0.01)


def test_exponent_boundaries_use_zero_log_zero():
    a, rho = 0.4, 0.8
    ap = AsymptoticParams(4.0, a, 0.0, rho, 0.1)
    expected = (1 - a) * math.log(1 - a) + (1 - a) * math.log(rho) - (1 - a) * math.log(1 - a)
    assert mb.exponent_h(ap) == pytest.approx(expected)
    assert math.isfinite(mb.exponent_h(AsymptoticParams(4.0, a, 1 - a, rho, 0.1)))
    assert mb.exponent_h(AsymptoticParams(4.0, a, 0.1, 0.0, 0.1)) == -math.inf


def test_paraboloid_sweep():
    r = mb.sweep_maximize(lambda x: -(x - 0.5) ** 2, [(0.0, 1.0)], 0.001, 1e-5)
    assert abs(r.coarse_argmax[0] - 0.5) <= 0.001
    assert abs(r.argmax[0] - 0.5) <= 1e-5 and r.refined and r.nonfinite == 0


def test_sweep_is_deterministic_and_parallel_safe():
    f = lambda x, y: -(x - 0.3137) ** 2 - 2 * (y - 0.7421) ** 2
    box = [(0.0, 1.0), (0.0, 1.0)]
    one = mb.sweep_maximize(f, box, 0.01, 1e-4)
    assert one == mb.sweep_maximize(f, box, 0.01, 1e-4)
    par = mb.sweep_maximize(f, box, 0.01, 1e-4, workers=4)
    assert par.argmax == one.argmax and par.max_value == one.max_value
    swapped = mb.sweep_maximize(lambda y, x: f(x, y), box[::-1], 0.01, 1e-4)
    assert swapped.argmax[::-1] == pytest.approx(one.argmax)


def test_sweep_ties_resolve_lexicographically():
    r = mb.sweep_maximize(lambda x, y: 0.0, [(0.0, 1.0), (0.0, 1.0)], 0.5)
    assert r.argmax == (0.0, 0.0)
    par = mb.sweep_maximize(lambda x, y: 0.0, [(0.0, 1.0), (0.0, 1.0)], 0.5, workers=3)
    assert par.argmax == (0.0, 0.0)


def test_sweep_flags_non_finite_values():
    r = mb.sweep_maximize(lambda x: math.nan if x < 0.5 else -x, [(0.0, 1.0)], 0.1)
    assert r.nonfinite == 5 and r.argmax == (0.5,)
    with pytest.raises(ParameterError):
        mb.sweep_maximize(lambda x: math.inf, [(0.0, 1.0)], 0.5)


@pytest.mark.parametrize("d", [0.0, 0.1])
def test_h_sweep_over_b_agrees_with_golden_section(d):
    a = 0.678206
    h = lambda b: mb.exponent_h(AsymptoticParams(4.419, a, b, mb.rho_of_a(a), d))
    r = mb.sweep_maximize(h, [(0.0, 1 - a)], 0.001, 1e-5)
    lo, hi = max(0.0, r.coarse_argmax[0] - 0.001), min(1 - a, r.coarse_argmax[0] + 0.001)
    g = minimize_scalar(lambda b: -h(b), bracket=(lo, r.coarse_argmax[0], hi), method="golden", tol=1e-10)
    assert 0.0 <= r.argmax[0] <= 1 - a
    assert r.argmax[0] == pytest.approx(g.x, abs=1e-5)
    assert r.max_value == pytest.approx(-g.fun, abs=1e-9)


def test_contour_region_constants_and_bounds():
    box = [(0.0, 1.0), (0.0, 2.0)]
    assert not mb.contour_region(lambda a, r: -1.0, 0.0, box, 0.5).mask.any()
    assert mb.contour_region(lambda a, r: -1.0, 0.0, box, 0.5).bounds() is None
    full = mb.contour_region(lambda a, r: 1.0, 0.0, box, 0.5)
    assert full.mask.all() and full.bounds() == [(0.0, 1.0), (0.0, 2.0)]
    disk = mb.contour_region(lambda a, r: 0.1 - (a - 0.5) ** 2 - (r - 1) ** 2, 0.0, box, 0.05)
    lo, hi = disk.bounds()[0]
    assert lo == pytest.approx(0.5 - 0.3, abs=0.05) and hi == pytest.approx(0.5 + 0.3, abs=0.05)
    assert len(disk.cells()) == int(disk.mask.sum())


def test_f_plugin_loading(tmp_path):
    with pytest.raises(ExternalFormulaRequired):
        mb.missing_f(4.419, 0.5, 2.0)
    path = tmp_path / "f.py"
    path.write_text("def f(alpha, a, r):\n    return -alpha * 0 - (a - 0.5) ** 2 - (r - 2) ** 2\n")
    f = mb.load_f_plugin(path)
    assert f(4.4, 0.5, 2.0) == 0.0
    obj = mb.f_plus_h(f, 0.0)
    ap = AsymptoticParams(4.4, 0.5, 0.1, mb.rho_of_a(0.5), 0.0)
    assert obj(4.4, 0.5, 0.1, 2.0) == pytest.approx(mb.exponent_h(ap))
    assert obj(4.4, 0.9, 0.05, 2.0) == -math.inf
    bad = tmp_path / "g.py"
    bad.write_text("g = 1\n")
    with pytest.raises(ExternalFormulaRequired):
        mb.load_f_plugin(bad)


def test_grid_axis_hits_both_ends():
    ax = mb.grid_axis(0.28, 0.75, 0.001)
    assert len(ax) == 471 and ax[0] == 0.28 and ax[-1] == pytest.approx(0.75)
    with pytest.raises(ParameterError):
        mb.grid_axis(1.0, 0.0, 0.1)
