import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from azuma_lab.bounds import (
    AdditiveQuery,
    BoundQuery,
    ChernoffQuery,
    TailBound,
    additive_azuma,
    check_log_inequalities,
    chernoff,
    compare_recycling_bounds,
    log_mgf_bound,
    mgf_bound,
    mult_azuma_lower,
    mult_azuma_lower_sharp,
    mult_azuma_upper,
    mult_azuma_upper_sharp,
    recycling_delay_bound,
    rel_entropy_term,
)
from azuma_lab.errors import BoundDomainError

mpmath.mp.dps = 50


def rel_close(x, y, tol=1e-12):
    return abs(x - y) <= tol * max(abs(x), abs(y), 1e-300)


# -- values checked against mpmath ----------------------------------------------


def test_mult_upper_example():
    b = mult_azuma_upper(BoundQuery(10, 2, 1))
    assert rel_close(b.value, float(mpmath.exp(mpmath.mpf(-10) / 6)))
    assert b.value == pytest.approx(0.1888756, abs=1e-7)


def test_mult_upper_delta_two_gives_exp_minus_M_over_P():
    b = mult_azuma_upper(BoundQuery(1024, 16, 2))
    assert b.log_value == pytest.approx(-64, rel=1e-15)


def test_zero_budget_and_zero_delta_are_trivial():
    assert mult_azuma_upper(BoundQuery(0, 1, 3)).value == 1.0
    assert mult_azuma_upper_sharp(BoundQuery(5, 1, 0)).value == 1.0
    assert mult_azuma_lower(BoundQuery(7, 3, 0)).value == 1.0
    assert mult_azuma_lower_sharp(BoundQuery(4, 2, 0)).value == 1.0
    assert mult_azuma_upper(BoundQuery(7, 3, 0)).log_value == 0.0


def test_sharp_upper_example():
    b = mult_azuma_upper_sharp(BoundQuery(1, 1, 1))
    assert rel_close(b.value, float(mpmath.e / 4))


@pytest.mark.parametrize("mu,c,delta,expected", [(8, 2, 0.5, -0.5), (1, 1, 0.5, -0.125)])
def test_lower_examples(mu, c, delta, expected):
    assert rel_close(mult_azuma_lower(BoundQuery(mu, c, delta)).log_value, expected)


def test_lower_sharp_example():
    b = mult_azuma_lower_sharp(BoundQuery(1, 1, 0.5))
    exact = mpmath.exp(-0.5) / mpmath.sqrt(0.5)
    assert rel_close(b.value, float(exact))


def test_lower_needs_delta_below_one():
    for fn in (mult_azuma_lower, mult_azuma_lower_sharp):
        with pytest.raises(BoundDomainError):
            fn(BoundQuery(1, 1, 1.0))


@pytest.mark.parametrize("mu,c,delta", [(-1, 1, 1), (1, 0, 1), (1, -2, 1), (1, 1, -0.1),
                                        (math.nan, 1, 1), (1, 1, math.inf)])
def test_query_domain(mu, c, delta):
    with pytest.raises(BoundDomainError):
        BoundQuery(mu, c, delta)


def test_additive_azuma_examples():
    assert rel_close(additive_azuma(AdditiveQuery(2, [1, 1, 1, 1])).log_value, -0.5)
    b = additive_azuma(AdditiveQuery(1, [16] * 4))
    assert rel_close(b.log_value, -1 / 2048)
    assert additive_azuma(AdditiveQuery(1e-200, [1.0])).value == 1.0
    with pytest.raises(BoundDomainError):
        AdditiveQuery(1, [])
    with pytest.raises(BoundDomainError):
        AdditiveQuery(0, [1])


def test_chernoff_variants():
    assert rel_close(chernoff(ChernoffQuery(100, eps=10), "additive").value, math.exp(-2))
    for mu in (0.5, 3, 1024):
        assert rel_close(chernoff(ChernoffQuery(1, mu=mu, delta=2), "mult_upper").log_value,
                         mult_azuma_upper(BoundQuery(mu, 1, 2)).log_value)
    assert chernoff(ChernoffQuery(10, mu=0, delta=0.5), "mult_lower").value == 1.0
    with pytest.raises(BoundDomainError):
        chernoff(ChernoffQuery(10, eps=0), "additive")
    with pytest.raises(BoundDomainError):
        chernoff(ChernoffQuery(10, mu=1, delta=1), "mult_lower")
    with pytest.raises(BoundDomainError):
        ChernoffQuery(0)


def test_mgf_bound_examples():
    assert mgf_bound(1, 0, 1) == 1.0
    exact = mpmath.exp((mpmath.e ** 2 - 1) / 2 - 1)
    assert rel_close(mgf_bound(1, 1, 1), float(exact))
    assert mgf_bound(0.0, 1, 2) == 1.0
    assert mgf_bound(500, 1, 1) == math.inf
    with pytest.raises(BoundDomainError):
        log_mgf_bound(1, 0, 0)
    with pytest.raises(BoundDomainError):
        log_mgf_bound(1, -1, 2)


def test_recycling_bound_cases():
    r = recycling_delay_bound(16, 1024, 0.01)
    assert r.case == "large_M"
    assert rel_close(r.threshold, float(3072 + 32 * mpmath.log(100)))
    assert r.threshold == pytest.approx(3219.36, abs=0.01)
    s = recycling_delay_bound(1024, 10, 0.01)
    assert s.case == "small_M"
    assert rel_close(s.threshold, float(30 + 2048 * mpmath.log(100)))
    for eps in (0.0, 1.0, 1.5):
        with pytest.raises(BoundDomainError):
            recycling_delay_bound(2, 2, eps)


def test_recycling_tie_goes_to_large_M():
    # M = P ln(1/eps) exactly when eps = e^{-M/P}
    P, M = 4, 8
    assert recycling_delay_bound(P, M, math.exp(-2)).case == "large_M"


def test_compare_examples():
    good, bad = compare_recycling_bounds(16, 1024, 2)
    assert good.log_value == pytest.approx(-64, rel=1e-15)
    assert bad.log_value == pytest.approx(-8, rel=1e-15)
    good, bad = compare_recycling_bounds(16, 1024, 16)
    assert rel_close(good.log_value, -(16 ** 2) * 1024 / (18 * 16))
    assert rel_close(bad.log_value, -(16 ** 2) * 1024 / 512)
    good, bad = compare_recycling_bounds(16, 1024, 1e-12)
    assert good.value == pytest.approx(1.0) and bad.value == pytest.approx(1.0)


def test_tiny_values_keep_log():
    b = mult_azuma_upper(BoundQuery(1e12, 1, 1))
    assert b.value == 0.0
    assert rel_close(b.log_value, -1e12 / 3)


def test_tail_bound_clamps():
    assert TailBound.from_log(3.0).value == 1.0
    assert TailBound.from_log(-0.0).log_value == 0.0
    assert math.copysign(1, TailBound.from_log(-0.0).log_value) == 1


def test_inequality_examples():
    (p,) = check_log_inequalities([0.0], "upper")
    assert p.slack == 0
    (p,) = check_log_inequalities([1.0], "upper")
    assert rel_close(p.lhs, 1 - 2 * math.log(2)) and p.rhs == pytest.approx(-1 / 3)
    (p,) = check_log_inequalities([0.5], "lower")
    assert p.lhs == pytest.approx(-0.1534, abs=1e-4) and p.rhs == -0.125 and p.holds
    with pytest.raises(BoundDomainError):
        check_log_inequalities([1.0], "lower")


def test_rel_entropy_term_series_matches_mpmath():
    for x in (-0.9, -0.099, -1e-5, 0.0, 1e-9, 0.05, 0.0999, 0.1, 3.0):
        xm = mpmath.mpf(x)
        exact = (1 + xm) * mpmath.log1p(xm) - xm
        assert rel_close(rel_entropy_term(x), float(exact), 1e-13), x
    assert rel_entropy_term(-1.0) == 1.0


# -- properties -----------------------------------------------------------------

mus = st.floats(0, 1e6)
cs = st.floats(1e-3, 1e3)
upper_deltas = st.floats(0, 100)
lower_deltas = st.floats(0, 0.999)


@settings(max_examples=300)
@given(mus, mus, cs, upper_deltas)
def test_upper_monotone_in_mu(m1, m2, c, d):
    lo, hi = sorted((m1, m2))
    for fn in (mult_azuma_upper, mult_azuma_upper_sharp):
        assert fn(BoundQuery(hi, c, d)).value <= fn(BoundQuery(lo, c, d)).value


@settings(max_examples=300)
@given(mus, cs, cs, lower_deltas)
def test_lower_monotone_in_c(mu, c1, c2, d):
    lo, hi = sorted((c1, c2))
    for fn in (mult_azuma_lower, mult_azuma_lower_sharp):
        assert fn(BoundQuery(mu, lo, d)).value <= fn(BoundQuery(mu, hi, d)).value


@settings(max_examples=300)
@given(mus, cs, upper_deltas, upper_deltas)
def test_upper_monotone_in_delta(mu, c, d1, d2):
    lo, hi = sorted((d1, d2))
    for fn in (mult_azuma_upper, mult_azuma_upper_sharp):
        assert fn(BoundQuery(mu, c, hi)).value <= fn(BoundQuery(mu, c, lo)).value


@settings(max_examples=500)
@given(mus, cs, upper_deltas)
def test_sharp_upper_dominates(mu, c, d):
    q = BoundQuery(mu, c, d)
    assert mult_azuma_upper_sharp(q).log_value <= mult_azuma_upper(q).log_value + 1e-12 * (1 + mu / c)


@settings(max_examples=500)
@given(mus, cs, lower_deltas)
def test_sharp_lower_dominates(mu, c, d):
    q = BoundQuery(mu, c, d)
    assert mult_azuma_lower_sharp(q).log_value <= mult_azuma_lower(q).log_value + 1e-12 * (1 + mu / c)


@settings(max_examples=300)
@given(st.floats(0, 1e12), cs, upper_deltas)
def test_values_in_unit_interval(mu, c, d):
    for fn in (mult_azuma_upper, mult_azuma_upper_sharp):
        b = fn(BoundQuery(mu, c, d))
        assert 0.0 <= b.value <= 1.0 and b.log_value <= 0.0
        assert math.isfinite(b.log_value)


def test_domination_strict_away_from_zero():
    for d in (0.01, 0.5, 1, 5, 50):
        q = BoundQuery(10, 1, d)
        assert mult_azuma_upper_sharp(q).value < mult_azuma_upper(q).value
    for d in (0.01, 0.5, 0.9):
        q = BoundQuery(10, 1, d)
        assert mult_azuma_lower_sharp(q).value < mult_azuma_lower(q).value
