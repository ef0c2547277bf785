import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from specgap import ClosedFormTheta, ConfigError

term = st.tuples(
    st.floats(0.1, 5.0),
    st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0]),
    st.sampled_from([0.0, 0.25, 1.0, 4.0]),
)
forms = st.lists(term, min_size=1, max_size=4).map(ClosedFormTheta)
times = st.floats(0.05, 20.0)


@given(forms, forms, times)
def test_sum_and_product_are_pointwise(a, b, t):
    assert (a + b)(t) == pytest.approx(a(t) + b(t), rel=1e-12)
    assert (a * b)(t) == pytest.approx(a(t) * b(t), rel=1e-12)
    assert (3.0 * a)(t) == pytest.approx(3.0 * a(t), rel=1e-12)


@given(forms)
def test_canonical_form(a):
    assert a + a == 2 * a
    assert ClosedFormTheta(reversed(a.terms)) == a
    rates = [(r, p) for _, p, r in a.terms]
    assert rates == sorted(rates)


def test_merging_and_zero_terms():
    f = ClosedFormTheta([(1.0, 0.5, 1.0), (2.0, 0.5, 1.0), (0.0, 1.0, 2.0)])
    assert f.terms == ((3.0, 0.5, 1.0),)
    assert not ClosedFormTheta([(1.0, 1.0, 1.0), (-1.0, 1.0, 1.0)])


def test_structure_queries():
    f = ClosedFormTheta([(2.0, 0.0, 0.0), (1.0, 1.5, 1.0), (4.0, 0.5, 3.0)])
    assert f.constant == 2.0
    assert f.min_rate == 0.0
    assert f.without_constant().min_rate == 1.0
    assert f.pure_powers(1.0).terms == ((1.0, 1.5, 1.0),)
    assert f.decaying(1.0).terms == ((2.0, 0.0, 0.0), (4.0, 0.5, 3.0))
    assert ClosedFormTheta().min_rate == math.inf


@given(forms, st.floats(0.1, 10.0))
def test_shifted_is_exp_times_theta(a, t):
    lam0 = a.min_rate
    assert a.shifted(t, lam0) == pytest.approx(math.exp(lam0 * t) * a(t), rel=1e-12)


@given(forms, st.floats(0.2, 5.0))
def test_theta_is_laplace_of_counting_function(a, t):
    # theta(t) = t * int_0^inf exp(-t lam) N(lam) d lam
    edges = sorted({0.0, *(r for _, _, r in a.terms)}) + [np.inf]
    total = sum(
        quad(lambda lam: math.exp(-t * lam) * a.counting(lam), lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    )
    assert a(t) == pytest.approx(t * total, rel=1e-7)


@given(st.floats(0.1, 3.0), st.sampled_from([0.5, 1.0, 1.5, 2.5]), st.floats(0.0, 2.0),
       st.floats(0.01, 3.0), st.floats(0.2, 4.0))
def test_truncated_density_term_matches_quadrature(alpha, p, rate, gap, t):
    f = ClosedFormTheta([(alpha, p, rate)])
    cut = rate + gap

    def dens(lam):
        return math.exp(-t * lam) * alpha * (lam - rate) ** (p - 1) / math.gamma(p)

    ref = quad(dens, cut, np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]
    assert f.truncated(cut, t) == pytest.approx(ref, rel=1e-8)


def test_truncated_atoms_use_open_interval():
    f = ClosedFormTheta([(1.0, 0.0, 1.0), (1.0, 0.0, 2.0)])
    t = 0.7
    assert f.truncated(1.0, t) == pytest.approx(math.exp(-2 * t))
    assert f.truncated(1.0, t, boundary_term=True) == pytest.approx(math.exp(-2 * t) + math.exp(-t))
    assert f.truncated(0.5, t) == pytest.approx(f(t))


half_integer_forms = st.lists(
    st.tuples(st.floats(0.1, 5.0), st.sampled_from([0.5, 1.5, 2.5]), st.sampled_from([0.0, 1.0, 4.0])),
    min_size=1, max_size=4,
).map(ClosedFormTheta)


@given(half_integer_forms, st.integers(1, 4))
def test_expansion_reproduces_small_time_behaviour(a, depth):
    lam0 = a.min_rate
    n, coeffs = a.expansion(lam0, depth)
    for t in (1e-2, 5e-3):
        approx = t ** (-n / 2) * np.polyval(coeffs[::-1], t)
        scale = t ** (-n / 2) * max(1.0, np.abs(coeffs).max()) * 10.0 ** (depth + 1)
        assert abs(a.shifted(t, lam0) - approx) <= scale * t ** (depth + 1)


def test_expansion_requires_integer_spaced_powers():
    with pytest.raises(ConfigError):
        ClosedFormTheta([(1.0, 0.5, 0.0), (1.0, 0.25, 1.0)]).expansion(0.0, 2)


@pytest.mark.parametrize("bad", [(1.0, -1.0, 0.0), (1.0, 1.0, -1.0), (math.inf, 1.0, 0.0)])
def test_invalid_terms(bad):
    with pytest.raises(ConfigError):
        ClosedFormTheta([bad])


def test_nonpositive_time_rejected():
    with pytest.raises(ConfigError):
        ClosedFormTheta([(1.0, 1.0, 0.0)])(0.0)
