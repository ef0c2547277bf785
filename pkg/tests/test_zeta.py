import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specgap import (
    ClosedFormTheta,
    ConfigError,
    DomainError,
    HeatExpansion,
    ThetaFunction,
    beta_torsion,
    build_torus_complex,
    determinant,
    laplacian_families,
    ns_zeta,
    sample_spectrum,
    zeta_large,
    zeta_small,
)


def closed(terms):
    return ThetaFunction.from_closed_form(ClosedFormTheta(terms))


def gamma_oracle(form: ClosedFormTheta, lam0: float) -> float:
    """-zeta'(0) from the Mellin transform of each term alpha t^-p exp(-c t)."""
    total = 0.0
    for alpha, p, rate in form.terms:
        c = rate - lam0
        if c <= 1e-12:
            continue
        total += alpha * math.log(c) if p == 0 else -alpha * math.gamma(-p) * c**p
    return total


atomic_spectra = st.lists(
    st.tuples(st.floats(0.1, 5.0), st.integers(0, 20000).map(lambda i: i / 1000)), min_size=2, max_size=8,
    unique_by=lambda x: x[1],
).filter(lambda v: sum(a > 0 for _, a in v) >= 2)


@given(atomic_spectra)
def test_atomic_determinant_is_finite_formula(atoms):
    th = closed([(m, 0.0, a) for m, a in atoms])
    # an atom at 0 is the kernel and is removed before the gap is read off
    lam0 = min(a for _, a in atoms if a > 0)
    rest = [(m, a) for m, a in atoms if a > lam0]
    r = determinant(th)
    assert r.log_determinant == pytest.approx(sum(m * math.log(a - lam0) for m, a in rest), abs=1e-8)
    assert r.zeta_at_0 == pytest.approx(sum(m for m, _ in rest), abs=1e-8)


@given(st.lists(st.tuples(st.floats(0.1, 5.0), st.sampled_from([0.5, 1.5, 2.5]), st.floats(0.0, 5.0)),
                min_size=1, max_size=5))
def test_closed_form_determinant_matches_gamma_oracle(terms):
    form = ClosedFormTheta(terms).without_constant()
    if not form:
        return
    th = ThetaFunction.from_closed_form(form)
    assert determinant(th).log_determinant == pytest.approx(gamma_oracle(form, th.lambda0), rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("p", [0.0, 0.5, 1.5, 3.0])
def test_pure_powers_contribute_nothing(p):
    r = determinant(closed([(2.5, p, 1.0)]))
    assert abs(r.log_determinant) < 1e-10
    assert abs(r.zeta_at_0) < 1e-10


@given(st.floats(1.2, 4.0), st.floats(0.1, 3.0))
def test_zeta_pieces_sum_to_dirichlet_series(s, gap):
    th = closed([(1.0, 0.0, 1.0), (2.0, 0.0, 1.0 + gap), (0.5, 1.0, 1.0 + 2 * gap)])
    exp = HeatExpansion.for_theta(th)
    total = zeta_small(th, exp, s) + zeta_large(th, s)
    ref = 2.0 * gap**-s + 0.5 * (2 * gap) ** (1 - s) / (s - 1)
    assert total.real == pytest.approx(ref, rel=1e-9)
    assert abs(total.imag) < 1e-12


def test_heat_expansion_of_closed_form():
    th = closed([(1.0, 1.5, 0.0), (2.0, 0.5, 1.0)])
    exp = HeatExpansion.for_theta(th)
    assert exp.n == 3
    np.testing.assert_allclose(exp.coeffs[:3], [1.0, 2.0, -2.0])


@pytest.fixture(scope="module")
def shifted_circle():
    s = sample_spectrum(laplacian_families(build_torus_complex(1, 8), 1.0), 8)
    return s, ThetaFunction.from_sample(s, 0)


def test_sample_determinant_is_weighted_log_sum(shifted_circle):
    s, th = shifted_circle
    ev = s.eigenvalues[0]
    above = ev > th.lambda0 * (1 + 1e-12)
    logs = np.log(np.where(above, ev - th.lambda0, 1.0))
    ref = s.weights @ logs.sum(axis=1)
    r = determinant(th)
    assert r.log_determinant == pytest.approx(ref, rel=1e-9)
    assert r.zeta_at_0 == pytest.approx(s.weights @ above.sum(axis=1), rel=1e-9)


def test_ns_zeta_without_gap_shift(shifted_circle):
    s, th = shifted_circle
    ref = s.weights @ (s.eigenvalues[0] ** -2.0).sum(axis=1)
    total = ns_zeta(th, 10.0, 2.0, "small") + ns_zeta(th, 10.0, 2.0, "large")
    assert total.real == pytest.approx(ref, rel=1e-8)
    with pytest.raises(DomainError):
        ns_zeta(th, 0.5, 2.0, "large")
    with pytest.raises(ConfigError):
        ns_zeta(th, 0.5, 2.0, "middle")


def test_difference_check_agrees():
    th = closed([(1.0, 1.5, 1.0), (2.0, 0.5, 1.0), (1.0, 0.5, 3.0), (0.5, 1.5, 2.0)])
    r = determinant(th, check=True)
    assert r.notes["difference_check"]["zeta_prime_at_0"] == pytest.approx(-r.log_determinant, rel=1e-5)


def test_zeta_large_outside_strip():
    th = ThetaFunction.from_callable(lambda t: (1 + t) ** -1.0, lambda0=0.0)
    with pytest.raises(DomainError):
        zeta_large(th, 2.0, beta=1.0)


def test_beta_torsion_alternating_weights():
    reports = [determinant(closed([(1.0, 0.0, 1.0), (1.0, 0.0, x)])) for x in (2.0, 3.0, 5.0)]
    # 0 * log 1 - 1 * log 2 + 2 * log 4
    assert beta_torsion(reports) == pytest.approx(-math.log(2) + 2 * math.log(4))
    assert beta_torsion(dict(enumerate(reports))) == beta_torsion(reports)
    with pytest.raises(ConfigError):
        beta_torsion({0: reports[0], 2: reports[2]})


def test_callable_with_supplied_expansion():
    from specgap import HyperbolicModel, theta_hyperbolic

    th = ThetaFunction.from_closed_form(theta_hyperbolic(HyperbolicModel(5), 1), 1)
    cb = ThetaFunction.from_callable(lambda t: th.shifted(t), degree=1, lambda0=th.lambda0, shifted=True)
    r = determinant(cb, expansion=HeatExpansion.for_theta(th))
    assert r.log_determinant == pytest.approx(8 * math.sqrt(3) * math.pi / 5, rel=1e-9)
    with pytest.raises(ConfigError):
        determinant(cb)


def test_mismatched_expansion_is_diagnosed():
    from specgap import NumericalError

    th = closed([(1.0, 1.5, 0.0), (1.0, 0.5, 2.0)])
    wrong = HeatExpansion(n=3, coeffs=(2.0, 0.0, 0.0, 0.0), lambda0=0.0)
    with pytest.raises(NumericalError):
        determinant(th, expansion=wrong)
