import math

import numpy as np
import pytest

from specgap import (
    ConfigError,
    DomainError,
    ConvergenceReport,
    build_torus_complex,
    density_sandwich,
    fit_dilation,
    gap_convergence,
    refinement_levels,
    run_preset,
    theta_convergence,
    torus_counting_reference,
    torus_preset,
    torus_theta_reference,
    zeta_convergence,
)
from specgap.lab import EXPERIMENT_PRESETS, TORUS_PRESETS


def test_presets_build():
    for name, p in TORUS_PRESETS.items():
        c = torus_preset(name)
        assert c.rank == p["g"]
        assert c.n_per_axis == p["n_per_axis"]
    with pytest.raises(ConfigError):
        torus_preset("klein-bottle")


def test_continuum_references():
    ref = torus_theta_reference(1, 0)
    assert ref(0.5) == pytest.approx((4 * math.pi * 0.5) ** -0.5)
    # degree-1 forms on T^2: two components
    assert torus_theta_reference(2, 1)(2.0) == pytest.approx(2 / (8 * math.pi))
    # Weyl law on the unit circle: #{|xi| <= sqrt(lam)} / (2 pi)
    assert torus_counting_reference(1, 0)(4.0) == pytest.approx(2 / math.pi)


def test_refinement_levels():
    base = build_torus_complex(1, 4)
    levels = refinement_levels(base, 3)
    assert [c.n_per_axis for c in levels] == [4, 8, 16]
    assert refinement_levels(base, levels) == levels
    with pytest.raises(ConfigError):
        refinement_levels(base, 0)
    with pytest.raises(ConfigError):
        refinement_levels(base, [base])


def test_theta_convergence_second_order_on_circle():
    r = theta_convergence(build_torus_complex(1, 8), 3)
    assert r.flags["errors_strictly_decreasing"]
    orders = [row.order for row in r.rows][1:]
    assert all(1.8 < o < 2.2 for o in orders)
    assert len(r.metric("theta_sup_error")) == 3
    assert np.all(r.errors("theta_sup_error") > 0)


def test_gap_convergence_with_mass_shift():
    r = gap_convergence(build_torus_complex(1, 8), 3, mass_shift=1.0)
    lam = r.values("lambda0")
    assert np.all(lam > 1.0)
    assert r.flags["monotone_approach"]
    assert r.meta["ratios"] == pytest.approx(list(lam))
    with pytest.raises(ConfigError):
        gap_convergence(build_torus_complex(1, 8), 3, mass_shift=-1.0)


def test_density_sandwich_dilation():
    r = density_sandwich(build_torus_complex(1, 8), 3, np.geomspace(0.5, 50, 10))
    assert isinstance(r, ConvergenceReport)
    assert r.rows


def test_fit_dilation():
    assert fit_dilation(lambda x: x, lambda x: x, [1.0, 2.0]) == 1.0
    assert fit_dilation(lambda x: 2 * x, lambda x: x, [1.0, 2.0]) == pytest.approx(2.0, rel=1e-6)


def test_zeta_convergence_and_domain_gates():
    r = zeta_convergence(build_torus_complex(1, 8), 3, [2.0])
    assert r.flags["errors_decreasing"]
    with pytest.raises(DomainError):
        zeta_convergence(build_torus_complex(1, 8), 3, [0.25], piece="small")
    with pytest.raises(DomainError):
        zeta_convergence(build_torus_complex(1, 8), 3, [1.0], piece="large")
    with pytest.raises(ConfigError):
        zeta_convergence(build_torus_complex(1, 8), 3, [])


@pytest.mark.parametrize("name", ["circle-theta", "circle-gap", "circle-zeta", "circle-density"])
def test_fast_presets_run(name):
    r = run_preset(name, levels=3)
    assert r.rows
    assert all(math.isfinite(row.mesh) for row in r.rows)


@pytest.mark.slow
def test_square_theta_preset():
    r = run_preset("square-theta")
    assert r.flags["errors_strictly_decreasing"]


def test_run_preset_validation():
    with pytest.raises(ConfigError):
        run_preset("circle-theta", levels=2)
    with pytest.raises(ConfigError):
        run_preset("nope")
    assert set(EXPERIMENT_PRESETS) >= {"circle-theta", "square-theta", "circle-gap"}


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(EXPERIMENT_PRESETS))
def test_finest_level_error_is_minimal(name):
    r = run_preset(name)
    for metric in {row.metric_name for row in r.rows}:
        errs = r.errors(metric)
        finite = errs[np.isfinite(errs)]
        if finite.size:
            assert finite[-1] <= finite.min()
