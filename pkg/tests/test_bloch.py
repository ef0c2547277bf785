import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given
from hypothesis import strategies as st

from specgap import (
    ConfigError,
    build_torus_complex,
    character_grid,
    laplacian_families,
    sample_spectrum,
    spectral_density,
    spectrum_summary,
    vn_heat_trace,
)

HEX = [[1.0, 0.0], [0.5, math.sqrt(3) / 2]]


def p1_circle_band(n, k):
    h = 1.0 / n
    th = (k + 2 * np.pi * np.arange(n)) / n
    return np.sort(6 / h**2 * (1 - np.cos(th)) / (2 + np.cos(th)))


@given(k=st.floats(-math.pi, math.pi))
def test_circle_spectrum_matches_p1_dispersion(k):
    n = 8
    fams = laplacian_families(build_torus_complex(1, n))
    ref = p1_circle_band(n, k)
    for j in (0, 1):
        A, M = fams[j](np.array([k]))
        ev = np.sort(sl.eigh(A, M, eigvals_only=True))
        np.testing.assert_allclose(ev, ref, rtol=1e-10, atol=1e-9)


@given(k=st.lists(st.floats(-math.pi, math.pi), min_size=2, max_size=2))
def test_operators_hermitian_and_nonnegative(k):
    fams = laplacian_families(build_torus_complex(2, 2, HEX))
    for fam in fams:
        A, M = fam(np.array(k))
        np.testing.assert_allclose(A, A.conj().T, atol=1e-10)
        assert sl.eigh(A, M, eigvals_only=True).min() > -1e-9


def test_character_grid_is_shifted_midpoint():
    nodes, weights = character_grid(1, 4)
    np.testing.assert_allclose(nodes[:, 0], 2 * np.pi * (np.arange(4) + 0.5) / 4)
    assert weights.sum() == pytest.approx(1.0)
    nodes, weights = character_grid(2, 3)
    assert nodes.shape == (9, 2)
    assert weights.sum() == pytest.approx(1.0)


def test_trace_at_small_time_counts_cells():
    c = build_torus_complex(2, 2)
    s = sample_spectrum(laplacian_families(c), 4)
    for j in range(3):
        assert vn_heat_trace(s, j, 1e-12) == pytest.approx(c.n_cells(j), rel=1e-8)


@pytest.mark.parametrize("g, n, basis, res", [(1, 8, None, 16), (2, 2, HEX, 6), (3, 1, None, 3)])
def test_mckean_singer(g, n, basis, res):
    s = sample_spectrum(laplacian_families(build_torus_complex(g, n, basis)), res)
    for t in (0.01, 0.3, 3.0):
        total = sum((-1) ** j * vn_heat_trace(s, j, t) for j in range(g + 1))
        assert abs(total) < 1e-9


def test_mass_shift_translates_spectrum():
    c = build_torus_complex(1, 6)
    a = sample_spectrum(laplacian_families(c), 8)
    b = sample_spectrum(laplacian_families(c, 2.5), 8)
    for j in (0, 1):
        np.testing.assert_allclose(b.eigenvalues[j], a.eigenvalues[j] + 2.5, rtol=1e-10)


def test_spectrum_summary_of_shifted_circle():
    s = sample_spectrum(laplacian_families(build_torus_complex(1, 8), 1.0), 32)
    summary = spectrum_summary(s)
    assert summary.kernel_dim == {0: 0.0, 1: 0.0}
    # bottom of the lowest band at the first grid node
    expected = p1_circle_band(8, np.pi / 32)[0] + 1.0
    assert summary.lambda0[0] == pytest.approx(expected, rel=1e-10)
    assert summary.kappa0[1] == math.inf


def test_spectral_density_is_monotone_and_bounded_by_cell_count():
    s = sample_spectrum(laplacian_families(build_torus_complex(1, 8)), 32)
    vals = [spectral_density(s, 0, lam) for lam in np.linspace(0, 800, 30)]
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[-1] == pytest.approx(8.0)


def test_verify_mode_and_bad_resolution():
    fams = laplacian_families(build_torus_complex(1, 4))
    s = sample_spectrum(fams, 4, verify=True)
    assert s.coexact[0] is not None
    with pytest.raises(ConfigError):
        sample_spectrum(fams, 0)
