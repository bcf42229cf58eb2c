import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclame.grid import GridSpec, VectorField, plane_wave, random_band_limited
from fraclame.spectral import (
    derive_ell_constants,
    forward_transform,
    frac_laplacian,
    inverse_transform,
    lame_multiplier_apply,
    lame_multiplier_solve,
    lame_symbol,
    remove_dropped_modes,
    riesz_matrix_apply,
    riesz_potential,
    riesz_transform,
    spectral_refine,
)

from oracles import closed_form_ell_1d, symbol_constants


def rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def test_plane_wave_eigenfunction():
    g = GridSpec(1, 64, 2.0)
    u = plane_wave(g, [3], [1.0])
    lam = (2 * np.pi * 3 / 2.0) ** 0.7
    assert rel(frac_laplacian(u, 0.7).values, lam * u.values) < 1e-12


def test_plancherel():
    g = GridSpec(2, 32)
    u = random_band_limited(g, np.random.default_rng(0))
    assert forward_transform(u).l2_norm() == pytest.approx(u.norm(), rel=1e-12)
    assert forward_transform(u).is_hermitian()


def test_riesz_potential_drops_mean():
    g = GridSpec(1, 32)
    u = VectorField(g, np.ones((1, 32)))
    out = riesz_potential(u, 0.5)
    assert out.dropped_mode
    assert np.allclose(out.values, 0)


@pytest.mark.parametrize("t", [0.0, 2.0, -0.5])
def test_order_range(t):
    g = GridSpec(1, 16)
    with pytest.raises(ValueError):
        frac_laplacian(VectorField.zeros(g), t)


def test_riesz_matrix_on_longitudinal_and_transverse_waves():
    g = GridSpec(2, 32)
    lon = plane_wave(g, [2, 1], [2.0, 1.0])
    tra = plane_wave(g, [2, 1], [-1.0, 2.0])
    assert rel(riesz_matrix_apply(lon).values, -lon.values) < 1e-12
    assert np.abs(riesz_matrix_apply(tra).values).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(t1=st.floats(0.05, 0.9), t2=st.floats(0.05, 0.9), seed=st.integers(0, 10_000))
def test_semigroup_property(t1, t2, seed):
    g = GridSpec(2, 16)
    u = random_band_limited(g, np.random.default_rng(seed))
    lhs = frac_laplacian(frac_laplacian(u, t1), t2).values
    assert rel(lhs, frac_laplacian(u, t1 + t2).values) < 1e-12
    back = frac_laplacian(riesz_potential(u, t1), t1)
    assert rel(back.values, u.values) < 1e-12


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-5, 5).filter(lambda c: abs(c - 1) > 0.05), seed=st.integers(0, 10_000))
def test_lame_inverse_round_trip(c, seed):
    g = GridSpec(2, 16)
    u = remove_dropped_modes(random_band_limited(g, np.random.default_rng(seed)))
    assert rel(lame_multiplier_solve(lame_multiplier_apply(u, c), c).values, u.values) < 1e-11


def test_lame_symbol_inverse_matches_closed_form():
    xi = np.array([[1.0, 2.0], [-3.0, 0.5]])
    for c in (-3, -0.5, 0.5, 2):
        M = lame_symbol(xi, c)
        for k in range(2):
            hat = xi[k] / np.linalg.norm(xi[k])
            inv = np.eye(2) + c / (1 - c) * np.outer(hat, hat)
            assert np.allclose(M[k] @ inv, np.eye(2), atol=1e-13)


def test_lame_rejects_singular_c():
    with pytest.raises(ValueError):
        lame_multiplier_apply(VectorField.zeros(GridSpec(1, 16)), 1.0)


def test_riesz_squares_sum_to_minus_identity():
    g = GridSpec(2, 32)
    u = remove_dropped_modes(random_band_limited(g, np.random.default_rng(5)))
    total = riesz_transform(riesz_transform(u, 0), 0) + riesz_transform(riesz_transform(u, 1), 1)
    assert rel(total.values, -u.values) < 1e-12


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_ell_constants_match_independent_quadrature(s):
    c1 = derive_ell_constants(1, s)
    assert c1.ell1 == pytest.approx(closed_form_ell_1d(s), rel=1e-10)
    assert c1.ell2 == 0
    ref = symbol_constants(2, s)
    c2 = derive_ell_constants(2, s)
    assert c2.ell1 == pytest.approx(ref[0], rel=1e-9)
    assert c2.ell2 == pytest.approx(ref[1], rel=1e-9)
    assert c2.c == pytest.approx(-ref[1] / ref[0], rel=1e-9)


def test_ell_constants_at_one_half():
    c = derive_ell_constants(2, 0.5)
    assert c.ell1 == pytest.approx(2 * np.pi / 3, rel=1e-10)
    assert c.ell2 == pytest.approx(2 * np.pi / 3, rel=1e-10)


def test_spectral_refine_interpolates_band_limited_fields():
    g = GridSpec(1, 32)
    u = plane_wave(g, [3], [1.0], phase=0.4)
    fine = spectral_refine(u)
    assert rel(fine.values, plane_wave(g.refine(2), [3], [1.0], phase=0.4).values) < 1e-12


def test_inverse_transform_round_trip_complex_check():
    g = GridSpec(1, 64)
    u = random_band_limited(g, np.random.default_rng(2), mean_zero=False)
    assert rel(inverse_transform(forward_transform(u)).values, u.values) < 1e-13
