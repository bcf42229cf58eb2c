import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclame.diagnostics import (
    RegularityConfig,
    commutator_breakdown,
    commutator_d2,
    commutator_decay_experiment,
    hessian_gammas,
    hessian_identity_residual,
    korn_bounds,
    korn_ratio,
    lame_local_operator,
    lattice_korn_bounds,
    local_limit_experiment,
    multiplier_bound_check,
    regularity_experiment,
    smooth_load,
    sobolev_lp_norm,
    windowed_wave,
)
from fraclame.grid import GridSpec, plane_wave, random_band_limited, random_compact
from fraclame.nonlocal_form import Coefficient

from oracles import dense_d2_1d, dense_d2_2d


def test_breakdown_parts_add_up():
    g = GridSpec(2, 16)
    rng = np.random.default_rng(0)
    u, phi = random_compact(g, rng, 3), random_compact(g, rng, 3)
    A = Coefficient.separable(1 + 0.2 * np.cos(2 * np.pi * g.coords[1]))
    br = commutator_breakdown(A, u, phi, 0.4, 0.6)
    assert br.total == br.d1 + br.d2
    assert br.normalized()[0] == pytest.approx(br.total / br.norm)


def test_split_validation():
    g = GridSpec(1, 16)
    u = random_compact(g, np.random.default_rng(0), 3)
    with pytest.raises(ValueError):
        commutator_d2(1.0, u, u, 1.5, 0.8)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), s1=st.floats(0.2, 0.8))
def test_d2_matches_dense_oracle_1d(seed, s1):
    g = GridSpec(1, 32)
    rng = np.random.default_rng(seed)
    u, phi = random_compact(g, rng), random_compact(g, rng)
    a = 1 + 0.4 * np.sin(2 * np.pi * g.coords[0] + seed)
    ref = dense_d2_1d(a, u.values[0], phi.values[0], s1, 1.0 - s1, 1.0)
    assert abs(commutator_d2(a, u, phi, s1, 1.0 - s1) - ref) <= 1e-10


def test_d2_matches_dense_oracle_2d():
    g = GridSpec(2, 16)
    rng = np.random.default_rng(7)
    u, phi = random_compact(g, rng, 3), random_compact(g, rng, 3)
    x = g.coords
    a = 1 + 0.3 * np.sin(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1])
    ref = dense_d2_2d(a, u.values, phi.values, 0.7, 0.3, 1.0)
    assert abs(ref) > 1e-4
    assert commutator_d2(a, u, phi, 0.7, 0.3) == pytest.approx(ref, rel=1e-10)


def test_decay_table_structure():
    g = GridSpec(1, 128)
    fn = lambda x, y: 2 + 0.5 * np.sin(2 * np.pi * x[..., 0]) * np.sin(2 * np.pi * y[..., 0])
    table = commutator_decay_experiment(lambda gg: Coefficient.from_function(gg, fn), 0.5, 0.5, 0.5, [2, 4], g)
    assert [r["k"] for r in table.rows] == [2, 4]
    assert all(r["d2"] == 0 for r in table.rows)  # ell2 = 0 in 1D
    with pytest.raises(ValueError):
        commutator_decay_experiment(Coefficient.constant(1.0), 0.5, 0.5, 0.5, [4, 2], g)


@pytest.mark.parametrize("dim,s", [(1, 0.25), (1, 0.5), (1, 0.75), (2, 0.25), (2, 0.5), (2, 0.75)])
def test_hessian_identity(dim, s):
    assert hessian_identity_residual(dim, s) <= 1e-6


def test_hessian_gammas_instance():
    assert hessian_gammas(2, 0.5) == (3.0, 1.0)
    assert hessian_gammas(1, 0.5) == (0.0, 0.0)


def test_hessian_rejects_origin():
    with pytest.raises(ValueError):
        hessian_identity_residual(2, 0.5, sample_points=[[0.01, 0.0]])


def test_korn_1d_is_exactly_one():
    g = GridSpec(1, 64)
    u = random_band_limited(g, np.random.default_rng(1))
    assert korn_ratio(u, 0.4) == pytest.approx(1.0, abs=1e-12)


def test_korn_bounds_ordering():
    lo, hi = korn_bounds(2, 0.5)
    assert lo == pytest.approx(1 / 3) and hi == pytest.approx(2 / 3)
    llo, lhi = lattice_korn_bounds(GridSpec(2, 32), 0.5)
    assert llo < lo < hi < lhi


def test_korn_extremes_are_plane_waves():
    g = GridSpec(2, 32)
    llo, lhi = lattice_korn_bounds(g, 0.5)
    lon = korn_ratio(plane_wave(g, [1, 0], [1.0, 0.0]), 0.5)
    tra = korn_ratio(plane_wave(g, [1, 0], [0.0, 1.0]), 0.5)
    assert tra < 0.5 < lon
    assert llo - 1e-12 <= tra and lon <= lhi + 1e-12


def test_korn_rejects_zero_field():
    g = GridSpec(1, 16)
    with pytest.raises(ValueError):
        korn_ratio(random_compact(g, np.random.default_rng(0)) * 0.0, 0.5)


def test_local_operator_on_plane_wave():
    g = GridSpec(1, 64)
    u = plane_wave(g, [2], [1.0])
    out = lame_local_operator(np.ones(g.shape), u)
    assert np.abs(out.values + 3 * (4 * np.pi) ** 2 * u.values).max() < 1e-9


def test_local_limit_residual_shrinks():
    g = GridSpec(1, 256)
    u = windowed_wave(g, [2])
    a = 1 + 0.25 * np.sin(2 * np.pi * g.coords[0])
    rows = local_limit_experiment(a, [0.6, 0.95], u)
    assert rows[1]["residual"] < rows[0]["residual"]


def test_multiplier_bound():
    out = multiplier_bound_check(0.5, 2, trial_count=5, grid=GridSpec(2, 32))
    assert out["max"] <= out["bound"] + 1e-12
    zero = multiplier_bound_check(0.0, 4, trial_count=3, grid=GridSpec(2, 32))
    assert zero["max"] == pytest.approx(1.0) and zero["min"] == pytest.approx(1.0)
    tr = multiplier_bound_check(0.7, 2, trial_count=3, grid=GridSpec(2, 32), transverse=True)
    assert tr["max"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        multiplier_bound_check(0.5, 3)


def test_sobolev_norm_checks_inputs():
    g = GridSpec(1, 32)
    u = random_compact(g, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sobolev_lp_norm(u, 0.5, 0.5)
    with pytest.raises(ValueError):
        sobolev_lp_norm(u, 0.5, 2, np.zeros(g.shape, bool))


def test_regularity_rejects_bad_t():
    with pytest.raises(ValueError):
        regularity_experiment(RegularityConfig(s=0.5, t=1.0))


def test_regularity_zero_data():
    rep = regularity_experiment(RegularityConfig(grids=(64, 128)))
    assert rep.ratios == [0.0, 0.0] and rep.variation == 0.0


def test_smooth_load_resolution_independent():
    a = smooth_load(GridSpec(1, 64), 0.02, 0.06, radius=0.19)
    b = smooth_load(GridSpec(1, 128), 0.02, 0.06, radius=0.19)
    assert np.allclose(a.values[0], b.values[0][::2])
