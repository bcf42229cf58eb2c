import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclame.grid import GridSpec, VectorField, bump, plane_wave, random_band_limited, random_compact
from fraclame.params import FractionalParams, ParameterError


def test_grid_nodes_and_spacing():
    g = GridSpec(1, 8, 2.0)
    assert g.h == 0.25
    assert np.allclose(g.axis, (np.arange(8) - 4) * 0.25)
    lo, hi = g.box_bounds
    assert lo == pytest.approx(-1.125) and hi - lo == pytest.approx(2.0)


@pytest.mark.parametrize("kw", [dict(dim=3, points_per_dim=8), dict(dim=1, points_per_dim=7),
                                dict(dim=1, points_per_dim=8, box_length=-1.0),
                                dict(dim=2, points_per_dim=8, support_fraction=1.5)])
def test_grid_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_flat_round_trip_is_node_major():
    g = GridSpec(2, 8)
    u = random_band_limited(g, np.random.default_rng(0))
    flat = u.flat()
    assert flat[1] == u.values[1].reshape(-1)[0]
    assert np.array_equal(VectorField.from_flat(g, flat).values, u.values)


def test_field_rejects_nan_and_wrong_shape():
    g = GridSpec(1, 8)
    with pytest.raises(ValueError):
        VectorField(g, np.full((1, 8), np.nan))
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((2, 8)))


def test_random_compact_lives_in_support():
    g = GridSpec(2, 32)
    u = random_compact(g, np.random.default_rng(3))
    assert np.all(u.values[:, ~g.support_mask()] == 0)
    assert np.all(bump(g) <= 1)


def test_plane_wave_norm():
    g = GridSpec(1, 64)
    u = plane_wave(g, [3], [2.0])
    assert u.norm() == pytest.approx(np.sqrt(2.0), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(s=st.floats(0.01, 0.99), t=st.floats(0.0, 1.2))
def test_admissible_t_iff_constraint(s, t):
    ok = s <= t < min(2 * s, 1.0)
    if ok:
        assert FractionalParams(s, t).t == t
    else:
        with pytest.raises(ParameterError):
            FractionalParams(s, t)


def test_params_defaults_and_split():
    p = FractionalParams(0.5)
    assert (p.t, p.s1, p.s2) == (0.5, 0.5, 0.5)
    q = FractionalParams(0.5, s1=0.3)
    assert q.s2 == pytest.approx(0.7)
    with pytest.raises(ParameterError):
        FractionalParams(0.5, s1=0.3, s2=0.3)
    with pytest.raises(ParameterError):
        FractionalParams(0.5, epsilon=0.6)
    with pytest.raises(ParameterError):
        FractionalParams(0.5, sigma=0.8).check_sigma(0.5)
