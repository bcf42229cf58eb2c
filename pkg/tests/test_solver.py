import numpy as np
import pytest

from fraclame.diagnostics import smooth_load
from fraclame.grid import GridSpec, VectorField, random_band_limited
from fraclame.nonlocal_form import Coefficient, CoefficientError, assemble_stiffness
from fraclame.solver import (
    CONVERGED,
    INDEFINITE,
    MAX_ITER,
    DomainMask,
    conjugate_gradient,
    constant_lame_apply,
    dense_smallest_eigenvalue,
    lame_rhs,
    solve_constant_lame,
    solve_dirichlet,
    solve_full_perturbative,
    solve_weighted_lame,
)
from fraclame.spectral import remove_dropped_modes


def load(g, center=0.02):
    return smooth_load(g, center, 0.06, radius=0.19)


def test_cg_on_spd_matrix():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((30, 30))
    K = M @ M.T + 30 * np.eye(30)
    b = rng.standard_normal(30)
    x, res, en, status, its = conjugate_gradient(lambda v: K @ v, b, 1e-12)
    assert status == CONVERGED
    assert np.allclose(K @ x, b, atol=1e-9)
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(en, en[1:]))
    assert en[-1] == pytest.approx(0.5 * x @ K @ x - b @ x)


def test_cg_detects_negative_curvature():
    K = np.diag([1.0, -1.0, 2.0])
    _, _, _, status, _ = conjugate_gradient(lambda v: K @ v, np.ones(3), 1e-12)
    assert status == INDEFINITE


def test_cg_reports_max_iter():
    K = np.diag(np.linspace(1, 1e6, 50))
    _, _, _, status, its = conjugate_gradient(lambda v: K @ v, np.ones(50), 1e-14, max_iter=3)
    assert status == MAX_ITER and its == 3


def test_domain_mask_validation():
    g = GridSpec(1, 64)
    with pytest.raises(ValueError):
        DomainMask.ball(g, 0.4)  # leaves the support box
    with pytest.raises(ValueError):
        DomainMask.ball(g, 0.2, probe_radius=0.195)  # probe touches the boundary
    m = DomainMask.centered(g)
    u = random_band_limited(g, np.random.default_rng(0))
    assert np.array_equal(m.embed(m.extract(u)).values, m.restrict(u).values)


@pytest.mark.parametrize("dim,N", [(1, 64), (2, 16)])
def test_dirichlet_matches_dense_solve(dim, N):
    g = GridSpec(dim, N)
    m = DomainMask.centered(g)
    A = Coefficient.separable(1 + 0.3 * np.sin(2 * np.pi * g.coords[0]))
    f = m.restrict(load(g))
    rep = solve_dirichlet(A, 0.5, f, m, tol=1e-12)
    K = assemble_stiffness(A, 0.5, g)
    idx = m.dof_index
    x = np.linalg.solve(K[np.ix_(idx, idx)], f.flat()[idx])
    assert rep.converged
    assert np.abs(m.extract(rep.solution) - x).max() <= 1e-8 * np.abs(x).max()
    assert np.all(np.diff(rep.energy_history) <= 1e-15)
    assert np.all(rep.solution.values[:, ~m.interior] == 0)


def test_zero_load_gives_zero_solution():
    g = GridSpec(1, 64)
    m = DomainMask.centered(g)
    rep = solve_dirichlet(Coefficient.constant(1.0), 0.5, VectorField.zeros(g), m)
    assert rep.converged and rep.iterations == 0
    assert not np.any(rep.solution.values)


def test_noncoercive_coefficient_is_flagged():
    g = GridSpec(1, 64)
    h = g.h
    fn = lambda x, y: 1 - 6 * (1 - np.exp(-np.sum((x - y) ** 2, axis=-1) / (4 * h * h)))
    A = Coefficient.from_function(g, fn, claimed_lambda=0.1)
    m = DomainMask.centered(g)
    rep = solve_dirichlet(A, 0.5, m.restrict(load(g)), m)
    assert rep.status == INDEFINITE
    assert dense_smallest_eigenvalue(assemble_stiffness(A, 0.5, g), m) < 0


def test_invalid_coefficient_is_rejected_before_solving():
    g = GridSpec(1, 32)
    m = DomainMask.centered(g)
    with pytest.raises(CoefficientError):
        solve_dirichlet(Coefficient.constant(0.01, claimed_lambda=0.1), 0.5, m.restrict(load(g)), m)


@pytest.mark.parametrize("dim", [1, 2])
def test_constant_lame_inverts_forward_operator(dim):
    g = GridSpec(dim, 32)
    u = remove_dropped_modes(random_band_limited(g, np.random.default_rng(1), kmax=6))
    f1 = constant_lame_apply(u, 2.0, 0.6, 0.4, -1.5)
    # strong form: (-Delta)^{(2s-t)/2}(Abar D (-Delta)^{t/2} u) = f1 corresponds to solving with f2 = f1
    back = solve_constant_lame(2.0, 0.6, 0.4, -1.5, VectorField.zeros(g), f1)
    assert np.abs(back.values - u.values).max() <= 1e-10 * np.abs(u.values).max()


def test_lame_rhs_orders():
    g = GridSpec(1, 32)
    with pytest.raises(ValueError):
        solve_constant_lame(1.0, 0.0, 0.5, 0.0, VectorField.zeros(g))
    with pytest.raises(ValueError):
        solve_constant_lame(-1.0, 0.5, 0.5, 0.0, VectorField.zeros(g))
    assert not np.any(lame_rhs(VectorField.zeros(g), None, 0.4).values)


def test_weighted_richardson_converges_for_mild_weight():
    g = GridSpec(2, 32)
    u = remove_dropped_modes(random_band_limited(g, np.random.default_rng(2), kmax=4))
    Abar = 1 + 0.2 * np.sin(2 * np.pi * g.coords[0])
    f1 = constant_lame_apply(u, 1.0, 0.6, 0.4, -2.0)
    rep = solve_weighted_lame(Abar, 0.6, 0.4, -2.0, VectorField.zeros(g), f1, tol=1e-9)
    assert rep.converged and rep.iterations < 50
    assert rep.meta["oscillation"] == pytest.approx(1.5, rel=1e-2)


def test_weighted_richardson_can_fail_for_strong_oscillation():
    g = GridSpec(1, 32)
    u = remove_dropped_modes(random_band_limited(g, np.random.default_rng(2), kmax=4))
    beta = 9 / 11  # max/min = 10
    Abar = 1 + beta * np.sin(2 * np.pi * g.coords[0])
    f1 = constant_lame_apply(u, 1.0, 0.6, 0.4, -2.0)
    rep = solve_weighted_lame(Abar, 0.6, 0.4, -2.0, VectorField.zeros(g), f1, tol=1e-9, max_iter=30)
    assert rep.status == MAX_ITER


def test_perturbative_constant_converges_in_one_step():
    g = GridSpec(1, 64)
    m = DomainMask.centered(g)
    rep = solve_full_perturbative(Coefficient.constant(1.3), 0.5, 0.6, load(g), load(g, -0.03), m, tol=1e-10)
    assert rep.converged and rep.iterations == 1


def test_perturbative_zero_rhs():
    g = GridSpec(1, 32)
    m = DomainMask.centered(g)
    rep = solve_full_perturbative(Coefficient.constant(1.0), 0.5, 0.6, VectorField.zeros(g), None, m)
    assert rep.converged and rep.iterations == 0
