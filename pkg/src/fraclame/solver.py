"""Dirichlet and weighted Lame solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .grid import GridSpec, VectorField
from .nonlocal_form import (
    Coefficient,
    QuadratureSpec,
    apply_operator,
    separable_fast_apply,
    validate_coefficient,
)
from .spectral import (
    derive_ell_constants,
    frac_laplacian,
    lame_multiplier_apply,
    lame_multiplier_solve,
    remove_dropped_modes,
    riesz_potential,
)

CONVERGED = "converged"
MAX_ITER = "max_iter"
INDEFINITE = "indefinite_detected"


class SolverError(RuntimeError):
    pass


@dataclass
class DomainMask:
    """Dirichlet domain ``Omega`` (``interior``) and an optional probe set compactly inside it."""

    grid: GridSpec
    interior: np.ndarray
    probe: np.ndarray | None = None

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=bool)
        if self.interior.shape != self.grid.shape:
            raise ValueError("interior mask does not match the grid")
        if not self.interior.any():
            raise ValueError("empty interior")
        if np.any(self.interior & ~self.grid.support_mask()):
            raise ValueError("interior nodes must lie strictly inside the support sub-box")
        if self.probe is not None:
            self.probe = np.asarray(self.probe, dtype=bool)
            if not self.probe.any():
                raise ValueError("empty probe set")
            # distance (in cells) from each interior node to the nearest exterior node
            dist = ndimage.distance_transform_edt(self.interior)
            if np.any(self.probe & (dist < 2.0)):
                raise ValueError("probe nodes must be at least 2 cells from the boundary of the interior")

    @classmethod
    def ball(cls, grid: GridSpec, radius: float, probe_radius: float | None = None) -> "DomainMask":
        probe = None if probe_radius is None else grid.ball_mask(probe_radius)
        return cls(grid, grid.ball_mask(radius), probe)

    @classmethod
    def centered(cls, grid: GridSpec, fraction: float = 0.8, probe_fraction: float | None = 0.5) -> "DomainMask":
        """Ball of radius ``fraction`` times the support half-width (probe likewise)."""
        half = 0.5 * grid.support_fraction * grid.box_length
        pr = None if probe_fraction is None else probe_fraction * half
        return cls.ball(grid, fraction * half, pr)

    @property
    def dof_index(self) -> np.ndarray:
        """Indices into ``VectorField.flat()`` of the interior degrees of freedom."""
        nodes = np.flatnonzero(self.interior.reshape(-1))
        d = self.grid.dim
        return (nodes[:, None] * d + np.arange(d)[None, :]).reshape(-1)

    def restrict(self, u: VectorField) -> VectorField:
        return u.restricted(self.interior)

    def embed(self, x: np.ndarray) -> VectorField:
        full = np.zeros(self.grid.num_nodes * self.grid.dim)
        full[self.dof_index] = x
        return VectorField.from_flat(self.grid, full)

    def extract(self, u: VectorField) -> np.ndarray:
        return u.flat()[self.dof_index]


@dataclass
class SolveReport:
    solution: VectorField
    iterations: int
    residual_history: list = field(default_factory=list)
    status: str = CONVERGED
    energy_history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0


def conjugate_gradient(
    op: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
    weight: float = 1.0,
):
    """(Preconditioned) CG on ``op x = b`` with relative residual ``|b - op x| / |b|``.

    Returns ``(x, residuals, energies, status, iterations)``; energies are
    ``weight * (x.op(x)/2 - b.x)`` of the iterates, tracked without extra applies.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), [], [], CONVERGED, 0
    r = b - op(x) if x0 is not None else b.copy()
    z = precond(r) if precond else r
    p = z.copy()
    rz = r @ z
    residuals, energies = [], [-0.5 * weight * (x @ (b + r))]
    for it in range(1, max_iter + 1):
        Ap = op(p)
        curv = p @ Ap
        if curv <= 0:
            residuals.append(float(np.linalg.norm(r) / bnorm))
            return x, residuals, energies, INDEFINITE, it
        alpha = rz / curv
        x = x + alpha * p
        r = r - alpha * Ap
        energies.append(-0.5 * weight * (x @ (b + r)))
        res = float(np.linalg.norm(r) / bnorm)
        if res <= tol:
            # confirm against the true residual to avoid drift in the recursion
            r = b - op(x)
            res = float(np.linalg.norm(r) / bnorm)
            if res <= tol:
                residuals.append(res)
                return x, residuals, energies, CONVERGED, it
        residuals.append(res)
        z = precond(r) if precond else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, residuals, energies, MAX_ITER, max_iter


def operator_for(A: Coefficient, s: float, quad: QuadratureSpec = QuadratureSpec(), fast: bool | None = None):
    """``u -> L u`` using the FFT path when ``A`` is constant or separable."""
    if fast is None:
        fast = A.kind in ("constant", "separable")
    if fast:
        return lambda u: separable_fast_apply(A, s, u, quad)
    return lambda u: apply_operator(A, s, u, quad)


def solve_dirichlet(
    A: Coefficient,
    s: float,
    f: VectorField,
    mask: DomainMask,
    tol: float = 1e-10,
    max_iter: int | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
    validate: bool = True,
    fast: bool | None = None,
) -> SolveReport:
    """Minimize ``1/2 <L u, u> - <f, u>`` over fields vanishing outside ``mask.interior`` by CG."""
    if f.grid != mask.grid:
        raise ValueError("f and mask live on different grids")
    if validate:
        validate_coefficient(A, f.grid)
    apply = operator_for(A, s, quad, fast)
    b = mask.extract(f)
    max_iter = 10 * b.size if max_iter is None else max_iter
    op = lambda x: mask.extract(apply(mask.embed(x)))
    x, res, en, status, it = conjugate_gradient(op, b, tol, max_iter, weight=f.grid.cell_volume)
    return SolveReport(mask.embed(x), it, res, status, en)


def dense_smallest_eigenvalue(K: np.ndarray, mask: DomainMask | None = None) -> float:
    """Smallest eigenvalue of a (restricted) assembled stiffness matrix."""
    if mask is not None:
        idx = mask.dof_index
        K = K[np.ix_(idx, idx)]
    return float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])


# -- weighted fractional Lame --------------------------------------------------


def _check_orders(t, sigma):
    if not (0 < t < 1 and 0 < sigma < 1):
        raise ValueError(f"orders t = {t} and 2s - t = {sigma} must both lie in (0, 1)")


def constant_lame_apply(u: VectorField, Abar: float, t: float, two_s_minus_t: float, c: float) -> VectorField:
    """``(-Delta)^{(2s-t)/2} Abar (I + c R(x)R) (-Delta)^{t/2} u``."""
    return frac_laplacian(lame_multiplier_apply(frac_laplacian(u, t) * Abar, c), two_s_minus_t)


def lame_rhs(f1: VectorField, f2: VectorField | None, two_s_minus_t: float) -> VectorField:
    """Strong form ``(-Delta)^{(2s-t)/2} f1 + f2`` of the right-hand side."""
    out = frac_laplacian(f1, two_s_minus_t)
    return out if f2 is None else out + f2


def solve_constant_lame(Abar: float, t: float, two_s_minus_t: float, c: float, f1: VectorField, f2: VectorField | None = None) -> VectorField:
    """Exact spectral inverse: ``u = I^t D^{-1}(f1 + I^{2s-t} f2) / Abar``."""
    if not Abar > 0:
        raise ValueError("Abar must be positive")
    _check_orders(t, two_s_minus_t)
    g = f1 if f2 is None else f1 + riesz_potential(f2, two_s_minus_t)
    return riesz_potential(lame_multiplier_solve(g, c), t) * (1.0 / Abar)


def _weighted_inner(u: VectorField, Abar: np.ndarray, t: float, c: float) -> VectorField:
    v = lame_multiplier_apply(frac_laplacian(u, t), c)
    return remove_dropped_modes(v.with_values(Abar[None] * v.values))


def solve_weighted_lame(
    Abar,
    t: float,
    two_s_minus_t: float,
    c: float,
    f1: VectorField,
    f2: VectorField | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> SolveReport:
    """Preconditioned Richardson for ``(-Delta)^{(2s-t)/2}(Abar(x) D (-Delta)^{t/2} u) = rhs``.

    The outer ``(-Delta)^{(2s-t)/2}`` is peeled off, so the iteration works
    on ``Abar D (-Delta)^{t/2} u = f1 + I^{2s-t} f2`` modulo the modes the
    multipliers discard.  The preconditioner is the exact constant solve at
    the geometric mean of ``Abar``.
    """
    _check_orders(t, two_s_minus_t)
    g = f1.grid
    Abar = np.broadcast_to(np.asarray(Abar, dtype=float), g.shape)
    if np.any(Abar <= 0):
        raise ValueError("Abar must be positive on the grid")
    A0 = float(np.exp(np.mean(np.log(Abar))))
    rhs = f1 if f2 is None else f1 + riesz_potential(f2, two_s_minus_t)
    rhs = remove_dropped_modes(rhs)
    scale = rhs.norm()
    u = VectorField.zeros(g)
    if scale == 0:
        return SolveReport(u, 0, [], CONVERGED, meta={"Abar0": A0, "dropped_mode": rhs.dropped_mode})
    history = []
    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        r = rhs - _weighted_inner(u, Abar, t, c)
        u = u + solve_constant_lame(A0, t, two_s_minus_t, c, r)
        res = (rhs - _weighted_inner(u, Abar, t, c)).norm() / scale
        history.append(res)
        if res <= tol:
            status = CONVERGED
            break
    return SolveReport(u.with_values(u.values), it, history, status,
                       meta={"Abar0": A0, "dropped_mode": rhs.dropped_mode, "oscillation": float(Abar.max() / Abar.min())})


# -- perturbative outer iteration ------------------------------------------------


def frozen_coefficient(A: Coefficient, grid: GridSpec) -> Coefficient:
    """Separable surrogate ``(A_D(x) + A_D(y))/2`` built from the diagonal."""
    return Coefficient.separable(A.diagonal(grid).reshape(grid.shape), claimed_alpha=A.claimed_alpha,
                                 claimed_lambda=A.claimed_lambda, claimed_Lambda=A.claimed_Lambda)


def solve_full_perturbative(
    A: Coefficient,
    s: float,
    t: float,
    f1: VectorField,
    f2: VectorField | None,
    mask: DomainMask,
    tol: float = 1e-8,
    outer_max: int = 50,
    quad: QuadratureSpec = QuadratureSpec(),
    inner_tol: float | None = None,
) -> SolveReport:
    """Frozen-coefficient outer iteration ``Lbar u_{k+1} = F - (L_A - Lbar) u_k`` on ``Omega``.

    ``Lbar`` is the lattice operator of the separable surrogate built from
    ``A_D``; it is inverted on ``Omega`` by CG preconditioned with the
    constant spectral Lame solve.  The defect ``L_A - Lbar`` is the
    coefficient commutator of :func:`fraclame.diagnostics.coefficient_defect`.
    The outer residual is ``|F - L_A u|/|F|`` on ``Omega``.
    """
    from .diagnostics import coefficient_defect

    g = f1.grid
    validate_coefficient(A, g)
    if not s <= t < min(2 * s, 1.0):
        raise ValueError(f"t = {t} violates s <= t < min(2s, 1)")
    F = mask.restrict(lame_rhs(f1, f2, 2 * s - t))
    b = mask.extract(F)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return SolveReport(VectorField.zeros(g), 0, [], CONVERGED)
    inner_tol = 0.05 * tol if inner_tol is None else inner_tol

    frozen = frozen_coefficient(A, g)
    Lbar = lambda u: separable_fast_apply(frozen, s, u, quad)
    La = operator_for(A, s, quad)
    consts = derive_ell_constants(g.dim, s)
    A0 = float(np.exp(np.mean(np.log(A.diagonal(g)[mask.interior.reshape(-1)]))))

    def precond(r):
        z = solve_constant_lame(A0 * consts.ell1, s, s, consts.c, mask.embed(r))
        return mask.extract(z)

    op = lambda x: mask.extract(Lbar(mask.embed(x)))

    u = VectorField.zeros(g)
    history, inner_its = [], []
    status, rises, k = MAX_ITER, 0, 0
    for k in range(1, outer_max + 1):
        rhs = b - (mask.extract(coefficient_defect(A, s, u, quad, frozen=frozen)) if k > 1 else 0.0)
        x, _, _, st, its = conjugate_gradient(op, rhs, inner_tol, 10 * b.size, precond=precond,
                                              x0=mask.extract(u) if k > 1 else None)
        inner_its.append(its)
        if st != CONVERGED:
            raise SolverError(f"inner frozen solve failed with status {st}")
        u = mask.embed(x)
        res = float(np.linalg.norm(b - mask.extract(La(u))) / bnorm)
        history.append(res)
        if res <= tol:
            status = CONVERGED
            break
        rises = rises + 1 if len(history) > 1 and res > history[-2] else 0
        if rises >= 3:
            break
    contraction = [b_ / a_ for a_, b_ in zip(history[:-1], history[1:])]
    return SolveReport(u, k, history, status, meta={"inner_iterations": inner_its, "contraction": contraction})
