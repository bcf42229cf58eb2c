"""Commutators, Sobolev norms and the desk-scale experiments."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import GridSpec, VectorField, bump
from .nonlocal_form import (
    Coefficient,
    QuadratureSpec,
    apply_operator,
    bilinear_form,
    gagliardo_seminorm,
    lattice_symbol,
    projected_seminorm,
    separable_fast_apply,
)
from .spectral import (
    LameSymbolConstants,
    derive_ell_constants,
    frac_laplacian,
    lame_multiplier_apply,
    riesz_matrix_apply,
    riesz_transform,
    spectral_refine,
)
from .solver import CONVERGED, DomainMask, SolverError, frozen_coefficient, lame_rhs, solve_dirichlet


# -- commutators ---------------------------------------------------------------


@dataclass(frozen=True)
class CommutatorBreakdown:
    """``total = d1 + d2`` holds exactly: ``total`` is formed from the two parts."""

    d1: float
    d2: float
    norm: float = 1.0

    @property
    def total(self) -> float:
        return self.d1 + self.d2

    def normalized(self) -> tuple[float, float, float]:
        return self.total / self.norm, self.d1 / self.norm, self.d2 / self.norm


def _check_split(s1, s2):
    if not (0 < s1 < 2 and 0 < s2 < 2):
        raise ValueError("s1 and s2 must lie in (0, 2)")
    s = 0.5 * (s1 + s2)
    if not 0 < s < 1:
        raise ValueError("s1 + s2 must lie in (0, 2)")
    return s


def frozen_form(A_D: np.ndarray, u: VectorField, phi: VectorField, s1: float, s2: float, consts: LameSymbolConstants) -> float:
    """``<A_D (ell1 I - ell2 R(x)R) (-Delta)^{s1/2} u, (-Delta)^{s2/2} phi>``."""
    U = frac_laplacian(u, s1)
    V = frac_laplacian(phi, s2)
    W = U * consts.ell1 - riesz_matrix_apply(U) * consts.ell2
    return W.with_values(np.asarray(A_D).reshape(u.grid.shape)[None] * W.values).dot(V)


def commutator_total(A: Coefficient, u: VectorField, phi: VectorField, s1: float, s2: float,
                     consts: LameSymbolConstants | None = None, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Lattice form ``B_A(u, phi)`` minus the frozen spectral form with the diagonal ``A_D``."""
    s = _check_split(s1, s2)
    g = u.grid
    consts = derive_ell_constants(g.dim, s) if consts is None else consts
    A_D = A.diagonal(g)
    if A.kind in ("constant", "separable"):
        b = separable_fast_apply(A, s, u, quad).dot(phi)
    else:
        b = bilinear_form(A, s, u, phi, quad)
    return b - frozen_form(A_D, u, phi, s1, s2, consts)


def commutator_d2(A_D, u: VectorField, phi: VectorField, s1: float, s2: float) -> float:
    """``<[R(x)R, A_D] U, V>`` with ``U = (-Delta)^{s1/2} u``, ``V = (-Delta)^{s2/2} phi``."""
    _check_split(s1, s2)
    g = u.grid
    a = np.broadcast_to(np.asarray(A_D, dtype=float).reshape(-1) if np.ndim(A_D) else A_D, (g.num_nodes,)).reshape(g.shape)
    U = frac_laplacian(u, s1)
    V = frac_laplacian(phi, s2)
    comm = riesz_matrix_apply(U.with_values(a[None] * U.values)) - riesz_matrix_apply(U).with_values(
        a[None] * riesz_matrix_apply(U).values)
    return comm.dot(V)


def commutator_breakdown(A: Coefficient, u: VectorField, phi: VectorField, s1: float, s2: float,
                         consts: LameSymbolConstants | None = None, quad: QuadratureSpec = QuadratureSpec()) -> CommutatorBreakdown:
    """Split into the Riesz part ``d2 = -ell2 <[R(x)R, A_D]U, V>`` and the remainder ``d1``."""
    s = _check_split(s1, s2)
    g = u.grid
    consts = derive_ell_constants(g.dim, s) if consts is None else consts
    total = commutator_total(A, u, phi, s1, s2, consts, quad)
    d2 = -consts.ell2 * commutator_d2(A.diagonal(g), u, phi, s1, s2)
    norm = frac_laplacian(u, s1).norm() * frac_laplacian(phi, s2).norm()
    return CommutatorBreakdown(total - d2, d2, norm if norm > 0 else 1.0)


def coefficient_defect(A: Coefficient, s: float, u: VectorField, quad: QuadratureSpec = QuadratureSpec(),
                       frozen: Coefficient | None = None) -> VectorField:
    """``L_A u - Lbar u`` with ``Lbar`` the separable surrogate built from ``A_D``."""
    g = u.grid
    frozen = frozen_coefficient(A, g) if frozen is None else frozen
    if A.kind in ("constant", "separable"):
        full = separable_fast_apply(A, s, u, quad)
    else:
        full = apply_operator(A, s, u, quad)
    return full - separable_fast_apply(frozen, s, u, quad)


def windowed_wave(grid: GridSpec, k, amplitude=None, phase: float = 0.0) -> VectorField:
    """Plane wave ``cos(2 pi k.x/L + phase)`` times the support window."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    amp = np.ones(grid.dim) if amplitude is None else np.atleast_1d(np.asarray(amplitude, dtype=float))
    arg = 2 * np.pi * np.tensordot(k, grid.coords, axes=1) / grid.box_length + phase
    w = bump(grid) * np.cos(arg)
    return VectorField(grid, amp.reshape((grid.dim,) + (1,) * grid.dim) * w[None])


@dataclass
class DecayTable:
    rows: list
    slope: float

    def as_rows(self):
        return [(r["k"], r["total"], r["d1"], r["d2"]) for r in self.rows]


def _loglog_slope(x, y):
    x, y = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    return float(np.polyfit(x, y, 1)[0])


def _richardson(coarse: float, fine: float, s: float) -> float:
    w = 2.0 ** (2 - 2 * s)
    return (w * fine - coarse) / (w - 1)


def commutator_decay_experiment(coefficient, s: float, s1: float, s2: float, frequencies: Sequence[int],
                                grid: GridSpec, consts: LameSymbolConstants | None = None,
                                quad: QuadratureSpec = QuadratureSpec(), phase_shift: float = np.pi / 3,
                                extrapolate: bool = True) -> DecayTable:
    """Normalized ``|D_total|, |d1|, |d2|`` for windowed waves ``u``, ``phi`` at each ``k``.

    ``coefficient`` is a :class:`Coefficient` usable on every grid (constant) or
    a callable ``grid -> Coefficient``.  The lattice form carries an error of
    order ``h^{2-2s}`` that grows with ``k``; with ``extrapolate`` each entry
    is the Richardson combination of ``grid`` and its refinement, and
    ``row["refined"]`` holds the same combination one level finer (for the
    resolution check).  ``phi`` carries a phase shift so the pairing does not
    rest on a symmetry of the coefficient.
    """
    if list(frequencies) != sorted(frequencies):
        raise ValueError("frequencies must be increasing")
    consts = derive_ell_constants(grid.dim, s) if consts is None else consts
    make = coefficient if callable(coefficient) and not isinstance(coefficient, Coefficient) else (lambda g: coefficient)
    levels = [grid, grid.refine(2), grid.refine(4)] if extrapolate else [grid, grid.refine(2)]
    raw = {}
    for g in levels:
        A = make(g)
        for k in frequencies:
            kv = [k] + [0] * (g.dim - 1)
            u = windowed_wave(g, kv)
            phi = windowed_wave(g, kv, phase=phase_shift)
            br = commutator_breakdown(A, u, phi, s1, s2, consts, quad)
            raw[g.N, k] = br.normalized()[1:]
    rows = []
    for k in frequencies:
        vals = [raw[g.N, k] for g in levels]
        if extrapolate:
            est = [tuple(_richardson(a, b, s) for a, b in zip(vals[i], vals[i + 1])) for i in range(2)]
        else:
            est = vals
        d1, d2 = est[0]
        r1, r2 = est[1]
        rows.append({"k": int(k), "total": abs(d1 + d2), "d1": abs(d1), "d2": abs(d2),
                     "refined": abs(r1 + r2), "raw": abs(sum(vals[0]))})
    slope = _loglog_slope([r["k"] for r in rows], [r["total"] for r in rows])
    return DecayTable(rows, slope)


def resolution_change(table: DecayTable) -> float:
    """Largest relative change of ``total`` between the two resolution levels."""
    return max(abs(r["refined"] - r["total"]) / max(r["total"], 1e-300) for r in table.rows)


# -- norms ---------------------------------------------------------------------


def sobolev_lp_norm(u: VectorField, t: float, p: float = 2.0, region: np.ndarray | None = None) -> float:
    """``L^p`` grid norm of ``(-Delta)^{t/2} u`` over ``region``."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if region is not None and not np.any(region):
        raise ValueError("empty region")
    return frac_laplacian(u, t).norm(p, region)


def hs_norm(u: VectorField, s: float) -> float:
    return float(np.sqrt(u.norm() ** 2 + frac_laplacian(u, s).norm() ** 2))


@dataclass
class RegularityConfig:
    s: float = 0.5
    t: float = 0.6
    q: float = 2.0
    dim: int = 1
    grids: tuple = (64, 128, 256)
    box_length: float = 1.0
    domain_fraction: float = 0.8
    probe_fraction: float = 0.5
    coefficient: Callable[[GridSpec], Coefficient] | None = None
    f1: Callable[[GridSpec], VectorField] | None = None
    f2: Callable[[GridSpec], VectorField] | None = None
    tol: float = 1e-10


@dataclass
class RegularityReport:
    grids: list
    lhs: list
    rhs: list
    ratios: list
    iterations: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    @property
    def variation(self) -> float:
        """Relative change of the ratio between the two finest grids."""
        a, b = self.ratios[-2], self.ratios[-1]
        top = max(abs(a), abs(b))
        return 0.0 if top == 0 else abs(b - a) / top


def smooth_load(grid: GridSpec, center: float = 0.05, width: float = 0.12, direction=None,
                radius: float | None = None) -> VectorField:
    """Gaussian-shaped load times a smooth window of the given radius; resolution independent."""
    x = grid.coords
    r2 = np.sum((x - center) ** 2, axis=0)
    d = np.ones(grid.dim) if direction is None else np.asarray(direction, float)
    vals = np.exp(-r2 / (2 * width**2)) * bump(grid, radius)
    return VectorField(grid, d.reshape((grid.dim,) + (1,) * grid.dim) * vals[None])


def regularity_experiment(cfg: RegularityConfig) -> RegularityReport:
    """Solve on each grid and compare ``|(-Delta)^{t/2} u|_{L^q(probe)}`` to the data bundle."""
    if not cfg.s <= cfg.t < min(2 * cfg.s, 1.0):
        raise ValueError(f"t = {cfg.t} violates s <= t < min(2s, 1)")
    out = RegularityReport([], [], [], [])
    for N in cfg.grids:
        g = GridSpec(cfg.dim, N, cfg.box_length)
        mask = DomainMask.centered(g, cfg.domain_fraction, cfg.probe_fraction)
        A = Coefficient.constant(1.0) if cfg.coefficient is None else cfg.coefficient(g)
        f1 = VectorField.zeros(g) if cfg.f1 is None else cfg.f1(g)
        f2 = VectorField.zeros(g) if cfg.f2 is None else cfg.f2(g)
        f = lame_rhs(f1, f2, 2 * cfg.s - cfg.t)
        rep = solve_dirichlet(A, cfg.s, mask.restrict(f), mask, tol=cfg.tol)
        if rep.status != CONVERGED:
            raise SolverError(f"Dirichlet solve on N={N} ended with status {rep.status}")
        u = rep.solution
        lhs = sobolev_lp_norm(u, cfg.t, cfg.q, mask.probe)
        data = sum(fi.norm(cfg.q, mask.interior) + fi.norm(2.0) for fi in (f1, f2))
        rhs = hs_norm(u, cfg.s) + data
        out.grids.append(N)
        out.lhs.append(lhs)
        out.rhs.append(rhs)
        out.ratios.append(lhs / rhs if rhs > 0 else 0.0)
        out.iterations.append(rep.iterations)
    return out


# -- Korn ratio ------------------------------------------------------------------


def korn_ratio(u: VectorField, s: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Projected seminorm over the full vector seminorm, both on the same lattice."""
    if not np.any(u.values):
        raise ValueError("korn_ratio needs a nonzero field")
    return projected_seminorm(u, s, quad) / gagliardo_seminorm(u, s, quad)


def korn_bounds(dim: int, s: float, consts: LameSymbolConstants | None = None) -> tuple[float, float]:
    """Spectral bounds: transverse and longitudinal eigenvalues over the trace of the symbol."""
    if dim == 1:
        return 1.0, 1.0
    c = derive_ell_constants(dim, s) if consts is None else consts
    tr = dim * c.ell1 + c.ell2
    return c.ell1 / tr, (c.ell1 + c.ell2) / tr


def lattice_korn_bounds(grid: GridSpec, s: float) -> tuple[float, float]:
    """Exact range of :func:`korn_ratio` on the periodic lattice.

    Both seminorms diagonalize in Fourier space, so the ratio lies between
    the extreme per-mode values of ``eig(S(xi)) / tr S(xi)``.
    """
    S = lattice_symbol(grid, s)
    n = grid.dim
    mats = np.moveaxis(S.reshape(n, n, -1), -1, 0)[1:]  # drop the zero mode
    ev = np.linalg.eigvalsh(mats)
    tr = ev.sum(axis=1)
    return float((ev[:, 0] / tr).min()), float((ev[:, -1] / tr).max())


# -- Hessian identity ------------------------------------------------------------


def hessian_gammas(dim: int, s: float) -> tuple[float, float]:
    a = dim + 2 * s - 2
    return a * (dim + 2 * s), a


def hessian_identity_residual(dim: int, s: float, sample_points=None, step: float = 1e-4) -> float:
    """Max relative Frobenius gap between a central-difference Hessian of ``|w|^{-(n+2s-2)}`` and
    ``gamma1 w_hat w_hat^T |w|^{-(n+2s)} - gamma2 |w|^{-(n+2s)} I``."""
    if dim not in (1, 2) or not 0 < s < 1:
        raise ValueError("dim must be 1 or 2 and s in (0, 1)")
    if sample_points is None:
        rng = np.random.default_rng(12345)
        r = rng.uniform(1.0, 2.0, 16)
        if dim == 1:
            sample_points = (r * rng.choice([-1, 1], 16))[:, None]
        else:
            th = rng.uniform(0, 2 * np.pi, 16)
            sample_points = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    W = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if W.shape[1] != dim:
        W = W.reshape(-1, dim)
    if np.any(np.linalg.norm(W, axis=1) < 0.1):
        raise ValueError("sample points must satisfy |w| >= 0.1")
    a = dim + 2 * s - 2
    g1, g2 = hessian_gammas(dim, s)
    f = lambda w: np.linalg.norm(w) ** (-a)
    E = np.eye(dim) * step
    worst = 0.0
    for w in W:
        H = np.empty((dim, dim))
        for i in range(dim):
            H[i, i] = (f(w + E[i]) - 2 * f(w) + f(w - E[i])) / step**2
            for j in range(i + 1, dim):
                H[i, j] = H[j, i] = (f(w + E[i] + E[j]) - f(w + E[i] - E[j]) - f(w - E[i] + E[j]) + f(w - E[i] - E[j])) / (4 * step**2)
        r = np.linalg.norm(w)
        wh = w / r
        exact = (g1 * np.outer(wh, wh) - g2 * np.eye(dim)) * r ** (-(dim + 2 * s))
        scale = max(np.linalg.norm(exact), r ** (-(dim + 2 * s)))
        worst = max(worst, float(np.linalg.norm(H - exact) / scale))
    return worst


# -- local limit ---------------------------------------------------------------


def _grad_scalar(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(grid.dim))
    fh = np.fft.fftn(f)
    xi = grid.frequencies.copy()
    xi[:, grid.nyquist] = 0.0
    return np.stack([np.fft.ifftn(2j * np.pi * xi[j] * fh, axes=axes).real for j in range(grid.dim)])


def lame_local_operator(a: np.ndarray, u: VectorField) -> VectorField:
    """``div(a grad u) + 2 grad(a div u)`` computed spectrally."""
    g = u.grid
    a = np.asarray(a, float).reshape(g.shape)
    out = np.zeros_like(u.values)
    for i in range(g.dim):
        gu = _grad_scalar(u.values[i], g)
        for j in range(g.dim):
            out[i] += _grad_scalar(a * gu[j], g)[j]
    div = sum(_grad_scalar(u.values[j], g)[j] for j in range(g.dim))
    out += 2 * _grad_scalar(a * div, g)
    return VectorField(g, out)


def extrapolated_apply(a, s: float, u: VectorField, quad: QuadratureSpec = QuadratureSpec()) -> VectorField:
    """Richardson-extrapolated lattice operator for separable ``A``.

    The lattice operator with omitted diagonal differs from its limit by a
    term of order ``h^{2-2s}`` whose constant blows up like ``1/(1-s)``.
    ``u`` and ``a`` are interpolated spectrally (exact for band-limited data)
    to the grid with spacing ``h/2`` and the two applications are combined.
    """
    g = u.grid
    a = np.broadcast_to(np.asarray(a, float), g.shape)
    af = spectral_refine(VectorField(g, np.repeat(a[None], g.dim, axis=0))).values[0]
    uf = spectral_refine(u)
    coarse = separable_fast_apply(a, s, u, quad).values
    fine = separable_fast_apply(af, s, uf, quad).values[(slice(None),) + (slice(None, None, 2),) * g.dim]
    w = 2.0 ** (2 - 2 * s)
    return VectorField(g, (w * fine - coarse) / (w - 1))


def local_limit_experiment(a, s_list: Sequence[float], u: VectorField, quad: QuadratureSpec = QuadratureSpec(),
                           extrapolate: bool = True):
    """Rows ``(s, kappa, residual, raw_residual)``: best scalar ``kappa`` with ``kappa L u ~ -L0 u``.

    ``residual`` uses :func:`extrapolated_apply` when ``extrapolate``;
    ``raw_residual`` always uses the plain lattice operator.
    """
    g = u.grid
    a = np.broadcast_to(np.asarray(a, float), g.shape)
    target = -lame_local_operator(a, u).values
    tnorm = np.linalg.norm(target)
    rows = []

    def fit(Lu):
        denom = float(np.vdot(Lu, Lu))
        if tnorm == 0 or denom == 0:
            return 0.0, 0.0
        kappa = float(np.vdot(Lu, target)) / denom
        return kappa, float(np.linalg.norm(kappa * Lu - target) / tnorm)

    for s in s_list:
        if not 0 < s < 1:
            raise ValueError("s must lie in (0, 1)")
        raw_k, raw_r = fit(separable_fast_apply(a, s, u, quad).values)
        if extrapolate:
            kappa, res = fit(extrapolated_apply(a, s, u, quad).values)
        else:
            kappa, res = raw_k, raw_r
        rows.append({"s": s, "kappa": kappa, "residual": res, "raw_residual": raw_r})
    return rows


# -- multiplier bound ------------------------------------------------------------


def transverse_field(grid: GridSpec, rng: np.random.Generator, kmax: int | None = None) -> VectorField:
    """Divergence-free (2D) field ``(R_2 psi, -R_1 psi)``."""
    from .grid import random_band_limited

    psi = random_band_limited(grid, rng, kmax, dim_out=grid.dim)
    one = psi.with_values(np.repeat(psi.values[:1], grid.dim, axis=0))
    r2 = riesz_transform(one, 1).values[0]
    r1 = riesz_transform(one, 0).values[0]
    return VectorField(grid, np.stack([r2, -r1]))


def multiplier_bound_check(c: float, p: float, trial_count: int = 20, grid: GridSpec | None = None,
                           seed: int = 0, transverse: bool = False) -> dict:
    """Statistics of ``|U|_p / |U + c R(x)R U|_p`` over random band-limited 2D fields."""
    from .grid import random_band_limited

    if p not in (2, 4):
        raise ValueError("p must be 2 or 4")
    grid = GridSpec(2, 64) if grid is None else grid
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trial_count):
        U = transverse_field(grid, rng) if transverse else random_band_limited(grid, rng)
        ratios.append(U.norm(p) / lame_multiplier_apply(U, c).norm(p))
    bound = max(1.0, 1.0 / abs(1.0 - c)) if p == 2 else None
    return {"max": float(max(ratios)), "min": float(min(ratios)), "mean": float(np.mean(ratios)),
            "bound": bound, "ratios": ratios}
