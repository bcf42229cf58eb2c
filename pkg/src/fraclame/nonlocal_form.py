"""Real-space quadrature of the coupled nonlocal form.

The pointwise operator is

    L u(x) = sum_{y != x} A(x,y) G(x-y) (u(x) - u(y)),   G(z) = h^n |z|^{-n-2s} e(x)e,  e = z/|z|

``bilinear_form`` is ``<L u, v>`` on the grid, i.e. one half of the double
sum over ordered pairs, so for ``A = 1`` its Fourier symbol tends to
``(2 pi|xi|)^{2s}(ell1 I + ell2 xi_hat (x) xi_hat)`` as ``h -> 0``.

Two geometries are available.  On the torus (default) ``G`` is summed over
all periodic images, so the lattice form and the spectral operators act on
the same periodic fields.  In free space the sum runs over box nodes only
and the exterior of the box enters through a per-node term
``A(x,x) T(x) u(x)`` (fields vanish outside the box).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .grid import GridSpec, VectorField, smooth_cutoff

TAIL_POLICIES = ("periodic", "box-exterior", "analytic-diagonal-correction", "none")


class CoefficientError(ValueError):
    """Coefficient violates the class bounds it claims."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class Coefficient:
    """Symmetric kernel weight ``A(x, y)`` on the lattice.

    ``kind`` is ``"constant"`` (``kappa``), ``"separable"``
    (``A = (a(x) + a(y))/2`` with ``a`` a scalar field) or ``"general"``
    (a symmetric ``num_nodes x num_nodes`` table).
    """

    kind: str
    kappa: float = 1.0
    a: np.ndarray | None = None
    table: np.ndarray | None = None
    claimed_alpha: float = 0.5
    claimed_lambda: float = 0.5
    claimed_Lambda: float = 1.0
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "separable", "general"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if not 0 < self.claimed_alpha < 1:
            raise ValueError("claimed_alpha must lie in (0, 1)")
        if self.claimed_lambda <= 0 or self.claimed_Lambda <= 0:
            raise ValueError("claimed_lambda and claimed_Lambda must be positive")
        if self.kind == "separable":
            self.a = np.asarray(self.a, dtype=float)
        if self.kind == "general" and self.table is None:
            if self.fn is None:
                raise ValueError("general coefficient needs a table or a function")
        elif self.kind == "general":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1]:
                raise ValueError("general table must be square over node pairs")
            # store unordered pairs: symmetrize from the upper triangle
            upper = np.triu(t)
            self.table = upper + np.triu(t, 1).T

    @classmethod
    def constant(cls, kappa: float, **claims) -> "Coefficient":
        return cls("constant", kappa=float(kappa), **claims)

    @classmethod
    def separable(cls, a, **claims) -> "Coefficient":
        return cls("separable", a=a, **claims)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable, tabulate: bool | None = None, **claims) -> "Coefficient":
        """General coefficient from ``fn(x, y)`` (point arrays of shape ``(..., dim)``).

        Small grids are tabulated once on all node pairs; larger ones evaluate
        ``(fn(x,y) + fn(y,x))/2`` on demand, which is symmetric by construction.
        """
        if tabulate is None:
            tabulate = grid.num_nodes <= 2048
        if not tabulate:
            return cls("general", fn=fn, **claims)
        p = grid.points
        table = fn(p[:, None, :], p[None, :, :])
        return cls("general", table=np.broadcast_to(table, (len(p), len(p))).copy(), **claims)

    def pairs(self, grid: GridSpec, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """``A(x_i, x_j)`` for broadcastable node index arrays."""
        if self.kind == "constant":
            return np.full(np.broadcast(i, j).shape, self.kappa)
        if self.kind == "separable":
            a = self.a.reshape(-1)
            return 0.5 * (a[i] + a[j])
        if self.table is None:
            p = grid.points
            x, y = p[i], p[j]
            return np.broadcast_to(0.5 * (self.fn(x, y) + self.fn(y, x)), np.broadcast(i, j).shape)
        return self.table[i, j]

    def diagonal(self, grid: GridSpec) -> np.ndarray:
        """``A_D(x) = A(x, x)`` on the nodes, flat."""
        if self.kind == "constant":
            return np.full(grid.num_nodes, self.kappa)
        if self.kind == "separable":
            return self.a.reshape(-1).copy()
        if self.table is None:
            p = grid.points
            return np.broadcast_to(np.asarray(self.fn(p, p), dtype=float), (grid.num_nodes,)).copy()
        return np.diag(self.table).copy()

    def dense(self, grid: GridSpec) -> np.ndarray:
        idx = np.arange(grid.num_nodes)
        return self.pairs(grid, idx[:, None], idx[None, :])

    def check_grid(self, grid: GridSpec):
        if self.kind == "separable" and self.a.size != grid.num_nodes:
            raise ValueError("separable weight does not match the grid")
        if self.kind == "general" and self.table is not None and self.table.shape[0] != grid.num_nodes:
            raise ValueError("coefficient table does not match the grid")


def sign_changing_coefficient(grid: GridSpec, lam: float = 1e-7, alpha: float = 0.5, amplitude: float = 1e6):
    """The class member with negative off-diagonal values (1D form, ``sin`` of the first coordinate)."""

    def fn(x, y):
        ax = np.sum(np.abs(x) ** 2, axis=-1) ** (alpha / 2)
        ay = np.sum(np.abs(y) ** 2, axis=-1) ** (alpha / 2)
        d = np.sqrt(np.sum((x - y) ** 2, axis=-1)) ** alpha
        return (2 * lam + ax + ay) / (lam + ax + ay) + amplitude * (np.sin(x[..., 0]) + np.sin(y[..., 0])) * d / (1 + d)

    return fn


@dataclass
class CoefficientReport:
    diag_inf: float
    sup_abs: float
    holder_quotient: float
    negative_offdiag: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_coefficient(A: Coefficient, grid: GridSpec, sample_count: int = 1000, seed: int = 0, strict: bool = True):
    """Check the class bounds of ``A`` on the lattice and estimate its Hoelder quotient.

    The diagonal lower bound and the sup bound are checked on every node
    (the continuum class asks for them on all of R^n; only lattice values are
    available here).  The Hoelder quotient and the negative off-diagonal scan
    use ``sample_count`` random triples plus all nearest-neighbour pairs.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    A.check_grid(grid)
    rng = np.random.default_rng(seed)
    M = grid.num_nodes
    pts = grid.points
    diag = A.diagonal(grid)

    i = rng.integers(0, M, sample_count)
    j = rng.integers(0, M, sample_count)
    z = rng.integers(0, M, sample_count)
    # nearest neighbours along the first axis resolve the small-scale modulus
    stride = grid.N ** (grid.dim - 1)
    nb_i = np.arange(M - stride)
    zz = rng.integers(0, M, nb_i.size)
    i = np.concatenate([i, nb_i])
    j = np.concatenate([j, nb_i + stride])
    z = np.concatenate([z, zz])

    vals_ij = A.pairs(grid, i, j)
    sup_abs = max(float(np.abs(vals_ij).max()), float(np.abs(diag).max()))
    if A.kind == "constant":
        sup_abs = abs(A.kappa)

    dist = np.linalg.norm(pts[i] - pts[j], axis=1)
    ok = dist > 0
    diff = np.abs(A.pairs(grid, z, i) - A.pairs(grid, z, j))
    quot = np.where(ok, diff / np.where(ok, dist, 1.0) ** A.claimed_alpha, 0.0)
    holder = float(quot.max(initial=0.0))

    neg = [(int(a), int(b), float(v)) for a, b, v in zip(i, j, vals_ij) if a != b and v < 0]

    report = CoefficientReport(float(diag.min()), sup_abs, holder, neg[:20])
    if diag.min() <= A.claimed_lambda:
        k = int(np.argmin(diag))
        report.violations.append(f"diagonal bound: A(x,x) = {diag[k]:.6g} <= lambda = {A.claimed_lambda:g} at node {k}")
    if sup_abs > 1.0 / A.claimed_lambda:
        report.violations.append(f"sup bound: |A| = {sup_abs:.6g} > 1/lambda = {1 / A.claimed_lambda:.6g}")
    if strict and report.violations:
        raise CoefficientError("; ".join(report.violations), report)
    return report


@dataclass(frozen=True)
class QuadratureSpec:
    """Lattice quadrature policy.

    ``periodic`` sums every pair over the torus with the kernel summed over
    all periodic images, matching the spectral operators exactly in
    geometry.  The free-space policies sum pairs inside the box and add an
    exterior term for ``y`` outside it: ``box-exterior`` integrates the
    exterior of the box exactly per node, ``analytic-diagonal-correction``
    uses the spherical average beyond ``tail_radius``, ``none`` drops it.
    """

    tail_policy: str = "periodic"
    tail_radius: float | None = None
    diagonal_policy: str = "omit"

    def __post_init__(self):
        if self.diagonal_policy != "omit":
            raise ValueError("only diagonal_policy='omit' is supported")
        if self.tail_policy not in TAIL_POLICIES:
            raise ValueError(f"tail_policy must be one of {TAIL_POLICIES}")

    @property
    def periodic(self) -> bool:
        return self.tail_policy == "periodic"

    def radius(self, grid: GridSpec) -> float:
        half_diag = 0.5 * grid.box_length * np.sqrt(grid.dim)
        R = half_diag if self.tail_radius is None else self.tail_radius
        if self.tail_policy == "analytic-diagonal-correction" and R < half_diag - 1e-12:
            raise ValueError("tail_radius must be at least half the box diagonal")
        return R


def _check_s(s):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def sphere_area(dim: int) -> float:
    """``omega_{n-1}``: 2 in 1D, 2 pi in 2D."""
    return 2.0 if dim == 1 else 2 * np.pi


@lru_cache(maxsize=32)
def tail_tensor(grid: GridSpec, s: float, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Per-node ``T(x) = int_{exterior} |x-y|^{-n-2s} e(x)e dy``, shape ``(M, dim, dim)``."""
    M, n = grid.num_nodes, grid.dim
    if quad.tail_policy in ("none", "periodic"):
        return np.zeros((M, n, n))
    if quad.tail_policy == "analytic-diagonal-correction":
        R = quad.radius(grid)
        val = sphere_area(n) / n * R ** (-2 * s) / (2 * s)
        return np.broadcast_to(val * np.eye(n), (M, n, n)).copy()
    lo, hi = grid.box_bounds
    pts = grid.points
    if n == 1:
        x = pts[:, 0]
        t = ((x - lo) ** (-2 * s) + (hi - x) ** (-2 * s)) / (2 * s)
        return t.reshape(M, 1, 1)
    return _box_exterior_2d(pts, lo, hi, s)


def _box_exterior_2d(pts, lo, hi, s, nodes=48):
    # along direction w the exterior starts at rho(theta); the radial integral is rho^{-2s}/(2s).
    # rho is smooth between the corner angles, so integrate panel by panel.
    g, w = np.polynomial.legendre.leggauss(nodes)
    out = np.zeros((len(pts), 2, 2))
    for k, (x, y) in enumerate(pts):
        corners = np.arctan2(np.array([lo - y, lo - y, hi - y, hi - y]), np.array([hi - x, lo - x, lo - x, hi - x]))
        br = np.sort(np.concatenate([corners, [-np.pi, np.pi]]))
        acc = np.zeros((2, 2))
        for a, b in zip(br[:-1], br[1:]):
            th = 0.5 * (b - a) * (g + 1) + a
            ww = 0.5 * (b - a) * w
            c, sn = np.cos(th), np.sin(th)
            with np.errstate(divide="ignore"):
                tx = np.where(c > 0, (hi - x) / c, np.where(c < 0, (lo - x) / c, np.inf))
                ty = np.where(sn > 0, (hi - y) / sn, np.where(sn < 0, (lo - y) / sn, np.inf))
            rho = np.minimum(tx, ty)
            f = ww * rho ** (-2 * s) / (2 * s)
            acc += np.array([[np.sum(f * c * c), np.sum(f * c * sn)], [np.sum(f * c * sn), np.sum(f * sn * sn)]])
        out[k] = acc
    return out


@lru_cache(maxsize=32)
def periodic_kernel(grid: GridSpec, s: float, image_radius: float = 24.0) -> np.ndarray:
    """``h^n sum_m K(z + mL) e(x)e`` over all periodic images, indexed by displacement ``z = d h``.

    Shape ``(dim, dim, *shape)`` in FFT index order; the ``d = 0`` entry is 0
    (image pairs of a node with itself carry no difference).  1D uses the
    Hurwitz zeta function; 2D sums images under a smooth cutoff at
    ``image_radius`` box lengths and integrates the rest, which converges
    faster than any power of the radius.
    """
    _check_s(s)
    N, n, L = grid.N, grid.dim, grid.box_length
    d = np.arange(N)
    if n == 1:
        w = d[1:] / N
        vals = np.zeros(N)
        vals[1:] = L ** (-1 - 2 * s) * (special.zeta(1 + 2 * s, w) + special.zeta(1 + 2 * s, 1 - w))
        return grid.cell_volume * vals.reshape(1, 1, N)
    R = image_radius * L
    M = int(np.ceil(R / L)) + 1
    m = np.arange(-M, M + 1) * L
    mx, my = np.meshgrid(m, m, indexing="ij")
    keep = np.hypot(mx, my) < R + L
    mx, my = mx[keep], my[keep]
    zx, zy = np.meshgrid(d * grid.h, d * grid.h, indexing="ij")
    out = np.zeros((2, 2, N, N))
    for ox, oy in zip(mx, my):
        wx, wy = zx + ox, zy + oy
        r = np.hypot(wx, wy)
        ok = (r > 0) & (r < R)
        rs = np.where(ok, r, 1.0)
        f = np.where(ok, rs ** (-4 - 2 * s) * smooth_cutoff(rs, R), 0.0)
        out[0, 0] += f * wx * wx
        out[0, 1] += f * wx * wy
        out[1, 1] += f * wy * wy
    out[1, 0] = out[0, 1]
    far = sphere_area(2) / 2 * _radial_far(s, R) / L**2
    out[0, 0] += far
    out[1, 1] += far
    out[:, :, 0, 0] = 0.0
    # enforce G(-z) = G(z) exactly; the image sums differ by rounding only
    flipped = np.roll(out[:, :, ::-1, ::-1], 1, axis=(2, 3))
    return grid.cell_volume * 0.5 * (out + flipped)


def _node_index(grid: GridSpec) -> np.ndarray:
    """Integer lattice index of each node, ``(M, dim)``."""
    return np.stack(np.unravel_index(np.arange(grid.num_nodes), grid.shape), axis=1)


def _pair_kernel(grid: GridSpec, rows: np.ndarray, s: float, quad: QuadratureSpec) -> np.ndarray:
    """Matrix weights ``G(x, y)`` for ``x`` in ``rows`` and all ``y``: shape ``(b, M, dim, dim)``."""
    if quad.periodic:
        G = periodic_kernel(grid, s)
        idx = _node_index(grid)
        dd = (idx[None, :, :] - idx[rows, None, :]) % grid.N
        sel = G[(slice(None), slice(None)) + tuple(dd[..., a] for a in range(grid.dim))]
        return np.moveaxis(sel, (0, 1), (-2, -1))
    pts = grid.points
    z = pts[None, :, :] - pts[rows, None, :]
    r = np.sqrt(np.sum(z**2, axis=-1))
    off = r > 0
    rs = np.where(off, r, 1.0)
    w = np.where(off, grid.cell_volume * rs ** (-grid.dim - 2 * s), 0.0)
    e = z / rs[..., None]
    return w[..., None, None] * e[..., :, None] * e[..., None, :]


def _chunks(M, dim=1, budget=2_000_000):
    step = max(1, budget // max(M * dim * dim, 1))
    for start in range(0, M, step):
        yield np.arange(start, min(M, start + step))


def apply_operator(A: Coefficient, s: float, u: VectorField, quad: QuadratureSpec = QuadratureSpec()) -> VectorField:
    """Dense ``O(M^2)`` matrix-free application of the pointwise operator."""
    _check_s(s)
    g = u.grid
    A.check_grid(g)
    M = g.num_nodes
    U = u.node_values()
    out = np.zeros((M, g.dim))
    allj = np.arange(M)
    for rows in _chunks(M, g.dim):
        G = _pair_kernel(g, rows, s, quad)
        a = A.pairs(g, rows[:, None], allj[None, :])
        diff = U[rows, None, :] - U[None, :, :]
        out[rows] = np.einsum("ij,ijkl,ijl->ik", a, G, diff)
    if not quad.periodic:
        T = tail_tensor(g, s, quad)
        out += A.diagonal(g)[:, None] * np.einsum("mij,mj->mi", T, U)
    return VectorField.from_flat(g, out.reshape(-1))


def bilinear_form(A: Coefficient, s: float, u: VectorField, v: VectorField, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Half the ordered-pair double sum with weights ``h^n G(x,y)`` and cell volume ``h^n``, plus the exterior term."""
    _check_s(s)
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    g = u.grid
    A.check_grid(g)
    M = g.num_nodes
    U, V = u.node_values(), v.node_values()
    allj = np.arange(M)
    total = 0.0
    for rows in _chunks(M, g.dim):
        G = _pair_kernel(g, rows, s, quad)
        a = A.pairs(g, rows[:, None], allj[None, :])
        du = U[None, :, :] - U[rows, None, :]
        dv = V[None, :, :] - V[rows, None, :]
        total += np.einsum("ij,ijk,ijkl,ijl->", a, du, G, dv)
    total *= 0.5 * g.cell_volume
    if not quad.periodic:
        T = tail_tensor(g, s, quad)
        total += g.cell_volume * np.sum(A.diagonal(g) * np.einsum("mi,mij,mj->m", U, T, V))
    return float(total)


def assemble_stiffness(A: Coefficient, s: float, grid: GridSpec, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Dense ``(M dim) x (M dim)`` matrix of the pointwise operator, node-major ordering.

    Built pair by pair; intended for small grids (at most 2048 nodes).
    """
    _check_s(s)
    A.check_grid(grid)
    M, n = grid.num_nodes, grid.dim
    if M > 2048:
        raise ValueError("dense assembly is limited to 2048 nodes")
    Ad = A.dense(grid)
    per = periodic_kernel(grid, s) if quad.periodic else None
    idx = _node_index(grid)
    pts = grid.points
    K = np.zeros((M, M, n, n))
    for i in range(M):
        for j in range(M):
            if i == j:
                continue
            if per is not None:
                d = tuple((idx[j] - idx[i]) % grid.N)
                Gij = per[(slice(None), slice(None)) + d]
            else:
                z = pts[j] - pts[i]
                r = np.linalg.norm(z)
                Gij = grid.cell_volume * r ** (-n - 2 * s) * np.outer(z, z) / r**2
            K[i, j] = Ad[i, j] * Gij
    blocks = -K
    T = tail_tensor(grid, s, quad)
    diag = A.diagonal(grid)
    for i in range(M):
        blocks[i, i] = K[i].sum(axis=0) + diag[i] * T[i]
    return blocks.transpose(0, 2, 1, 3).reshape(M * n, M * n)


# -- FFT fast path for separable coefficients ----------------------------------


@lru_cache(maxsize=16)
def _kernel_hat(grid: GridSpec, s: float, periodic: bool) -> np.ndarray:
    """FFT of the matrix kernel: circular on the torus, or on ``2N`` zero-padded displacements."""
    n = grid.dim
    axes = tuple(range(2, 2 + n))
    if periodic:
        return np.fft.fftn(periodic_kernel(grid, s), axes=axes)
    N, h = grid.N, grid.h
    m = np.fft.fftfreq(2 * N, d=1.0 / (2 * N))  # wrap-around order of displacements
    Z = np.stack(np.meshgrid(*([m * h] * n), indexing="ij"))
    r = np.sqrt(np.sum(Z**2, axis=0))
    off = r > 0
    rs = np.where(off, r, 1.0)
    w = np.where(off, grid.cell_volume * rs ** (-n - 2 * s), 0.0)
    E = Z / rs
    G = w[None, None] * E[:, None] * E[None, :]
    return np.fft.fftn(G, axes=axes)


def _convolve(grid: GridSpec, Ghat: np.ndarray, f: np.ndarray, matrix_out: bool, periodic: bool) -> np.ndarray:
    """Lattice convolution ``sum_y G(x-y) f(y)`` (circular, or aperiodic over the box).

    ``f`` is scalar ``(*shape)`` when ``matrix_out`` (returns ``(dim, dim, *shape)``),
    otherwise a vector field ``(dim, *shape)``.
    """
    n, N = grid.dim, grid.N
    pad = (N if periodic else 2 * N,) * n
    sl = (slice(0, N),) * n
    if matrix_out:
        fh = np.fft.fftn(f, s=pad, axes=tuple(range(n)))
        out = np.fft.ifftn(Ghat * fh, axes=tuple(range(2, 2 + n)))
        return out.real[(slice(None), slice(None)) + sl]
    fh = np.fft.fftn(f, s=pad, axes=tuple(range(1, 1 + n)))
    out = np.fft.ifftn(np.einsum("ij...,j...->i...", Ghat, fh), axes=tuple(range(1, 1 + n)))
    return out.real[(slice(None),) + sl]


def separable_fast_apply(a, s: float, u: VectorField, quad: QuadratureSpec = QuadratureSpec()) -> VectorField:
    """``O(N^n log N)`` application for ``A(x,y) = (a(x) + a(y))/2``.

    ``L u = a/2 [ (G*1) u - G*u ] + 1/2 [ (G*a) u - G*(a u) ] + a T u``,
    with ``*`` the lattice convolution against the matrix kernel ``G``.
    """
    _check_s(s)
    g = u.grid
    if isinstance(a, Coefficient):
        if a.kind == "general":
            raise ValueError("fast path needs a separable (or constant) coefficient")
        a = np.full(g.shape, a.kappa) if a.kind == "constant" else a.a.reshape(g.shape)
    else:
        a = np.asarray(a, dtype=float).reshape(g.shape)
    per = quad.periodic
    Ghat = _kernel_hat(g, s, per)
    U = u.values
    conv = lambda f, mat: _convolve(g, Ghat, f, mat, per)
    mv = lambda Mx, V: np.einsum("ij...,j...->i...", Mx, V)
    out = 0.5 * a[None] * (mv(conv(np.ones(g.shape), True), U) - conv(U, False))
    out += 0.5 * (mv(conv(a, True), U) - conv(a[None] * U, False))
    if not per:
        T = tail_tensor(g, s, quad)
        Tu = np.einsum("mij,mj->mi", T, u.node_values()).T.reshape(U.shape)
        out += a[None] * Tu
    return VectorField(g, out)


# -- derived quantities ----------------------------------------------------------


def energy(A: Coefficient, s: float, u: VectorField, f: VectorField, quad: QuadratureSpec = QuadratureSpec()) -> float:
    return 0.5 * bilinear_form(A, s, u, u, quad) - f.dot(u)


def projected_seminorm(u: VectorField, s: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Squared projected-difference seminorm ``B_1(u, u)``, evaluated with the FFT path."""
    return separable_fast_apply(Coefficient.constant(1.0), s, u, quad).dot(u)


def gagliardo_seminorm(u: VectorField, s: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Squared full vector ``H^s`` seminorm on the same lattice with the same conventions.

    The projection ``e(x)e`` is replaced by the identity, i.e. the kernel by
    its trace ``k``; the double sum collapses to
    ``h^n sum_x [(k*1)(x) |u(x)|^2 - u(x).(k*u)(x)]``.
    """
    _check_s(s)
    g = u.grid
    per = quad.periodic
    Ghat = _kernel_hat(g, s, per)
    khat = np.trace(Ghat, axis1=0, axis2=1)[None, None]
    U = u.values
    k1 = _convolve(g, khat, np.ones(g.shape), True, per)[0, 0]
    ku = np.stack([_convolve(g, khat, U[i], True, per)[0, 0] for i in range(g.dim)])
    total = np.sum(k1 * np.sum(U * U, axis=0)) - np.sum(U * ku)
    if not per:
        T = tail_tensor(g, s, quad)
        total += np.sum(np.trace(T, axis1=1, axis2=2) * np.sum(u.node_values() ** 2, axis=1))
    return float(g.cell_volume * total)


def gagliardo_seminorm_dense(u: VectorField, s: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Pair-by-pair version of :func:`gagliardo_seminorm` (reference for small grids)."""
    _check_s(s)
    g = u.grid
    U = u.node_values()
    total = 0.0
    for rows in _chunks(g.num_nodes, g.dim):
        k = np.trace(_pair_kernel(g, rows, s, quad), axis1=-2, axis2=-1)
        d = U[None, :, :] - U[rows, None, :]
        total += np.sum(k * np.sum(d * d, axis=-1))
    total *= 0.5 * g.cell_volume
    if not quad.periodic:
        T = tail_tensor(g, s, quad)
        total += g.cell_volume * np.sum(np.trace(T, axis1=1, axis2=2) * np.sum(U * U, axis=1))
    return float(total)


def lattice_symbol(grid: GridSpec, s: float) -> np.ndarray:
    """Per-mode matrix symbol of the periodic constant-coefficient operator, ``(dim, dim, *shape)``.

    ``S(xi) = sum_z G(z) (1 - cos 2 pi xi.z)``; plane waves are exact eigenfunctions on the torus.
    """
    G = periodic_kernel(grid, s)
    axes = tuple(range(2, 2 + grid.dim))
    Ghat = np.fft.fftn(G, axes=axes).real
    zero = Ghat[(slice(None), slice(None)) + (0,) * grid.dim]
    return zero.reshape(zero.shape + (1,) * grid.dim) - Ghat


def lattice_plane_wave_response(dim: int, s: float, xi, h: float, radius: float = 8.0) -> np.ndarray:
    """Lattice quadrature of ``int |z|^{-n-2s} e(x)e (1 - cos 2 pi xi.z) dz`` on ``h Z^n``.

    The oscillatory part is tapered by a smooth cutoff at ``radius`` (its
    remainder decays faster than any power); the non-oscillatory part beyond
    the cutoff is integrated radially.  The diagonal lattice point is omitted.
    Returns the ``dim x dim`` response matrix.
    """
    _check_s(s)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    m = int(np.ceil(radius / h))
    ax = np.arange(-m, m + 1) * h
    if dim == 1:
        z = ax[ax > 0]
        r = z
        K = h * r ** (-1 - 2 * s)
        cut = smooth_cutoff(r, radius)
        vals = K * (cut - cut * np.cos(2 * np.pi * xi[0] * z))
        resp = 2 * np.sum(vals)  # +z and -z
        far = _radial_far(s, radius)
        return np.array([[resp + sphere_area(1) * far]])
    out = np.zeros((2, 2))
    for x0 in ax:
        y = ax
        r = np.sqrt(x0**2 + y**2)
        keep = (r > 0) & (r < radius)
        r, y2 = r[keep], y[keep]
        e = np.stack([np.full_like(r, x0), y2]) / r
        cut = smooth_cutoff(r, radius)
        K = h * h * r ** (-2 - 2 * s) * cut * (1 - np.cos(2 * np.pi * (xi[0] * x0 + xi[1] * y2)))
        out += np.einsum("k,ik,jk->ij", K, e, e)
    far = _radial_far(s, radius)
    return out + sphere_area(2) / 2 * far * np.eye(2)


def extrapolated_plane_wave_response(dim: int, s: float, xi, h: float, radius: float = 8.0) -> np.ndarray:
    """Richardson combination of spacings ``h`` and ``h/2``.

    The leading lattice error of the omitted-diagonal sum scales like ``h^{2-2s}``.
    """
    coarse = lattice_plane_wave_response(dim, s, xi, h, radius)
    fine = lattice_plane_wave_response(dim, s, xi, h / 2, radius)
    w = 2.0 ** (2 - 2 * s)
    return (w * fine - coarse) / (w - 1)


def _radial_far(s, R):
    """``int_0^inf (1 - cutoff(r/R)) r^{-1-2s} dr``."""
    mid, _ = integrate.quad(lambda r: (1 - smooth_cutoff(r, R)) * r ** (-1 - 2 * s), R / 2, R, epsabs=0, epsrel=1e-13)
    return mid + R ** (-2 * s) / (2 * s)


# -- coefficient table files ---------------------------------------------------


def write_coefficient_table(path, A: Coefficient, grid: GridSpec):
    """Text table: header ``n N L alpha lambda Lambda`` then ``i j value`` per unordered pair."""
    T = A.dense(grid)
    iu, ju = np.triu_indices(grid.num_nodes)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{grid.dim} {grid.N} {grid.box_length!r} {A.claimed_alpha!r} {A.claimed_lambda!r} {A.claimed_Lambda!r}\n")
        for i, j in zip(iu, ju):
            fh.write(f"{i} {j} {float(T[i, j])!r}\n")


def read_coefficient_table(path, support_fraction: float = 0.5) -> tuple[GridSpec, Coefficient]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise ValueError("coefficient table header must be 'n N L alpha lambda Lambda'")
        n, N = int(header[0]), int(header[1])
        L, alpha, lam, Lam = (float(v) for v in header[2:])
        grid = GridSpec(n, N, L, support_fraction)
        M = grid.num_nodes
        table = np.full((M, M), np.nan)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'i j value'")
            i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
            table[i, j] = table[j, i] = val
    if np.isnan(table).any():
        raise ValueError("coefficient table does not cover every unordered node pair")
    return grid, Coefficient("general", table=table, claimed_alpha=alpha, claimed_lambda=lam, claimed_Lambda=Lam)
