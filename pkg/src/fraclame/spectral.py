"""Fourier-multiplier operators on the padded torus.

Transform convention: ``F(u)(xi) = int exp(-2 pi i x.xi) u(x) dx`` with
``xi = k/L``, approximated by ``h^n * sum_j u(x_j) exp(-2 pi i x_j.xi)``.
Every multiplier is therefore a function of ``2 pi |xi|``.

Zero mode: negative-order and degree-0 multipliers map it to 0 and set
``dropped_mode`` on the output when the input carried a nonzero mean.
In 2D the matrix symbols ``xi (x) xi / |xi|^2`` are ambiguous on the
Nyquist lines (the sign of the ``N/2`` component is not determined), so
matrix-symbol operators treat those modes like the zero mode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .grid import GridSpec, VectorField

__all__ = [
    "SpectralField",
    "LameSymbolConstants",
    "forward_transform",
    "inverse_transform",
    "frac_laplacian",
    "riesz_potential",
    "riesz_transform",
    "riesz_matrix_apply",
    "remove_dropped_modes",
    "spectral_refine",
    "vector_frac_laplacian",
    "lame_multiplier_apply",
    "lame_multiplier_solve",
    "lame_symbol",
    "derive_ell_constants",
    "radial_constant",
]


@dataclass
class SpectralField:
    grid: GridSpec
    coefficients: np.ndarray  # (dim, *shape), FFT order

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        c = self.coefficients
        axes = tuple(range(1, c.ndim))
        flipped = np.roll(np.flip(c, axis=axes), 1, axis=axes)
        scale = max(np.abs(c).max(), 1e-300)
        return bool(np.abs(c - flipped.conj()).max() <= rtol * scale)

    def l2_norm(self) -> float:
        """Discrete Plancherel norm; equals the grid L2 norm of the field."""
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)) / self.grid.box_length ** (self.grid.dim / 2))


def _phase(grid: GridSpec) -> np.ndarray:
    # node j sits at (j - N/2) h
    idx = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    ph = np.exp(1j * np.pi * idx)  # exp(-2 pi i (-N/2) k / N)
    out = np.ones(grid.shape, dtype=complex)
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.N
        out = out * ph.reshape(shape)
    return out


def forward_transform(field: VectorField) -> SpectralField:
    g = field.grid
    axes = tuple(range(1, g.dim + 1))
    coeffs = np.fft.fftn(field.values, axes=axes) * _phase(g) * g.cell_volume
    return SpectralField(g, coeffs)


def inverse_transform(spec: SpectralField, real: bool = True, rtol: float = 1e-10) -> VectorField:
    g = spec.grid
    if real and not spec.is_hermitian(rtol):
        raise ValueError("coefficients are not Hermitian-symmetric; no real field represents them")
    axes = tuple(range(1, g.dim + 1))
    vals = np.fft.ifftn(spec.coefficients / (_phase(g) * g.cell_volume), axes=axes)
    return VectorField(g, vals.real)


# -- symbols -------------------------------------------------------------------


def _radial(grid: GridSpec) -> np.ndarray:
    """``2 pi |xi|`` on the FFT grid."""
    return 2 * np.pi * np.sqrt(np.sum(grid.frequencies**2, axis=0))


def _unit_outer(grid: GridSpec) -> np.ndarray:
    """``xi_hat (x) xi_hat``, shape ``(dim, dim, *shape)``; zero at the dropped modes."""
    xi = grid.frequencies
    r2 = np.sum(xi**2, axis=0)
    safe = np.where(r2 > 0, r2, 1.0)
    P = xi[:, None] * xi[None, :] / safe
    P[..., r2 == 0] = 0.0
    if grid.dim > 1:
        P[..., grid.nyquist] = 0.0
    return P


def _matrix_dropped(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[(0,) * grid.dim] = True
    if grid.dim > 1:
        mask |= grid.nyquist
    return mask


def _apply_scalar(field: VectorField, symbol: np.ndarray, dropped: np.ndarray | None = None) -> VectorField:
    g = field.grid
    axes = tuple(range(1, g.dim + 1))
    spec = np.fft.fftn(field.values, axes=axes)
    out = np.fft.ifftn(spec * symbol, axes=axes).real
    flag = field.dropped_mode
    if dropped is not None:
        flag = flag or _carries(spec, dropped)
    return VectorField(g, out, dropped_mode=flag)


def _apply_matrix(field: VectorField, symbol: np.ndarray, dropped: np.ndarray) -> VectorField:
    g = field.grid
    axes = tuple(range(1, g.dim + 1))
    spec = np.fft.fftn(field.values, axes=axes)
    out = np.einsum("ij...,j...->i...", symbol, spec)
    vals = np.fft.ifftn(out, axes=axes).real
    return VectorField(g, vals, dropped_mode=field.dropped_mode or _carries(spec, dropped))


def _carries(spec: np.ndarray, dropped: np.ndarray) -> bool:
    scale = max(np.abs(spec).max(), 1e-300)
    return bool(np.abs(spec[:, dropped]).max(initial=0.0) > 1e-12 * scale)


def _power(grid: GridSpec, t: float) -> np.ndarray:
    r = _radial(grid)
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** t
    return out


def _zero_mode(grid: GridSpec) -> np.ndarray:
    m = np.zeros(grid.shape, dtype=bool)
    m[(0,) * grid.dim] = True
    return m


# -- operators -----------------------------------------------------------------


def frac_laplacian(field: VectorField, t: float) -> VectorField:
    """``(-Delta)^{t/2}``: componentwise multiplier ``(2 pi |xi|)^t``."""
    if not 0 < t < 2:
        raise ValueError(f"order t must lie in (0, 2), got {t}")
    return _apply_scalar(field, _power(field.grid, t))


def riesz_potential(field: VectorField, t: float) -> VectorField:
    """``I^t = (-Delta)^{-t/2}``; the zero mode is dropped and flagged."""
    if not 0 < t < 2:
        raise ValueError(f"order t must lie in (0, 2), got {t}")
    return _apply_scalar(field, _power(field.grid, -t), _zero_mode(field.grid))


def riesz_transform(field: VectorField, j: int) -> VectorField:
    """Scalar Riesz transform ``R_j`` (symbol ``i xi_j/|xi|``) applied componentwise."""
    g = field.grid
    xi = g.frequencies
    r = np.sqrt(np.sum(xi**2, axis=0))
    sym = np.where(r > 0, 1j * xi[j] / np.where(r > 0, r, 1.0), 0.0)
    dropped = _zero_mode(g) | g.nyquist
    sym[dropped] = 0.0
    g_axes = tuple(range(1, g.dim + 1))
    spec = np.fft.fftn(field.values, axes=g_axes)
    vals = np.fft.ifftn(spec * sym, axes=g_axes).real
    return VectorField(g, vals, dropped_mode=field.dropped_mode or _carries(spec, dropped))


def riesz_matrix_apply(field: VectorField) -> VectorField:
    """``(R (x) R) u`` with symbol ``-xi_hat (x) xi_hat``."""
    g = field.grid
    return _apply_matrix(field, -_unit_outer(g), _matrix_dropped(g))


@dataclass(frozen=True)
class LameSymbolConstants:
    """Constants of ``(2 pi|xi|)^{2s} (ell1 I + ell2 xi_hat (x) xi_hat)``."""

    ell1: float
    ell2: float
    provenance: str = "user-supplied"
    convergence: float | None = None

    def __post_init__(self):
        if not self.ell1 > 0:
            raise ValueError("ell1 must be positive")
        if self.ell2 < 0:
            raise ValueError("ell2 must be nonnegative")

    @property
    def c(self) -> float:
        """Lame parameter of ``I + c R(x)R`` after factoring out ``ell1``."""
        return -self.ell2 / self.ell1


def vector_frac_laplacian(field: VectorField, s: float, consts: LameSymbolConstants) -> VectorField:
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    g = field.grid
    sym = consts.ell1 * np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim) + consts.ell2 * _unit_outer(g)
    sym = sym * _power(g, 2 * s)
    return _apply_matrix(field, sym, _zero_mode(g))


def lame_symbol(xi: np.ndarray, c: float) -> np.ndarray:
    """Per-frequency matrix ``I - c xi_hat (x) xi_hat`` for a batch ``(m, dim)`` of nonzero ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    hat = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    return np.eye(xi.shape[1])[None] - c * hat[:, :, None] * hat[:, None, :]


def _check_c(c: float):
    if c == 1:
        raise ValueError("c = 1 makes the Lame symbol singular")


def lame_multiplier_apply(field: VectorField, c: float) -> VectorField:
    """``U + c (R(x)R) U``, symbol ``I - c xi_hat (x) xi_hat``."""
    _check_c(c)
    g = field.grid
    eye = np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim)
    sym = eye - c * _unit_outer(g)
    sym = sym * np.where(_matrix_dropped(g) & (g.dim > 1), 0.0, 1.0)
    return _apply_matrix(field, sym, _matrix_dropped(g) if g.dim > 1 else np.zeros(g.shape, bool))


def lame_multiplier_solve(field: VectorField, c: float) -> VectorField:
    """Inverse of :func:`lame_multiplier_apply`: ``I + c/(1-c) xi_hat (x) xi_hat``."""
    _check_c(c)
    g = field.grid
    eye = np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim)
    sym = eye + (c / (1.0 - c)) * _unit_outer(g)
    if g.dim > 1:
        sym = sym * np.where(_matrix_dropped(g), 0.0, 1.0)
        return _apply_matrix(field, sym, _matrix_dropped(g))
    return _apply_matrix(field, sym, np.zeros(g.shape, bool))


def remove_dropped_modes(field: VectorField, matrix: bool = True) -> VectorField:
    """Zero the modes every multiplier here discards (zero mode; in 2D also Nyquist lines if ``matrix``)."""
    g = field.grid
    mask = _matrix_dropped(g) if matrix else _zero_mode(g)
    axes = tuple(range(1, g.dim + 1))
    spec = np.fft.fftn(field.values, axes=axes)
    spec[:, mask] = 0.0
    return VectorField(g, np.fft.ifftn(spec, axes=axes).real, dropped_mode=field.dropped_mode or _carries(spec, mask))


def spectral_refine(field: VectorField, factor: int = 2) -> VectorField:
    """Band-limited interpolation onto ``grid.refine(factor)`` by Fourier zero padding.

    Coarse nodes are kept exactly (they are every ``factor``-th fine node).
    The Nyquist coefficient is split evenly between ``+-N/2``.
    """
    g = field.grid
    G = g.refine(factor)
    axes = tuple(range(1, g.dim + 1))
    spec = np.fft.fftshift(np.fft.fftn(field.values, axes=axes), axes=axes)
    extra = (G.N - g.N) // 2
    padded = np.pad(spec, [(0, 0)] + [(extra, extra)] * g.dim)
    vals = np.fft.ifftn(np.fft.ifftshift(padded, axes=axes), axes=axes).real * factor**g.dim
    return VectorField(G, vals, dropped_mode=field.dropped_mode)


# -- constants of the vector fractional Laplacian ------------------------------


def radial_constant(s: float, limit: int = 200) -> float:
    """``J(s) = int_0^inf (1 - cos r) r^{-1-2s} dr`` by adaptive quadrature.

    Split at ``r = 1``; the oscillatory tail uses QUADPACK's Fourier integrator.
    """
    a = 2 * s
    # 1 - cos r = 2 sin^2(r/2) avoids cancellation near 0
    near, _ = integrate.quad(lambda r: 2 * np.sin(r / 2) ** 2 * r ** (-1 - a), 0.0, 1.0, limit=limit, epsabs=0, epsrel=1e-13)
    far_cos, _ = integrate.quad(lambda r: r ** (-1 - a), 1.0, np.inf, weight="cos", wvar=1.0, limlst=100)
    return near + 1.0 / a - far_cos


def _angular(s: float, nodes: int) -> tuple[float, float]:
    """2D angular moments ``int cos^2|cos|^{2s}`` and ``int sin^2|cos|^{2s}`` over the circle.

    Panel ``[0, pi/4]`` uses Gauss-Legendre; on ``[pi/4, pi/2]`` the factor
    ``cos(theta)^{2s} = sin(phi)^{2s}``, ``phi = pi/2 - theta``, is handled with
    Gauss-Jacobi weight ``phi^{2s}`` so the remaining integrand is smooth.
    """
    a = 2 * s
    x, w = np.polynomial.legendre.leggauss(nodes)
    th = np.pi / 8 * (x + 1)
    w = np.pi / 8 * w
    c = np.cos(th) ** a
    longi = np.sum(w * np.cos(th) ** 2 * c)
    trans = np.sum(w * np.sin(th) ** 2 * c)

    xj, wj = special.roots_jacobi(nodes, 0.0, a)
    phi = np.pi / 8 * (xj + 1)
    # d(theta) phi^a = (pi/8)^{1+a} (1+x)^a dx
    wj = wj * (np.pi / 8) ** (1 + a)
    smooth = (np.sin(phi) / phi) ** a
    longi += np.sum(wj * smooth * np.sin(phi) ** 2)
    trans += np.sum(wj * smooth * np.cos(phi) ** 2)
    return 4 * longi, 4 * trans


def derive_ell_constants(dim: int, s: float, resolution: int = 64, tol: float = 1e-10) -> LameSymbolConstants:
    """Numerically derive ``ell1, ell2`` for the kernel ``|z|^{-n-2s} z(x)z/|z|^2``.

    Acting on ``e exp(2 pi i xi.x)`` the kernel gives
    ``int |z|^{-n-2s} (z_hat.e) z_hat (1 - cos(2 pi xi.z)) dz``; scaling
    ``r -> r / (2 pi |xi|)`` separates a radial factor ``J(s)`` from angular
    moments of ``z_hat (x) z_hat |z_hat . xi_hat|^{2s}``.  The angular part is
    computed with ``resolution`` and ``2*resolution`` Gauss nodes; their
    relative difference is stored as ``convergence``.
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    J = radial_constant(s)
    if dim == 1:
        # projection is the identity in 1D: the split is degenerate, take ell2 = 0
        return LameSymbolConstants(2.0 * J, 0.0, provenance="derived-by-quadrature", convergence=0.0)
    lo = _angular(s, resolution)
    hi = _angular(s, 2 * resolution)
    conv = max(abs(a - b) / abs(b) for a, b in zip(lo, hi))
    if conv > tol:
        raise RuntimeError(f"angular quadrature not converged: relative change {conv:.2e} > {tol:.0e}")
    longi, trans = hi
    ell1 = J * trans
    ell2 = J * (longi - trans)
    return LameSymbolConstants(ell1, ell2, provenance="derived-by-quadrature", convergence=conv)
