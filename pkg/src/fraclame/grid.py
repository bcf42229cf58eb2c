"""Periodic padded lattice and the vector fields that live on it.

Nodes sit at ``x_j = (j - N/2) h`` with ``h = L/N``, so the origin is node
``N/2`` and the box is centered.  Fields of interest are supported in the
central sub-box of relative size ``support_fraction``; the rest is padding.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    dim: int
    points_per_dim: int
    box_length: float = 1.0
    support_fraction: float = 0.5

    def __post_init__(self):
        n = self.points_per_dim
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if not 0 < self.support_fraction <= 1:
            raise ValueError("support_fraction must lie in (0, 1]")
        cells = self.support_fraction * n
        if abs(cells - round(cells)) > 1e-9:
            raise ValueError("support_fraction * N must be an integer number of cells")

    @property
    def N(self) -> int:
        return self.points_per_dim

    @property
    def h(self) -> float:
        return self.box_length / self.points_per_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.points_per_dim**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.h

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, *shape)``."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates as a ``(num_nodes, dim)`` array in row-major order."""
        return self.coords.reshape(self.dim, -1).T.copy()

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Frequencies ``xi = k/L`` in FFT order, shape ``(dim, *shape)``."""
        k = np.fft.fftfreq(self.N, d=self.h)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def nyquist(self) -> np.ndarray:
        """Boolean mask of modes with some component at index ``-N/2``."""
        idx = np.fft.fftfreq(self.N, d=1.0 / self.N)
        ny = idx == -self.N // 2
        masks = np.meshgrid(*([ny] * self.dim), indexing="ij")
        return np.logical_or.reduce(masks)

    @property
    def box_bounds(self) -> tuple[float, float]:
        """Lower/upper edge of the cell-centered box along every axis."""
        lo = self.axis[0] - self.h / 2
        return lo, lo + self.box_length

    def support_mask(self) -> np.ndarray:
        half = 0.5 * self.support_fraction * self.box_length
        return np.all(np.abs(self.coords) < half - 1e-12 * self.box_length, axis=0)

    def ball_mask(self, radius: float) -> np.ndarray:
        return np.sqrt(np.sum(self.coords**2, axis=0)) < radius

    def refine(self, factor: int = 2) -> "GridSpec":
        return replace(self, points_per_dim=self.points_per_dim * factor)


@dataclass
class VectorField:
    """``dim``-component real field; ``values`` has shape ``(dim, *grid.shape)``."""

    grid: GridSpec
    values: np.ndarray
    dropped_mode: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.dim, *self.grid.shape)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, np.zeros((grid.dim, *grid.shape)))

    @classmethod
    def from_flat(cls, grid: GridSpec, flat) -> "VectorField":
        """Inverse of :meth:`flat` (node-major, component-minor)."""
        arr = np.asarray(flat, dtype=float).reshape(grid.num_nodes, grid.dim)
        return cls(grid, arr.T.reshape(grid.dim, *grid.shape))

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.grid.dim, -1).T.reshape(-1).copy()

    def node_values(self) -> np.ndarray:
        """``(num_nodes, dim)`` view used by the real-space kernels."""
        return self.values.reshape(self.grid.dim, -1).T

    def with_values(self, values, **kw) -> "VectorField":
        return VectorField(self.grid, values, **kw)

    def _check(self, other: "VectorField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.with_values(self.values - other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, a):
        return self.with_values(a * self.values)

    __rmul__ = __mul__

    def dot(self, other: "VectorField") -> float:
        """Grid inner product ``h^n sum u.v``."""
        self._check(other)
        return float(np.vdot(self.values, other.values)) * self.grid.cell_volume

    def norm(self, p: float = 2.0, region: np.ndarray | None = None) -> float:
        """Grid ``L^p`` norm ``(h^n sum |u|^p)^(1/p)`` of the pointwise Euclidean length."""
        mag = np.sqrt(np.sum(self.values**2, axis=0))
        if region is not None:
            if not np.any(region):
                raise ValueError("empty region")
            mag = mag[region]
        if np.isinf(p):
            return float(mag.max())
        return float((self.grid.cell_volume * np.sum(mag**p)) ** (1.0 / p))

    def component_means(self) -> np.ndarray:
        return self.values.reshape(self.grid.dim, -1).mean(axis=1)

    def is_mean_zero(self) -> bool:
        sums = self.values.reshape(self.grid.dim, -1).sum(axis=1)
        scale = max(1.0, float(np.abs(self.values).max()))
        return bool(np.all(np.abs(sums) <= 1e-12 * self.grid.num_nodes * scale))

    def mean_free(self) -> "VectorField":
        shape = (self.grid.dim,) + (1,) * self.grid.dim
        return self.with_values(self.values - self.component_means().reshape(shape))

    def restricted(self, mask: np.ndarray) -> "VectorField":
        return self.with_values(self.values * mask)


# -- field factories ---------------------------------------------------------


def bump(grid: GridSpec, radius: float | None = None) -> np.ndarray:
    """Smooth compactly supported window equal to 1 near the origin.

    Defaults to vanishing outside the support sub-box.
    """
    if radius is None:
        radius = 0.5 * grid.support_fraction * grid.box_length
    out = np.ones(grid.shape)
    for x in grid.coords:
        out *= _smooth_step(1.0 - np.abs(x) / radius)
    return out


def _smooth_step(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    f = lambda v: np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
    a, b = f(t), f(1.0 - t)
    return a / (a + b)


def smooth_cutoff(r, R):
    """Radial cutoff: 1 for ``r <= R/2``, 0 for ``r >= R``, smooth between."""
    return _smooth_step(2.0 * (1.0 - np.asarray(r) / R))


def plane_wave(grid: GridSpec, k, amplitude, phase: float = 0.0) -> VectorField:
    """``amplitude * cos(2 pi k.x / L + phase)`` with integer wave vector ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    amp = np.atleast_1d(np.asarray(amplitude, dtype=float))
    arg = 2 * np.pi * np.tensordot(k, grid.coords, axes=1) / grid.box_length + phase
    vals = amp.reshape((grid.dim,) + (1,) * grid.dim) * np.cos(arg)
    return VectorField(grid, vals)


def random_band_limited(
    grid: GridSpec,
    rng: np.random.Generator,
    kmax: int | None = None,
    mean_zero: bool = True,
    dim_out: int | None = None,
) -> VectorField:
    """Random real field with Fourier content only at ``|k_j| <= kmax``."""
    if kmax is None:
        kmax = grid.N // 4
    dim_out = grid.dim if dim_out is None else dim_out
    idx = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    keep = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.N
        keep = keep & (np.abs(idx) <= kmax).reshape(shape)
    vals = np.empty((dim_out, *grid.shape))
    for c in range(dim_out):
        noise = rng.standard_normal(grid.shape)
        spec = np.fft.fftn(noise) * keep
        if mean_zero:
            spec[(0,) * grid.dim] = 0.0
        vals[c] = np.fft.ifftn(spec).real
    return VectorField(grid, vals)


def random_compact(grid: GridSpec, rng: np.random.Generator, kmax: int = 6) -> VectorField:
    """Smooth random field supported in the support sub-box."""
    base = random_band_limited(grid, rng, kmax=kmax, mean_zero=False)
    return base.with_values(base.values * bump(grid))
