"""Independent reference computations used by the tests.

Nothing here calls into fraclame's numerical kernels: each oracle is a
brute-force or closed-form evaluation built from numpy/scipy primitives.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate, special


def image_sum_kernel_1d(N: int, L: float, s: float, images: int = 4000) -> np.ndarray:
    """Periodized ``h |z|^{-1-2s}`` by direct image summation plus an integral tail."""
    h = L / N
    d = np.arange(N) * h
    out = np.zeros(N)
    for m in range(-images, images + 1):
        z = np.abs(d + m * L)
        with np.errstate(divide="ignore"):
            out += np.where(z > 0, z ** (-1 - 2 * s), 0.0)
    # both far tails, each approximated by the midpoint integral beyond (images + 1/2) L
    R = (images + 0.5) * L
    out += 2 * R ** (-2 * s) / (2 * s * L)
    out[0] = 0.0
    return h * out


def radial_integral(s: float) -> float:
    """``int_0^inf (1 - cos r) r^{-1-2s} dr`` by adaptive quadrature."""
    head, _ = integrate.quad(lambda r: (1 - np.cos(r)) * r ** (-1 - 2 * s), 0, 1, limit=200)
    mid = integrate.quad(lambda r: r ** (-1 - 2 * s), 1, np.inf)[0]
    osc = integrate.quad(lambda r: r ** (-1 - 2 * s), 1, np.inf, weight="cos", wvar=1.0)[0]
    return head + mid - osc


def symbol_constants(dim: int, s: float) -> tuple[float, float]:
    """``(ell1, ell2)`` of ``int (1 - cos 2 pi xi.z) z_hat z_hat^T |z|^{-n-2s} dz`` at ``|xi| = 1/(2 pi)``."""
    J = radial_integral(s)
    if dim == 1:
        return 2 * J, 0.0
    trans = integrate.quad(lambda t: abs(np.cos(t)) ** (2 * s) * np.sin(t) ** 2, 0, 2 * np.pi, limit=200)[0]
    longi = integrate.quad(lambda t: abs(np.cos(t)) ** (2 * s) * np.cos(t) ** 2, 0, 2 * np.pi, limit=200)[0]
    return J * trans, J * (longi - trans)


def closed_form_ell_1d(s: float) -> float:
    return np.pi / (special.gamma(1 + 2 * s) * np.sin(np.pi * s))


def dft_matrices(N: int, L: float):
    """Explicit forward DFT matrix and frequencies ``k/L`` for a 1D grid."""
    j = np.arange(N)
    F = np.exp(-2j * np.pi * np.outer(j, j) / N)
    k = np.where(j <= N // 2 - 1, j, j - N).astype(float)
    k[N // 2] = N // 2 - N
    return F, k / L


def dense_d2_1d(a: np.ndarray, u: np.ndarray, phi: np.ndarray, s1: float, s2: float, L: float) -> float:
    """``h <[R R, a] (-Delta)^{s1/2} u, (-Delta)^{s2/2} phi>`` with explicit matrices (1D, one component)."""
    N = u.size
    h = L / N
    F, xi = dft_matrices(N, L)
    Finv = F.conj().T / N
    lap = lambda t: (Finv @ np.diag(np.abs(2 * np.pi * xi) ** t) @ F).real
    RR = (Finv @ np.diag(np.where(xi != 0, -1.0, 0.0)) @ F).real
    U, V = lap(s1) @ u, lap(s2) @ phi
    A = np.diag(a)
    return float(h * V @ ((RR @ A - A @ RR) @ U))


def dense_riesz_1d(N: int, L: float):
    F, xi = dft_matrices(N, L)
    Finv = F.conj().T / N
    return (Finv @ np.diag(np.where(xi != 0, -1.0, 0.0)) @ F).real


def brute_force_operator(coef: np.ndarray, kernel_fn, points: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``Lu(x_i) = sum_{j != i} A_ij G(x_i - x_j)(u_i - u_j)`` by explicit double loop (small grids)."""
    M, dim = u.shape
    out = np.zeros_like(u)
    for i in range(M):
        for j in range(M):
            if i != j:
                out[i] += coef[i, j] * kernel_fn(points[i] - points[j]) @ (u[i] - u[j])
    return out


def dense_d2_2d(a: np.ndarray, u: np.ndarray, phi: np.ndarray, s1: float, s2: float, L: float) -> float:
    """2D version of :func:`dense_d2_1d` built from Kronecker DFT matrices.

    ``u`` and ``phi`` have shape ``(2, N, N)``.  The zero mode and the Nyquist
    lines carry no direction, so ``xi_hat xi_hat`` is set to zero there.
    """
    N = u.shape[1]
    h = L / N
    F1, xi = dft_matrices(N, L)
    F = np.kron(F1, F1)
    Finv = F.conj().T / N**2
    X1, X2 = np.meshgrid(xi, xi, indexing="ij")
    X1, X2 = X1.ravel(), X2.ravel()
    r2 = X1**2 + X2**2
    nyq = (np.abs(X1) == N / (2 * L)) | (np.abs(X2) == N / (2 * L))
    keep = (r2 > 0) & ~nyq
    safe = np.where(r2 > 0, r2, 1.0)
    P = [[np.where(keep, X1 * X1 / safe, 0.0), np.where(keep, X1 * X2 / safe, 0.0)],
         [np.where(keep, X2 * X1 / safe, 0.0), np.where(keep, X2 * X2 / safe, 0.0)]]
    M = N * N
    RR = np.zeros((2 * M, 2 * M))
    for i in range(2):
        for j in range(2):
            RR[i * M:(i + 1) * M, j * M:(j + 1) * M] = -(Finv @ np.diag(P[i][j]) @ F).real
    lap = lambda t: (Finv @ np.diag((2 * np.pi * np.sqrt(r2)) ** t) @ F).real
    U = np.concatenate([lap(s1) @ u[c].ravel() for c in range(2)])
    V = np.concatenate([lap(s2) @ phi[c].ravel() for c in range(2)])
    A = np.diag(np.tile(a.ravel(), 2))
    return float(h * h * V @ ((RR @ A - A @ RR) @ U))
