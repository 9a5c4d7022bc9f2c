"""Spatial grid, planar rotations and the discrete operators shared by every module."""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``N`` nodes on ``[0, ell]``; node 0 is the clamped base."""

    ell: float = 0.5
    N: int = 11

    def __post_init__(self):
        if self.N < 3:
            raise ValueError(f"grid needs at least 3 nodes, got N={self.N}")
        if not (np.isfinite(self.ell) and self.ell > 0):
            raise ValueError(f"rod length must be positive, got ell={self.ell}")

    @property
    def ds(self) -> float:
        return self.ell / (self.N - 1)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, self.ell, self.N)

    @classmethod
    def from_spacing(cls, ell: float, ds: float) -> "GridSpec":
        n = ell / ds
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"ds={ds} does not divide ell={ell}")
        return cls(ell=ell, N=int(round(n)) + 1)


def rotation_matrix(theta) -> np.ndarray:
    """``R(theta)``; an array of angles gives a stack of matrices of shape ``(..., 2, 2)``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


def hat2(p) -> np.ndarray:
    """Planar hat map ``(p2, p3) -> (-p3, p2)``; works row-wise on ``(..., 2)`` arrays."""
    p = np.asarray(p, dtype=float)
    return np.stack([-p[..., 1], p[..., 0]], axis=-1)


def rotate(theta, vec) -> np.ndarray:
    """Apply ``R(theta)`` node-wise: ``theta`` has shape (N,), ``vec`` shape (N, 2) or (2,)."""
    theta = np.asarray(theta, dtype=float)
    vec = np.asarray(vec, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    x, y = vec[..., 0], vec[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def rotate_T(theta, vec) -> np.ndarray:
    """Apply ``R(theta)^T`` node-wise."""
    theta = np.asarray(theta, dtype=float)
    vec = np.asarray(vec, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    x, y = vec[..., 0], vec[..., 1]
    return np.stack([c * x + s * y, -s * x + c * y], axis=-1)


@functools.lru_cache(maxsize=32)
def differentiation_matrix(grid: GridSpec) -> np.ndarray:
    """Second-order d/ds matrix.

    Central differences on interior rows, three-point one-sided stencils on the
    first and last rows. The returned array is read-only and shared.
    """
    n, h = grid.N, grid.ds
    A = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    A[idx, idx - 1] = -0.5 / h
    A[idx, idx + 1] = 0.5 / h
    A[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    A[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    A.setflags(write=False)
    return A


def integral_from_s(f, grid: GridSpec) -> np.ndarray:
    """Trapezoidal ``int_{s_i}^{ell} f`` at every node (the last entry is exactly zero).

    Accepts a scalar field (N,) or a vector field (N, k).
    """
    f = np.asarray(f, dtype=float)
    panels = 0.5 * (f[:-1] + f[1:]) * grid.ds
    out = np.zeros_like(f)
    out[:-1] = np.cumsum(panels[::-1], axis=0)[::-1]
    return out


def trapezoid(f, grid: GridSpec) -> float:
    """Composite trapezoid over the whole rod."""
    f = np.asarray(f, dtype=float)
    return float(grid.ds * (f.sum(axis=0) - 0.5 * (f[0] + f[-1])))


def wrap_angle(x):
    """Map angles into ``[-pi, pi)``."""
    return (np.asarray(x, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi


@functools.lru_cache(maxsize=32)
def element_difference_matrix(grid: GridSpec) -> np.ndarray:
    """``(N-1) x N`` compact difference: element ``j`` gets ``(f[j+1] - f[j]) / ds``."""
    n, h = grid.N, grid.ds
    D = np.zeros((n - 1, n))
    j = np.arange(n - 1)
    D[j, j] = -1.0 / h
    D[j, j + 1] = 1.0 / h
    D.setflags(write=False)
    return D


@functools.lru_cache(maxsize=32)
def divergence_matrix(grid: GridSpec) -> np.ndarray:
    """``N x (N-1)`` map from element fluxes to nodal derivatives.

    Interior nodes take the compact difference of their two neighbouring
    elements. The end nodes own half a cell and see a zero flux outside the
    rod, which is the free-end condition at the tip (the base row is only
    meaningful as a reaction since the base is clamped).
    """
    n, h = grid.N, grid.ds
    B = np.zeros((n, n - 1))
    i = np.arange(1, n - 1)
    B[i, i] = 1.0 / h
    B[i, i - 1] = -1.0 / h
    B[0, 0] = 2.0 / h
    B[-1, -1] = -2.0 / h
    B.setflags(write=False)
    return B
