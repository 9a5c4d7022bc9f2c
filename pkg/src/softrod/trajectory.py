"""Desired centerline trajectories and tip regulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dynamics import RodState
from .grid import GridSpec, differentiation_matrix

_SERIES_CUTOFF = 1e-3


@dataclass
class DesiredTrajectory:
    p_star: np.ndarray
    p_star_t: np.ndarray
    p_star_tt: np.ndarray

    @classmethod
    def static(cls, p_star) -> "DesiredTrajectory":
        p_star = np.asarray(p_star, dtype=float)
        return cls(p_star, np.zeros_like(p_star), np.zeros_like(p_star))


def arc_shape(s, curvature: float) -> np.ndarray:
    """Constant-curvature arc leaving the origin along +z and bending toward +y."""
    s = np.asarray(s, dtype=float)
    k = float(curvature)
    if abs(k) * max(float(np.max(np.abs(s), initial=0.0)), 1.0) < _SERIES_CUTOFF:
        y = k * s**2 / 2 - k**3 * s**4 / 24
        z = s - k**2 * s**3 / 6
    else:
        y = (1.0 - np.cos(k * s)) / k
        z = np.sin(k * s) / k
    return np.stack([y, z], axis=-1)


def _arc_curvature_derivatives(s, k: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of ``arc_shape`` with respect to the curvature."""
    if abs(k) * max(float(np.max(np.abs(s), initial=0.0)), 1.0) < _SERIES_CUTOFF:
        d1 = np.stack([s**2 / 2 - k**2 * s**4 / 8, -k * s**3 / 3], axis=-1)
        d2 = np.stack([-k * s**4 / 4, -(s**3) / 3 + k**2 * s**5 / 10], axis=-1)
        return d1, d2
    sn, cs = np.sin(k * s), np.cos(k * s)
    d1 = np.stack([s * sn / k - (1 - cs) / k**2, s * cs / k - sn / k**2], axis=-1)
    d2 = np.stack(
        [
            s**2 * cs / k - 2 * s * sn / k**2 + 2 * (1 - cs) / k**3,
            -(s**2) * sn / k - 2 * s * cs / k**2 + 2 * sn / k**3,
        ],
        axis=-1,
    )
    return d1, d2


def make_bent_target(grid: GridSpec, curvature: float) -> DesiredTrajectory:
    if not abs(curvature * grid.ell) < np.pi:
        raise ValueError(f"|curvature * ell| must be below pi, got {curvature * grid.ell:.4g}")
    return DesiredTrajectory.static(arc_shape(grid.s, curvature))


def curvature_for_tip_deflection(ell: float, deflection: float) -> float:
    """Arc curvature whose tip sits ``deflection`` away from the straight axis."""
    if not 0 <= deflection < 2 * ell / np.pi:
        raise ValueError(f"tip deflection {deflection} not reachable by an arc of length {ell}")
    if deflection == 0:
        return 0.0
    return brentq(lambda k: arc_shape(np.array([ell]), k)[0, 0] - deflection, 1e-9, np.pi / ell)


@dataclass(frozen=True)
class SwingingArc:
    """Arc whose curvature oscillates: ``k(t) = k0 + k1 sin(omega t)``.

    Time derivatives are exact (chain rule through the arc formula).
    """

    grid: GridSpec
    k0: float
    k1: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if (abs(self.k0) + abs(self.k1)) * self.grid.ell >= np.pi:
            raise ValueError("curvature range leaves the single-arc regime")

    def __call__(self, t: float) -> DesiredTrajectory:
        k = self.k0 + self.k1 * np.sin(self.omega * t)
        k_t = self.k1 * self.omega * np.cos(self.omega * t)
        k_tt = -self.k1 * self.omega**2 * np.sin(self.omega * t)
        s = self.grid.s
        d1, d2 = _arc_curvature_derivatives(s, k)
        return DesiredTrajectory(arc_shape(s, k), d1 * k_t, d2 * k_t**2 + d1 * k_tt)


def _blend_shape(grid: GridSpec, width: float) -> np.ndarray:
    # C1 cubic: zero value and slope at ell - width, zero value and unit slope at ell
    x = grid.s - (grid.ell - width)
    phi = x**2 * (grid.s - grid.ell) / width**2
    phi[x <= 0] = 0.0
    return phi


def regulate_tip(traj: DesiredTrajectory, state: RodState, blend_width: float) -> DesiredTrajectory:
    """Bend the last ``blend_width`` of the target so its tip slope matches the rod's.

    Slopes are compared with the tip row of the differentiation matrix, so the
    match holds for the discrete derivative used everywhere else. Time
    derivatives of the target are passed through unchanged.
    """
    grid = state.grid
    if not 0 < blend_width < grid.ell / 2:
        raise ValueError(f"blend_width must lie in (0, ell/2), got {blend_width}")
    A = differentiation_matrix(grid)
    phi = _blend_shape(grid, blend_width)
    gain = A[-1] @ phi
    if abs(gain) < 1e-12:
        raise ValueError("blend_width is narrower than one grid cell")
    mismatch = A[-1] @ state.p - A[-1] @ traj.p_star
    if not np.any(mismatch):
        return traj
    p_star = traj.p_star + np.outer(phi, mismatch / gain)
    p_star[0] = traj.p_star[0]
    return DesiredTrajectory(p_star, traj.p_star_t, traj.p_star_tt)
