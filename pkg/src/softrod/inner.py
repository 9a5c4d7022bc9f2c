"""Inner loop: the distributed moment that turns the rotation error into a damped wave."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSignal, RodParams, RodState, bending_strain, position_strain, shear_coupling
from .grid import differentiation_matrix, integral_from_s, wrap_angle
from .outer import OuterSolution


@dataclass(frozen=True, eq=False)
class InnerGains:
    """Gains of the rotational error equation; each is a positive scalar or a field."""

    k_u: float | np.ndarray = 0.5
    k_w: float | np.ndarray = 2.0
    k_theta: float | np.ndarray = 4.0

    def __post_init__(self):
        for name in ("k_u", "k_w", "k_theta"):
            val = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(val)) or np.any(val <= 0):
                raise ValueError(f"{name} must be strictly positive everywhere")


def rotation_error(state: RodState, outer: OuterSolution, theta_star_t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(theta~, theta~_s, theta~_t)``; ``theta~_s`` has the free-end value zero."""
    err = wrap_angle(state.theta - outer.theta_star)
    err_s = differentiation_matrix(state.grid) @ err
    err_s[-1] = 0.0
    return err, err_s, state.w - np.asarray(theta_star_t, dtype=float)


def compute_mc(
    state: RodState,
    outer: OuterSolution,
    theta_star_t,
    theta_star_tt,
    gains: InnerGains,
    params: RodParams,
) -> ControlSignal:
    """Moment input ``m_c`` and its derivative ``m_c_s``.

    ``m_c = rho_J [K4 (theta_s - u_bar) - k_u theta~_s] + rho_J int_s^ell f`` with
    ``f = -k_w theta~_t - k_theta theta~ - coupling + theta*_tt``. ``m_c_s`` is the
    derivative of that expression taken term by term, using the same discrete
    ``theta_ss`` the dynamics uses, so the closed loop reproduces the damped
    rotational error equation node for node.
    """
    grid = state.grid
    if outer.theta_star.shape != state.theta.shape:
        raise ValueError("outer solution is not on the state's grid")
    A = differentiation_matrix(grid)
    err, err_s, err_t = rotation_error(state, outer, theta_star_t)
    coupling = shear_coupling(state.theta, position_strain(state, params), params)
    integrand = -gains.k_w * err_t - gains.k_theta * err - coupling + np.asarray(theta_star_tt, dtype=float)

    theta_s = A @ state.theta
    m_c = params.rho_J * (params.K4 * (theta_s - params.u_bar) - gains.k_u * err_s + integral_from_s(integrand, grid))
    theta_ss = A @ bending_strain(state.theta, m_c[-1], params, grid)
    m_c_s = params.rho_J * (params.K4 * theta_ss - A @ (gains.k_u * err_s) - integrand)
    return ControlSignal(m_c=m_c, m_c_s=m_c_s)


def damping_constant_bound(gains: InnerGains) -> float:
    """Upper bound on the cross-term weight ``c`` of the rotational Lyapunov functional."""
    k_theta = np.asarray(gains.k_theta, dtype=float)
    k_w = np.asarray(gains.k_w, dtype=float)
    first = np.sqrt(k_theta)
    second = k_theta * k_w / (k_theta + k_w**2 / 4.0)
    return float(min(np.min(first), np.min(second)))
