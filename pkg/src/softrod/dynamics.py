"""Planar Cosserat-rod dynamics: PDE right-hand sides and a kick-drift-kick stepper.

All quantities are in the normalized units of the planar model: translational
stiffness is divided by rho*sigma (``K3``), rotational terms by rho*J (``K4``,
``K5``). ``rho_J`` only converts the moment input back to physical units.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    differentiation_matrix,
    divergence_matrix,
    element_difference_matrix,
    hat2,
    rotate,
    rotate_T,
    trapezoid,
)


class IntegrationError(RuntimeError):
    """Raised when the state stops being finite (blow-up or CFL violation)."""

    def __init__(self, message: str, node: int | None = None, state: "RodState | None" = None):
        super().__init__(message)
        self.node = node
        self.state = state


class CFLWarning(RuntimeWarning):
    pass


def _diag2(value, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (2,)).copy()
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive, got {value!r}")
    return arr


@dataclass(frozen=True)
class RodParams:
    """Constants of the planar model.

    ``K3`` and ``K5`` are diagonals (a scalar means a multiple of the identity).
    """

    K3: tuple = (1.0, 1.5)
    K4: float = 1.0
    K5: float | tuple = 1.5
    rho_J: float = 1.0
    g: float = 0.0
    q_bar: tuple = (0.0, 1.0)
    u_bar: float = 0.0

    def __post_init__(self):
        _diag2(self.K3, "K3")
        _diag2(self.K5, "K5")
        for name in ("K4", "rho_J"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be strictly positive, got {val!r}")
        if len(self.q_bar) != 2 or not np.all(np.isfinite(self.q_bar)):
            raise ValueError(f"q_bar must be a finite 2-vector, got {self.q_bar!r}")

    @property
    def K3_diag(self) -> np.ndarray:
        return _diag2(self.K3, "K3")

    @property
    def K5_diag(self) -> np.ndarray:
        return _diag2(self.K5, "K5")

    @property
    def K3_matrix(self) -> np.ndarray:
        return np.diag(self.K3_diag)

    @property
    def q_bar_vec(self) -> np.ndarray:
        return np.asarray(self.q_bar, dtype=float)

    @property
    def K2(self) -> float:
        """Physical angular stiffness ``K4 * rho_J``."""
        return self.K4 * self.rho_J

    def wave_speed(self) -> float:
        return float(np.sqrt(max(self.K3_diag.max(), self.K4)))


@dataclass
class RodState:
    grid: GridSpec
    p: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        n = self.grid.N
        self.p = np.asarray(self.p, dtype=float).reshape(n, 2)
        self.v = np.asarray(self.v, dtype=float).reshape(n, 2)
        self.theta = np.asarray(self.theta, dtype=float).reshape(n)
        self.w = np.asarray(self.w, dtype=float).reshape(n)

    def copy(self) -> "RodState":
        return RodState(self.grid, self.p.copy(), self.v.copy(), self.theta.copy(), self.w.copy(), self.t)

    def check_finite(self) -> None:
        for name in ("p", "v", "theta", "w"):
            arr = getattr(self, name)
            bad = ~np.isfinite(arr)
            if bad.any():
                node = int(np.argwhere(bad)[0][0])
                raise IntegrationError(
                    f"non-finite {name} at node {node}, t={self.t:.6g}", node=node, state=self
                )


@dataclass
class ControlSignal:
    """Distributed moment ``m_c`` and its controller-supplied spatial derivative."""

    m_c: np.ndarray
    m_c_s: np.ndarray

    @classmethod
    def zero(cls, grid: GridSpec) -> "ControlSignal":
        return cls(np.zeros(grid.N), np.zeros(grid.N))


def initial_state(grid: GridSpec) -> RodState:
    """Undeformed rod lying along the z-axis, at rest."""
    n = grid.N
    p = np.zeros((n, 2))
    p[:, 1] = grid.s
    return RodState(grid, p, np.zeros((n, 2)), np.zeros(n), np.zeros(n), 0.0)


def element_strain(p: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``p_s`` on the ``N-1`` elements from compact differences of nodal positions."""
    return element_difference_matrix(grid) @ p


def element_rotation(theta: np.ndarray) -> np.ndarray:
    """Rotation angle carried by each element: the angle of its distal node."""
    return theta[1:]


def position_strain(state: RodState, params: RodParams) -> np.ndarray:
    """Element strains ``p_s``, shape ``(N-1, 2)``."""
    return element_strain(state.p, state.grid)


def bending_strain(theta: np.ndarray, m_c_tip: float, params: RodParams, grid: GridSpec) -> np.ndarray:
    """``theta_s`` with the tip row fixed by ``K2 (theta_s - u_bar) = m_c`` at ``s = ell``."""
    A = differentiation_matrix(grid)
    theta_s = A @ theta
    theta_s[-1] = params.u_bar + m_c_tip / params.K2
    return theta_s


def shear_coupling(theta: np.ndarray, p_s: np.ndarray, params: RodParams) -> np.ndarray:
    """``hat(p_s) R K5 (R^T p_s - q_bar)``, the torque of the internal force.

    ``p_s`` holds element strains; node ``i > 0`` feels the element it closes,
    the base node feels the first element.
    """
    strain_nodes = np.vstack([p_s[:1], p_s])
    strain = rotate_T(theta, strain_nodes) - params.q_bar_vec
    force = rotate(theta, params.K5_diag * strain)
    return np.einsum("ij,ij->i", hat2(strain_nodes), force)


def internal_force(state: RodState, params: RodParams, p_s: np.ndarray | None = None) -> np.ndarray:
    """Element forces ``R K3 (R^T p_s - q_bar)``, shape ``(N-1, 2)``."""
    if p_s is None:
        p_s = position_strain(state, params)
    theta_e = element_rotation(state.theta)
    strain = rotate_T(theta_e, p_s) - params.q_bar_vec
    return rotate(theta_e, params.K3_diag * strain)


def translational_rhs(state: RodState, params: RodParams) -> np.ndarray:
    """``p_tt`` at every node. The tip sees zero force outside the rod; ``step`` clamps the base."""
    state.check_finite()
    acc = divergence_matrix(state.grid) @ internal_force(state, params)
    acc[:, 1] += params.g
    return acc


def rotational_rhs(state: RodState, params: RodParams, ctrl: ControlSignal) -> np.ndarray:
    """``theta_tt`` at every node, using ``ctrl.m_c_s`` for the input derivative."""
    state.check_finite()
    grid = state.grid
    if np.shape(ctrl.m_c) != (grid.N,) or np.shape(ctrl.m_c_s) != (grid.N,):
        raise ValueError("control signal is not on the state's grid")
    A = differentiation_matrix(grid)
    theta_ss = A @ bending_strain(state.theta, ctrl.m_c[-1], params, grid)
    p_s = position_strain(state, params)
    return params.K4 * theta_ss - ctrl.m_c_s / params.rho_J + shear_coupling(state.theta, p_s, params)


def cfl_limit(grid: GridSpec, params: RodParams) -> float:
    return grid.ds / params.wave_speed()


def _clamp(state: RodState) -> None:
    state.p[0] = 0.0
    state.v[0] = 0.0
    state.theta[0] = 0.0
    state.w[0] = 0.0


def step(state: RodState, ctrl: ControlSignal, params: RodParams, dt: float) -> RodState:
    """One velocity-Verlet step with the control held fixed over the step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > cfl_limit(state.grid, params):
        warnings.warn(
            f"dt={dt:g} exceeds the CFL limit {cfl_limit(state.grid, params):.4g}", CFLWarning, stacklevel=2
        )
    new = state.copy()
    half = 0.5 * dt
    new.v += half * translational_rhs(state, params)
    new.w += half * rotational_rhs(state, params, ctrl)
    _clamp(new)
    new.p += dt * new.v
    new.theta += dt * new.w
    _clamp(new)
    new.t = state.t + dt
    new.check_finite()
    new.v += half * translational_rhs(new, params)
    new.w += half * rotational_rhs(new, params, ctrl)
    _clamp(new)
    new.check_finite()
    return new


def mechanical_energy(state: RodState, params: RodParams, mass_ratio: float = 1.0) -> float:
    """Kinetic plus elastic energy per unit rho*J.

    ``mass_ratio`` is rho*sigma/(rho*J). Shear and stretch energy is summed
    over elements, the rest uses the trapezoid rule.
    """
    p_s = position_strain(state, params)
    strain = rotate_T(element_rotation(state.theta), p_s) - params.q_bar_vec
    theta_s = differentiation_matrix(state.grid) @ state.theta - params.u_bar
    density = 0.5 * mass_ratio * np.sum(state.v**2, axis=1) + 0.5 * state.w**2 + 0.5 * params.K4 * theta_s**2
    elastic = 0.5 * mass_ratio * state.grid.ds * np.sum(params.K3_diag * strain**2)
    return trapezoid(density, state.grid) + float(elastic)
