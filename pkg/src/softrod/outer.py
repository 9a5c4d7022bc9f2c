"""Outer loop: per-step solve for the desired rotation field and damping gains.

At each time the translational tracking error is asked to obey a damped wave
equation. Written as an ODE in ``s`` this reads

    d/ds (R* K3 R*^T a - R* b) + K_v c + d = 0,

with ``a = p_s``, ``b = K3 q_bar``, ``c = p_t - p*_t`` and
``d = g e3 - p*_tt - (K_q p~_s)_s + K_p p~``. After discretisation the unknowns
are ``theta*`` and the diagonal ``K_v`` at every node. The flux term uses the
same element layout as the plant, so a zero residual means the closed loop
really follows the designed error dynamics.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RodParams, RodState, element_rotation, element_strain, position_strain
from .grid import GridSpec, differentiation_matrix, divergence_matrix, rotate, rotate_T, wrap_angle
from .trajectory import DesiredTrajectory

log = logging.getLogger(__name__)

KV_FLOOR = 1e-6


def _as_mat2(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(2)
    elif arr.shape == (2,):
        arr = np.diag(arr)
    if arr.shape != (2, 2):
        raise ValueError(f"{name} must be a scalar, a diagonal or a 2x2 matrix")
    if not np.allclose(arr, arr.T) or np.linalg.eigvalsh(arr).min() <= 0:
        raise ValueError(f"{name} must be symmetric positive-definite, got {arr.tolist()}")
    return arr


@dataclass(frozen=True, eq=False)
class OuterGains:
    K_q: np.ndarray = field(default_factory=lambda: np.eye(2))
    K_p: np.ndarray = field(default_factory=lambda: 4.0 * np.eye(2))

    def __post_init__(self):
        object.__setattr__(self, "K_q", _as_mat2(self.K_q, "K_q"))
        object.__setattr__(self, "K_p", _as_mat2(self.K_p, "K_p"))


@dataclass
class OuterSolution:
    theta_star: np.ndarray
    kv1: np.ndarray
    kv2: np.ndarray
    residual_norm: float
    iterations: int
    degraded: bool = False

    @property
    def kv(self) -> np.ndarray:
        return np.stack([self.kv1, self.kv2], axis=-1)


class OuterConvergenceError(RuntimeError):
    """The outer solve hit its iteration cap above tolerance; ``solution`` is the best iterate."""

    def __init__(self, solution: OuterSolution, tolerance: float):
        super().__init__(
            f"outer solve did not converge: residual {solution.residual_norm:.3e} "
            f"after {solution.iterations} iterations (target {tolerance:.3e})"
        )
        self.solution = solution
        self.residual_norm = solution.residual_norm


class OuterHistory:
    """The last three outer solutions with their timestamps."""

    def __init__(self, maxlen: int = 3):
        self._items: deque[tuple[float, OuterSolution]] = deque(maxlen=maxlen)

    def push(self, t: float, solution: OuterSolution) -> None:
        if self._items and t <= self._items[-1][0]:
            raise ValueError(f"history timestamps must increase (got {t} after {self._items[-1][0]})")
        self._items.append((float(t), solution))

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i) -> tuple[float, OuterSolution]:
        return self._items[i]

    @property
    def latest(self) -> OuterSolution | None:
        return self._items[-1][1] if self._items else None


@dataclass
class ResidualFields:
    """Inputs of the outer residual frozen at one instant.

    ``a`` and ``b`` live on the ``N-1`` elements, ``c`` and ``d`` on the nodes.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    theta: np.ndarray
    theta_s_tip: float


def build_residual_fields(
    state: RodState, traj: DesiredTrajectory, gains: OuterGains, params: RodParams
) -> ResidualFields:
    grid = state.grid
    if traj.p_star.shape != state.p.shape:
        raise ValueError(f"trajectory shape {traj.p_star.shape} does not match grid of {grid.N} nodes")
    p_err = state.p - traj.p_star
    p_err_s = element_strain(p_err, grid)
    d = -traj.p_star_tt - divergence_matrix(grid) @ (p_err_s @ gains.K_q.T) + p_err @ gains.K_p.T
    d[:, 1] += params.g
    return ResidualFields(
        a=position_strain(state, params),
        b=np.tile(params.K3_diag * params.q_bar_vec, (grid.N - 1, 1)),
        c=state.v - traj.p_star_t,
        d=d,
        theta=state.theta.copy(),
        theta_s_tip=float(differentiation_matrix(grid)[-1] @ state.theta),
    )


def _k3_diag(K3) -> np.ndarray:
    return np.diag(K3) if np.ndim(K3) == 2 else np.broadcast_to(np.asarray(K3, dtype=float), (2,))


def _kv_array(kv) -> np.ndarray:
    kv = np.asarray(kv, dtype=float)
    return kv if kv.ndim == 2 and kv.shape[1] == 2 else np.stack(kv, axis=-1)


def _stress(theta_star, fields: ResidualFields, K3_diag) -> np.ndarray:
    """Element stress ``R* (K3 R*^T a - b)`` with each element turned by its distal angle."""
    theta_e = element_rotation(theta_star)
    return rotate(theta_e, K3_diag * rotate_T(theta_e, fields.a) - fields.b)


def _stress_theta_derivative(theta_star, fields: ResidualFields, K3_diag) -> np.ndarray:
    # d/dtheta of R (M R^T a - b) = R (J M u - M J u - J b), u = R^T a, J the quarter turn
    theta_e = element_rotation(theta_star)
    u = rotate_T(theta_e, fields.a)
    m1, m2 = K3_diag
    b1, b2 = fields.b[:, 0], fields.b[:, 1]
    inner = np.stack(
        [(m1 - m2) * u[:, 1] + b2, (m1 - m2) * u[:, 0] - b1],
        axis=-1,
    )
    return rotate(theta_e, inner)


def outer_residual(theta_star, kv, fields: ResidualFields, grid: GridSpec, K3) -> np.ndarray:
    """Stacked residual ``[r^1, r^2, theta*_s(ell) - theta_s(ell)]`` of length ``2N + 1``.

    Row 0 of each component carries the base constraint ``theta*(0) = 0``.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    r = divergence_matrix(grid) @ _stress(theta_star, fields, _k3_diag(K3)) + _kv_array(kv) * fields.c + fields.d
    r[0, :] = theta_star[0]
    tip = differentiation_matrix(grid)[-1] @ theta_star - fields.theta_s_tip
    return np.concatenate([r[:, 0], r[:, 1], [tip]])


def outer_jacobian(theta_star, kv, fields: ResidualFields, grid: GridSpec, K3) -> np.ndarray:
    """Analytic Jacobian of ``outer_residual`` w.r.t. ``[theta*, kv1, kv2]`` (shape ``(2N+1, 3N)``)."""
    theta_star = np.asarray(theta_star, dtype=float)
    n = theta_star.size
    B = divergence_matrix(grid)
    dS = _stress_theta_derivative(theta_star, fields, _k3_diag(K3))
    J = np.zeros((2 * n + 1, 3 * n))
    for i in range(2):
        rows = slice(i * n, (i + 1) * n)
        block = np.zeros((n, n))
        block[:, 1:] = B * dS[:, i][None, :]
        block[0, :] = 0.0
        block[0, 0] = 1.0
        J[rows, :n] = block
        kv_block = np.diag(fields.c[:, i])
        kv_block[0, 0] = 0.0
        J[rows, (i + 1) * n : (i + 2) * n] = kv_block
    J[-1, :n] = differentiation_matrix(grid)[-1]
    return J


def optimal_gains(theta_star, fields: ResidualFields, grid: GridSpec, K3, kv_prev, *, kv_max: float = 1e3):
    """Best ``K_v`` in ``[KV_FLOOR, kv_max]`` for a fixed ``theta*``, row by row.

    Each row ``e + kv c`` is linear in its own gain, so the constrained optimum
    is the clipped root ``-e / c``. Rows with ``c == 0`` keep ``kv_prev``.
    """
    e = divergence_matrix(grid) @ _stress(theta_star, fields, _k3_diag(K3)) + fields.d
    c = fields.c
    kv = np.array(kv_prev, dtype=float, copy=True)
    moving = c != 0
    kv[moving] = -e[moving] / c[moving]
    kv = np.clip(kv, KV_FLOOR, kv_max)
    kv[0] = np.clip(kv_prev[0], KV_FLOOR, kv_max)
    return kv


def levenberg_marquardt(fun, jac, z0, *, target, max_iter=200, mu0=1e-3, gtol=1e-12, xtol=1e-12):
    """Minimise ``|fun(z)|^2``; returns ``(z, iterations)``.

    ``target(z)`` returns True when the iterate is good enough to stop early.
    Only steps that lower the cost are accepted, so the returned cost never
    exceeds the starting one.
    """
    z = np.asarray(z0, dtype=float).copy()
    F = fun(z)
    cost = F @ F
    mu = mu0
    it = 0
    while it < max_iter and not target(z):
        it += 1
        Jz = jac(z)
        g = Jz.T @ F
        if np.max(np.abs(g)) <= gtol:
            break
        H = Jz.T @ Jz
        scale = np.maximum(np.diag(H), 1e-12 * max(1.0, np.max(np.diag(H))))
        accepted = False
        while mu < 1e16:
            delta = np.linalg.solve(H + mu * np.diag(scale), -g)
            z_try = z + delta
            F_try = fun(z_try)
            cost_try = F_try @ F_try
            if np.isfinite(cost_try) and cost_try < cost:
                z, F, cost = z_try, F_try, cost_try
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                break
            mu *= 4.0
        if not accepted or np.linalg.norm(delta) <= xtol * (1.0 + np.linalg.norm(z)):
            break
    return z, it


def solve_outer(
    fields: ResidualFields,
    history: OuterHistory,
    grid: GridSpec,
    K3,
    tolerance: float,
    *,
    max_iter: int = 200,
    kv_max: float = 1e3,
    tikhonov: float = 1e-8,
    warm_start: bool = True,
) -> OuterSolution:
    """Constrained least-squares solve for ``theta*`` and ``K_v > 0``.

    ``theta*(0)`` is pinned to zero. ``K_v`` is eliminated row by row with
    :func:`optimal_gains` and Levenberg-Marquardt runs over ``theta*`` alone,
    with a small Tikhonov pull toward the start point. The start point is the
    previous solution when ``history`` has one (and ``warm_start`` is set),
    else ``theta* = theta`` and ``K_v = 1``.

    Raises :class:`OuterConvergenceError` (carrying the best iterate) when the
    residual does not get below ``tolerance * sqrt(2N)``.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    n = grid.N
    prev = history.latest if warm_start else None
    if prev is not None:
        theta0 = np.unwrap(prev.theta_star)
        kv0 = prev.kv
    else:
        theta0 = fields.theta.copy()
        kv0 = np.ones((n, 2))
    theta0 = theta0 - theta0[0]
    z0 = theta0[1:].copy()
    reg = np.sqrt(tikhonov)
    threshold = tolerance * np.sqrt(2 * n)

    def full(z):
        return np.concatenate([[0.0], z])

    def solved(z):
        theta = full(z)
        kv = optimal_gains(theta, fields, grid, K3, kv0, kv_max=kv_max)
        r = outer_residual(theta, kv, fields, grid, K3)
        return theta, kv, r

    def fun(z):
        return np.concatenate([solved(z)[2], reg * (z - z0)])

    def jac(z):
        theta, kv, r = solved(z)
        J = outer_jacobian(theta, kv, fields, grid, K3)[:, 1:n]
        # rows whose gain sits strictly inside its bounds are identically zero nearby
        kv_flat = np.concatenate([kv[:, 0], kv[:, 1]])
        moving = np.concatenate([fields.c[:, 0], fields.c[:, 1]]) != 0
        free = moving & (kv_flat > KV_FLOOR) & (kv_flat < kv_max)
        free[[0, n]] = False
        J[:-1][free] = 0.0
        return np.vstack([J, reg * np.eye(z.size)])

    z, iterations = levenberg_marquardt(
        fun, jac, z0, target=lambda z: np.linalg.norm(solved(z)[2]) < threshold, max_iter=max_iter
    )
    theta, kv, r = solved(z)
    res = float(np.linalg.norm(r))
    theta = wrap_angle(theta)
    theta[0] = 0.0
    sol = OuterSolution(
        theta_star=theta,
        kv1=kv[:, 0].copy(),
        kv2=kv[:, 1].copy(),
        residual_norm=res,
        iterations=iterations,
        degraded=not res < threshold,
    )
    if sol.degraded:
        raise OuterConvergenceError(sol, threshold)
    return sol


def estimate_theta_star_derivatives(history: OuterHistory, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward-difference ``theta*_t`` and ``theta*_tt`` from the solve history."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if len(history) == 0:
        raise ValueError("history is empty")
    cur = history[-1][1].theta_star
    zeros = np.zeros_like(cur)
    if len(history) < 2:
        return zeros, zeros.copy()
    d1 = wrap_angle(cur - history[-2][1].theta_star)
    theta_t = d1 / dt
    if len(history) < 3:
        return theta_t, zeros
    d0 = wrap_angle(history[-2][1].theta_star - history[-3][1].theta_star)
    return theta_t, (d1 - d0) / dt**2
