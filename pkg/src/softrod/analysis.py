"""Lyapunov functionals, stability-condition checks, error norms and decay-rate fits."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RodParams, RodState, element_rotation, element_strain
from .grid import GridSpec, differentiation_matrix, divergence_matrix, rotation_matrix, trapezoid, wrap_angle
from .inner import InnerGains, damping_constant_bound, rotation_error
from .outer import OuterGains, OuterSolution
from .trajectory import DesiredTrajectory

log = logging.getLogger(__name__)

DECAY_FLOOR = 1e-14


@dataclass
class ErrorNorms:
    t: float
    p_err_L2: float
    p_err_t_L2: float
    p_err_s_L2: float
    theta_err_Linf: float
    theta_err_t_Linf: float
    theta_err_s_L2: float

    FIELDS = ("p_err_L2", "p_err_t_L2", "p_err_s_L2", "theta_err_Linf", "theta_err_t_Linf", "theta_err_s_L2")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)


@dataclass
class StabilityReport:
    c_used: float
    c_max: float
    V1: float
    V2: float
    Kq_condition_ok: bool
    C_matrix: np.ndarray
    Phi_sup_norm: float
    Psi_L2: float = 0.0
    min_eig_Kq_Phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    notes: str = ""

    @property
    def c1(self) -> float:
        return float(self.C_matrix[0, 0])


def l2_norm(values: np.ndarray, grid: GridSpec) -> float:
    values = np.asarray(values, dtype=float)
    sq = values**2 if values.ndim == 1 else np.sum(values**2, axis=1)
    return float(np.sqrt(max(trapezoid(sq, grid), 0.0)))


def error_norms(
    state: RodState, traj: DesiredTrajectory, outer: OuterSolution, grid: GridSpec, theta_star_t=None
) -> ErrorNorms:
    """The six tracking-error norms; L2 by trapezoid, Linf by the node maximum."""
    if state.p.shape != traj.p_star.shape or outer.theta_star.shape != state.theta.shape:
        raise ValueError("state, trajectory and outer solution must share a grid")
    A = differentiation_matrix(grid)
    p_err = state.p - traj.p_star
    if theta_star_t is None:
        theta_star_t = np.zeros(grid.N)
    err = wrap_angle(state.theta - outer.theta_star)
    err_t = state.w - np.asarray(theta_star_t, dtype=float)
    return ErrorNorms(
        t=float(state.t),
        p_err_L2=l2_norm(p_err, grid),
        p_err_t_L2=l2_norm(state.v - traj.p_star_t, grid),
        p_err_s_L2=l2_norm(A @ p_err, grid),
        theta_err_Linf=float(np.max(np.abs(err))),
        theta_err_t_Linf=float(np.max(np.abs(err_t))),
        theta_err_s_L2=l2_norm(A @ err, grid),
    )


def lyapunov_inner(
    state: RodState, outer: OuterSolution, gains: InnerGains, c: float, grid: GridSpec, theta_star_t=None
) -> float:
    """``V1 = 1/2 int k_u e_s^2 + e_t^2 + 2 c e e_t + k_theta e^2`` for the rotation error ``e``."""
    c_max = damping_constant_bound(gains)
    if not 0 < c < c_max:
        raise ValueError(f"c must lie in (0, {c_max:g}), got {c}")
    if theta_star_t is None:
        theta_star_t = np.zeros(grid.N)
    err, err_s, err_t = rotation_error(state, outer, theta_star_t)
    density = gains.k_u * err_s**2 + err_t**2 + 2.0 * c * err * err_t + gains.k_theta * err**2
    return 0.5 * trapezoid(density, grid)


def rotated_stiffness(theta: np.ndarray, K3_diag) -> np.ndarray:
    """``R K3 R^T`` for each angle, shape ``(n, 2, 2)``."""
    R = rotation_matrix(theta)
    return np.einsum("nij,j,nkj->nik", R, np.asarray(K3_diag, dtype=float), R)


def stiffness_mismatch(theta: np.ndarray, theta_star: np.ndarray, K3_diag) -> np.ndarray:
    """``Phi = R K3 R^T - R* K3 R*^T`` on the elements."""
    return rotated_stiffness(element_rotation(theta), K3_diag) - rotated_stiffness(
        element_rotation(theta_star), K3_diag
    )


def stiffness_mismatch_rate(theta, theta_t, theta_star, theta_star_t, K3_diag) -> np.ndarray:
    """``Phi_t`` on the elements: ``d/dt (R K R^T) = theta_t (J R K R^T - R K R^T J)``."""
    J = np.array([[0.0, -1.0], [1.0, 0.0]])

    def rate(angle, angle_t):
        M = rotated_stiffness(element_rotation(angle), K3_diag)
        comm = np.einsum("ij,njk->nik", J, M) - np.einsum("nij,jk->nik", M, J)
        return element_rotation(np.asarray(angle_t, dtype=float))[:, None, None] * comm

    return rate(theta, theta_t) - rate(theta_star, theta_star_t)


def outer_forcing(state: RodState, traj: DesiredTrajectory, outer: OuterSolution, params: RodParams) -> np.ndarray:
    """``Psi = (Phi p*_s)_s + (R* - R)_s K3 q_bar`` at the nodes (base row zero)."""
    grid = state.grid
    K3_diag = params.K3_diag
    Phi = stiffness_mismatch(state.theta, outer.theta_star, K3_diag)
    p_star_s = element_strain(traj.p_star, grid)
    b = K3_diag * params.q_bar_vec
    dR = rotation_matrix(element_rotation(outer.theta_star)) - rotation_matrix(element_rotation(state.theta))
    flux = np.einsum("nij,nj->ni", Phi, p_star_s) + dR @ b
    psi = divergence_matrix(grid) @ flux
    psi[0] = 0.0
    return psi


def lyapunov_outer(
    state: RodState,
    traj: DesiredTrajectory,
    outer: OuterSolution,
    gains: OuterGains,
    c1: float,
    K3,
    grid: GridSpec,
    *,
    check_conditions: bool = True,
) -> tuple[float, float]:
    """``V2`` and the sup-norm of ``Phi``.

    The strain term ``p~_s^T (K_q + Phi) p~_s`` is summed over elements, the
    nodal terms use the trapezoid rule.
    """
    K3_diag = np.diag(K3) if np.ndim(K3) == 2 else np.broadcast_to(np.asarray(K3, dtype=float), (2,))
    if check_conditions and not cross_gain_feasible(c1, gains.K_p, outer.kv):
        raise ValueError(f"c1={c1:g} violates the cross-term conditions")
    p_err = state.p - traj.p_star
    p_err_t = state.v - traj.p_star_t
    p_err_s = element_strain(p_err, grid)
    Phi = stiffness_mismatch(state.theta, outer.theta_star, K3_diag)
    weight = gains.K_q[None] + Phi
    strain_term = grid.ds * float(np.einsum("ni,nij,nj->", p_err_s, weight, p_err_s))
    nodal = (
        np.sum(p_err_t**2, axis=1)
        + 2.0 * c1 * np.sum(p_err * p_err_t, axis=1)
        + np.einsum("ni,ij,nj->n", p_err, gains.K_p, p_err)
    )
    V2 = 0.5 * (strain_term + trapezoid(nodal, grid))
    phi_sup = float(np.max(np.linalg.norm(Phi, ord=2, axis=(1, 2)))) if Phi.size else 0.0
    return V2, phi_sup


def cross_gain_feasible(c1: float, K_p, kv) -> bool:
    """Whether ``C = c1 I`` makes ``K_p^1/2 - C`` and ``K_v - C - K_v C K_p^-1 K_v / 4`` SPD at every node."""
    if not c1 > 0:
        return False
    K_p = np.asarray(K_p, dtype=float)
    w, V = np.linalg.eigh(K_p)
    sqrt_Kp = (V * np.sqrt(w)) @ V.T
    if np.linalg.eigvalsh(sqrt_Kp - c1 * np.eye(2)).min() <= 0:
        return False
    Kp_inv = np.linalg.inv(K_p)
    Kv = np.zeros((len(kv), 2, 2))
    Kv[:, 0, 0] = kv[:, 0]
    Kv[:, 1, 1] = kv[:, 1]
    M = Kv - c1 * np.eye(2) - 0.25 * c1 * Kv @ Kp_inv @ Kv
    M = 0.5 * (M + np.swapaxes(M, 1, 2))
    return bool(np.linalg.eigvalsh(M).min() > 0)


def select_cross_gain(K_p, kv, *, iterations: int = 60) -> float:
    """Half the largest feasible ``c1``, with the supremum found by bisection."""
    K_p = np.asarray(K_p, dtype=float)
    lo, hi = 0.0, float(np.sqrt(np.linalg.eigvalsh(K_p).min()))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if cross_gain_feasible(mid, K_p, kv):
            lo = mid
        else:
            hi = mid
    return 0.5 * lo


def monitor_matrix_spd(c1: float, K_q, Phi: np.ndarray, Phi_t: np.ndarray) -> bool:
    """Whether ``C K_q + C Phi - Phi_t / 2`` is SPD on every element."""
    M = c1 * (np.asarray(K_q)[None] + Phi) - 0.5 * Phi_t
    M = 0.5 * (M + np.swapaxes(M, 1, 2))
    return bool(np.linalg.eigvalsh(M).min() > 0)


def check_stability_conditions(
    state0: RodState,
    outer0: OuterSolution,
    inner_gains: InnerGains,
    outer_gains: OuterGains,
    params: RodParams,
    traj: DesiredTrajectory | None = None,
    theta_star_t=None,
) -> StabilityReport:
    """Evaluate the sufficient conditions of the convergence argument at ``t = 0``.

    A failed condition is reported (and logged) rather than raised.
    """
    grid = state0.grid
    c_max = damping_constant_bound(inner_gains)
    c_used = 0.5 * c_max
    Phi = stiffness_mismatch(state0.theta, outer0.theta_star, params.K3_diag)
    eigs = np.linalg.eigvalsh(outer_gains.K_q[None] + Phi).min(axis=1)
    kq_ok = bool(eigs.min() > 0)
    c1 = select_cross_gain(outer_gains.K_p, outer0.kv)
    notes = []
    if not kq_ok:
        worst = int(np.argmin(eigs)) + 1
        notes.append(f"K_q + Phi not positive-definite (min eigenvalue {eigs.min():.3g} at node {worst})")
    if c1 <= 0:
        notes.append("no positive c1 satisfies the cross-term conditions")
    V1 = lyapunov_inner(state0, outer0, inner_gains, c_used, grid, theta_star_t)
    V2, phi_sup, psi = float("nan"), float(np.max(np.linalg.norm(Phi, ord=2, axis=(1, 2)))), 0.0
    if traj is not None:
        if c1 > 0:
            V2, phi_sup = lyapunov_outer(state0, traj, outer0, outer_gains, c1, params.K3_diag, grid)
        psi = l2_norm(outer_forcing(state0, traj, outer0, params), grid)
    report = StabilityReport(
        c_used=c_used,
        c_max=c_max,
        V1=V1,
        V2=V2,
        Kq_condition_ok=kq_ok,
        C_matrix=c1 * np.eye(2),
        Phi_sup_norm=phi_sup,
        Psi_L2=psi,
        min_eig_Kq_Phi=eigs,
        notes="; ".join(notes) if notes else "all conditions satisfied",
    )
    log.info(
        "stability check: c_used=%.4g c_max=%.4g c1=%.4g Kq_ok=%s |Phi|=%.4g |Psi|=%.4g (%s)",
        c_used, c_max, c1, kq_ok, phi_sup, psi, report.notes,
    )
    return report


def fit_decay_rate(series) -> tuple[float, float]:
    """Slope and r^2 of a least-squares line through ``(t, log value)``.

    Samples at or below ``1e-14`` are dropped; at least ten must remain.
    """
    data = np.asarray(series, dtype=float).reshape(-1, 2)
    keep = data[:, 1] > DECAY_FLOOR
    t, y = data[keep, 0], np.log(data[keep, 1])
    if t.size < 10:
        raise ValueError(f"need at least 10 positive samples, got {t.size}")
    if np.ptp(y) == 0:
        return 0.0, 1.0
    slope, intercept = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(slope), 1.0 - ss_res / ss_tot
