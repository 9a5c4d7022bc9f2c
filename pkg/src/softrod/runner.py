"""Closed-loop simulation driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    check_stability_conditions,
    error_norms,
    lyapunov_inner,
    lyapunov_outer,
    monitor_matrix_spd,
    outer_forcing,
    stiffness_mismatch,
    stiffness_mismatch_rate,
    StabilityReport,
    l2_norm,
)
from .config import ScenarioConfig
from .dynamics import IntegrationError, RodState, initial_state, rotational_rhs, step
from .grid import differentiation_matrix
from .inner import compute_mc, rotation_error
from .outer import (
    OuterConvergenceError,
    OuterHistory,
    OuterSolution,
    build_residual_fields,
    estimate_theta_star_derivatives,
    solve_outer,
)
from .trajectory import DesiredTrajectory, SwingingArc, curvature_for_tip_deflection, make_bent_target, regulate_tip

log = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_DEGRADED = 2
EXIT_INTEGRATION = 3
EXIT_CONFIG = 64

COLUMNS = (
    "t",
    "p_err_L2",
    "p_err_t_L2",
    "p_err_s_L2",
    "theta_err_Linf",
    "theta_err_t_Linf",
    "theta_err_s_L2",
    "V1",
    "V2",
    "psi_L2",
    "monitor_spd",
    "residual_norm",
    "iterations",
    "degraded",
    "cancellation_error",
)


@dataclass
class Snapshot:
    t: float
    s: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    theta_star: np.ndarray


@dataclass
class RunRecord:
    rows: list[dict] = field(default_factory=list)
    snapshots: list[Snapshot] = field(default_factory=list)
    report: StabilityReport | None = None
    status: int = EXIT_CLEAN
    degraded_steps: int = 0
    steps: int = 0
    max_cancellation_error: float = 0.0
    final_state: RodState | None = None
    failure: str | None = None
    outer_solutions: list[tuple[float, OuterSolution]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)


def target_curvature(config: ScenarioConfig) -> float:
    target = config.target
    if target.family == "rest":
        return 0.0
    if target.curvature is not None:
        return float(target.curvature)
    return curvature_for_tip_deflection(config.grid.ell, target.tip_deflection)


def make_target(config: ScenarioConfig):
    """Callable ``t -> DesiredTrajectory`` for the configured family."""
    grid = config.grid
    k = target_curvature(config)
    if config.target.family == "swing":
        return SwingingArc(grid, k, config.target.swing_amplitude, config.target.swing_omega)
    traj = make_bent_target(grid, k)
    return lambda t: traj


def cancellation_error(state, ctrl, sol, theta_star_t, theta_star_tt, config: ScenarioConfig) -> float:
    """Max-node gap between the closed rotational dynamics and the designed error equation."""
    gains = config.inner
    err, err_s, err_t = rotation_error(state, sol, theta_star_t)
    A = differentiation_matrix(state.grid)
    target = A @ (gains.k_u * err_s) - gains.k_w * err_t - gains.k_theta * err
    got = rotational_rhs(state, config.params, ctrl) - theta_star_tt
    return float(np.max(np.abs(got - target)))


def _initial_state(config: ScenarioConfig) -> RodState:
    state = initial_state(config.grid)
    amp = config.initial.theta_amplitude
    if amp:
        rng = np.random.default_rng(config.seed)
        state.theta[1:] = amp * rng.uniform(-1.0, 1.0, config.grid.N - 1)
    return state


def run_scenario(config: ScenarioConfig, *, keep_solutions: bool = False) -> RunRecord:
    """Integrate the closed loop for ``config.run.duration`` seconds.

    Rows are logged every ``output_stride`` steps (and at ``t = 0``); shape
    snapshots every ``snapshot_stride`` steps. ``record.status`` is one of the
    ``EXIT_*`` codes.
    """
    grid, params, run = config.grid, config.params, config.run
    target = make_target(config)
    state = _initial_state(config)
    history = OuterHistory()
    record = RunRecord()
    c_used = None
    c1 = None

    for n in range(run.n_steps + 1):
        base = target(state.t)
        traj = regulate_tip(base, state, config.target.blend_width) if config.target.regulate else base
        fields = build_residual_fields(state, traj, config.outer, params)
        try:
            sol = solve_outer(
                fields,
                history,
                grid,
                params.K3_matrix,
                run.tolerance,
                max_iter=run.max_iter,
                kv_max=run.kv_max,
                tikhonov=run.tikhonov,
            )
        except OuterConvergenceError as exc:
            sol = exc.solution
            record.degraded_steps += 1
        history.push(state.t, sol)
        if keep_solutions:
            record.outer_solutions.append((state.t, sol))
        th_t, th_tt = estimate_theta_star_derivatives(history, run.dt)
        ctrl = compute_mc(state, sol, th_t, th_tt, config.inner, params)
        cancel = cancellation_error(state, ctrl, sol, th_t, th_tt, config)
        record.max_cancellation_error = max(record.max_cancellation_error, cancel)

        if n == 0:
            record.report = check_stability_conditions(state, sol, config.inner, config.outer, params, traj, th_t)
            c_used = record.report.c_used
            c1 = record.report.c1 if record.report.c1 > 0 else 0.25 * float(np.sqrt(np.linalg.eigvalsh(config.outer.K_p).min()))
        if n % run.output_stride == 0:
            record.rows.append(_log_row(state, traj, sol, th_t, ctrl, cancel, c_used, c1, config))
        if n % run.snapshot_stride == 0:
            record.snapshots.append(Snapshot(state.t, grid.s.copy(), state.p.copy(), state.theta.copy(), sol.theta_star.copy()))
        if n == run.n_steps:
            break
        try:
            state = step(state, ctrl, params, run.dt)
        except IntegrationError as exc:
            record.status = EXIT_INTEGRATION
            record.failure = str(exc)
            record.final_state = state
            log.error("integration failure at t=%.6g: %s", state.t, exc)
            return record
        record.steps += 1

    record.final_state = state
    record.status = EXIT_DEGRADED if record.degraded_steps else EXIT_CLEAN
    return record


def _log_row(state, traj: DesiredTrajectory, sol: OuterSolution, th_t, ctrl, cancel, c_used, c1, config) -> dict:
    grid, params = config.grid, config.params
    norms = error_norms(state, traj, sol, grid, th_t)
    V1 = lyapunov_inner(state, sol, config.inner, c_used, grid, th_t)
    V2, _ = lyapunov_outer(state, traj, sol, config.outer, c1, params.K3_diag, grid, check_conditions=False)
    Phi = stiffness_mismatch(state.theta, sol.theta_star, params.K3_diag)
    Phi_t = stiffness_mismatch_rate(state.theta, state.w, sol.theta_star, th_t, params.K3_diag)
    row = {"t": state.t}
    row.update(zip(norms.FIELDS, norms.as_tuple()))
    row.update(
        V1=V1,
        V2=V2,
        psi_L2=l2_norm(outer_forcing(state, traj, sol, params), grid),
        monitor_spd=int(monitor_matrix_spd(c1, config.outer.K_q, Phi, Phi_t)),
        residual_norm=sol.residual_norm,
        iterations=sol.iterations,
        degraded=int(sol.degraded),
        cancellation_error=cancel,
    )
    log.debug("t=%.3f |p~|=%.3e res=%.2e it=%d degraded=%s", state.t, norms.p_err_L2, sol.residual_norm,
              sol.iterations, sol.degraded)
    return row
