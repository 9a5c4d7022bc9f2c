"""Split the residual velocity error into axial and normal parts over a run.

The moment input steers the normal (bending) motion directly but reaches the
axial motion only through curvature, so whatever axial energy the transient
leaves behind decays slowly. This script shows how the late-time velocity
error divides between the two directions.

    python scripts/velocity_split.py [--duration 10]
"""
import argparse

import numpy as np

from softrod.config import load_config
from softrod.dynamics import initial_state, step
from softrod.grid import rotate_T
from softrod.inner import compute_mc
from softrod.outer import (
    OuterConvergenceError,
    OuterHistory,
    build_residual_fields,
    estimate_theta_star_derivatives,
    solve_outer,
)
from softrod.runner import make_target
from softrod.trajectory import regulate_tip


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--duration", type=float, default=10.0)
    args = parser.parse_args()
    config = load_config(None, [f"run.duration={args.duration!r}"])
    grid, params, run = config.grid, config.params, config.run
    target = make_target(config)
    state, history = initial_state(grid), OuterHistory()
    print(f"{'t':>6} {'axial rms':>10} {'normal rms':>10}")
    for n in range(run.n_steps):
        traj = regulate_tip(target(state.t), state, config.target.blend_width)
        fields = build_residual_fields(state, traj, config.outer, params)
        try:
            sol = solve_outer(fields, history, grid, params.K3_matrix, run.tolerance)
        except OuterConvergenceError as exc:
            sol = exc.solution
        history.push(state.t, sol)
        th_t, th_tt = estimate_theta_star_derivatives(history, run.dt)
        state = step(state, compute_mc(state, sol, th_t, th_tt, config.inner, params), params, run.dt)
        if (n + 1) % 200 == 0:
            local = rotate_T(state.theta, state.v - traj.p_star_t)
            rms = np.sqrt(np.mean(local[1:] ** 2, axis=0))
            print(f"{state.t:6.2f} {rms[1]:10.3e} {rms[0]:10.3e}")


if __name__ == "__main__":
    main()
