import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softrod.analysis import (
    check_stability_conditions,
    cross_gain_feasible,
    error_norms,
    fit_decay_rate,
    lyapunov_inner,
    lyapunov_outer,
    monitor_matrix_spd,
    outer_forcing,
    select_cross_gain,
    stiffness_mismatch,
    stiffness_mismatch_rate,
)
from softrod.dynamics import RodParams, initial_state
from softrod.grid import GridSpec
from softrod.inner import InnerGains
from softrod.outer import OuterGains, OuterSolution
from softrod.trajectory import DesiredTrajectory, make_bent_target

FINE = GridSpec(0.5, 2001)


def _outer(theta_star, kv=1.0):
    n = theta_star.size
    return OuterSolution(theta_star, np.full(n, kv), np.full(n, kv), 0.0, 0)


class TestLyapunovInner:
    def test_zero_error(self):
        state = initial_state(FINE)
        assert lyapunov_inner(state, _outer(np.zeros(FINE.N)), InnerGains(), 0.8, FINE) == 0.0

    def test_linear_error_closed_form(self):
        delta, ell = 0.2, FINE.ell
        state = initial_state(FINE)
        state.theta = delta * FINE.s / ell
        gains = InnerGains(k_u=0.5, k_theta=4.0)
        V1 = lyapunov_inner(state, _outer(np.zeros(FINE.N)), gains, 1.0, FINE)
        # the free-end row of theta~_s is zero, which costs O(ds)
        assert V1 == pytest.approx(0.5 * (gains.k_u * delta**2 / ell + 4 * delta**2 * ell / 3), rel=1e-3)

    @pytest.mark.parametrize("c", [0.0, 1.6, 2.0])
    def test_c_out_of_range(self, c):
        with pytest.raises(ValueError):
            lyapunov_inner(initial_state(FINE), _outer(np.zeros(FINE.N)), InnerGains(), c, FINE)

    @given(st.integers(0, 10_000), st.floats(0.01, 1.59))
    def test_non_negative(self, seed, c):
        rng = np.random.default_rng(seed)
        grid = GridSpec(0.5, 11)
        state = initial_state(grid)
        state.theta[1:] = rng.uniform(-2, 2, 10)
        state.w[1:] = rng.standard_normal(10) * 5
        assert lyapunov_inner(state, _outer(np.zeros(11)), InnerGains(), c, grid, rng.standard_normal(11)) >= 0.0


class TestLyapunovOuter:
    def test_zero_error(self):
        grid = GridSpec()
        state = initial_state(grid)
        V2, phi = lyapunov_outer(state, DesiredTrajectory.static(state.p), _outer(np.zeros(11)), OuterGains(), 0.5,
                                 RodParams().K3_diag, grid)
        assert V2 == 0.0 and phi == 0.0

    def test_linear_error_closed_form(self):
        delta, ell = 0.05, FINE.ell
        state = initial_state(FINE)
        traj = DesiredTrajectory.static(state.p.copy())
        state.p[:, 1] += delta * FINE.s / ell
        V2, _ = lyapunov_outer(state, traj, _outer(np.zeros(FINE.N)), OuterGains(), 0.5, RodParams().K3_diag, FINE)
        assert V2 == pytest.approx(0.5 * (delta**2 / ell + 4 * delta**2 * ell / 3), rel=1e-6)

    def test_rejects_infeasible_cross_gain(self):
        grid = GridSpec()
        state = initial_state(grid)
        with pytest.raises(ValueError):
            lyapunov_outer(state, DesiredTrajectory.static(state.p), _outer(np.zeros(11)), OuterGains(), 3.0,
                           RodParams().K3_diag, grid)


class TestCrossGain:
    def test_bisection_picks_half_the_supremum(self):
        kv = np.ones((11, 2))
        c1 = select_cross_gain(4 * np.eye(2), kv)
        # for scalar kv the supremum solves kv - c - c kv^2 / (4 kp) = 0
        assert c1 == pytest.approx(0.5 / (1 + 1 / 16), rel=1e-9)
        assert cross_gain_feasible(c1, 4 * np.eye(2), kv)
        assert not cross_gain_feasible(4 * c1, 4 * np.eye(2), kv)

    def test_limited_by_sqrt_Kp(self):
        assert select_cross_gain(0.04 * np.eye(2), np.full((3, 2), 100.0)) <= 0.1


class TestMismatch:
    def test_vanishes_when_aligned(self):
        th = np.linspace(0, 1, 11)
        np.testing.assert_allclose(stiffness_mismatch(th, th, [1.0, 1.5]), 0.0, atol=1e-15)

    @given(st.integers(0, 10_000))
    def test_eigenvalues_bounded(self, seed):
        rng = np.random.default_rng(seed)
        Phi = stiffness_mismatch(rng.uniform(-4, 4, 11), rng.uniform(-4, 4, 11), [1.0, 1.5])
        assert np.abs(np.linalg.eigvalsh(Phi)).max() <= 2 * 1.5 + 1e-12

    def test_rate_matches_finite_difference(self):
        rng = np.random.default_rng(2)
        th, th_t = rng.normal(size=6), rng.normal(size=6)
        ts, ts_t = rng.normal(size=6), rng.normal(size=6)
        h = 1e-6
        fd = (stiffness_mismatch(th + h * th_t, ts + h * ts_t, [1.0, 1.5])
              - stiffness_mismatch(th - h * th_t, ts - h * ts_t, [1.0, 1.5])) / (2 * h)
        np.testing.assert_allclose(stiffness_mismatch_rate(th, th_t, ts, ts_t, [1.0, 1.5]), fd, atol=1e-8)

    def test_monitor(self):
        Phi = np.zeros((4, 2, 2))
        assert monitor_matrix_spd(0.5, np.eye(2), Phi, Phi)
        assert not monitor_matrix_spd(0.5, np.eye(2), Phi, np.tile(2 * np.eye(2), (4, 1, 1)))

    def test_forcing_vanishes_when_aligned(self):
        grid = GridSpec()
        state = initial_state(grid)
        state.theta[1:] = 0.3
        psi = outer_forcing(state, make_bent_target(grid, 1.0), _outer(state.theta.copy()), RodParams())
        np.testing.assert_allclose(psi, 0.0, atol=1e-12)


class TestErrorNorms:
    def test_zero(self):
        grid = GridSpec()
        state = initial_state(grid)
        norms = error_norms(state, DesiredTrajectory.static(state.p), _outer(np.zeros(11)), grid)
        assert norms.as_tuple() == (0.0,) * 6

    def test_constant_offset(self):
        delta = 0.01
        state = initial_state(FINE)
        traj = DesiredTrajectory.static(state.p.copy())
        state.p[1:, 1] += delta
        norms = error_norms(state, traj, _outer(np.zeros(FINE.N)), FINE)
        assert norms.p_err_L2 == pytest.approx(delta * np.sqrt(FINE.ell), rel=1e-3)

    def test_linear_rotation_error(self):
        delta = 0.3
        state = initial_state(FINE)
        state.theta = delta * FINE.s / FINE.ell
        norms = error_norms(state, DesiredTrajectory.static(state.p), _outer(np.zeros(FINE.N)), FINE)
        assert norms.theta_err_Linf == pytest.approx(delta)
        assert norms.theta_err_s_L2 == pytest.approx(delta / np.sqrt(FINE.ell), rel=1e-9)

    @given(st.integers(0, 10_000), st.sampled_from([0.5, 2.0]))
    def test_homogeneous(self, seed, lam):
        rng = np.random.default_rng(seed)
        grid = GridSpec()
        ref = initial_state(grid)
        traj = DesiredTrajectory.static(ref.p)
        dp, dv = rng.normal(size=(11, 2)) * 0.01, rng.normal(size=(11, 2))
        dth, dw = rng.uniform(-0.5, 0.5, 11), rng.normal(size=11)

        def norms(scale):
            state = initial_state(grid)
            state.p += scale * dp
            state.v += scale * dv
            state.theta = scale * dth
            state.w = scale * dw
            return np.array(error_norms(state, traj, _outer(np.zeros(11)), grid).as_tuple())

        np.testing.assert_allclose(norms(lam), lam * norms(1.0), rtol=1e-10)


class TestDecayRate:
    def test_exact_exponential(self):
        t = np.linspace(0, 5, 100)
        rate, r2 = fit_decay_rate(np.column_stack([t, np.exp(-2 * t)]))
        assert rate == pytest.approx(-2.0, abs=1e-6) and r2 > 0.999999

    def test_constant(self):
        rate, r2 = fit_decay_rate([(t, 3.0) for t in range(20)])
        assert rate == 0.0

    def test_oscillating_decay(self):
        t = np.linspace(0, 10, 400)
        rate, _ = fit_decay_rate(np.column_stack([t, np.exp(-t) * (1 + 0.05 * np.sin(20 * t))]))
        assert rate == pytest.approx(-1.0, abs=0.05)

    def test_drops_tiny_values(self):
        t = np.arange(15.0)
        values = np.exp(-t)
        values[:5] = 0.0
        rate, _ = fit_decay_rate(np.column_stack([t, values]))
        assert rate == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            fit_decay_rate(np.column_stack([t[:9], values[5:14]]))

    @given(st.floats(-5, 5), st.floats(1e-3, 1e3))
    def test_recovers_planted_rate(self, rate, scale):
        t = np.linspace(0, 3, 50)
        got, r2 = fit_decay_rate(np.column_stack([t, scale * np.exp(rate * t)]))
        assert got == pytest.approx(rate, rel=1e-6, abs=1e-9)


class TestStabilityReport:
    def test_aligned_start(self):
        grid = GridSpec()
        state = initial_state(grid)
        report = check_stability_conditions(state, _outer(np.zeros(11)), InnerGains(), OuterGains(), RodParams(),
                                            make_bent_target(grid, 1.0))
        assert report.c_used == pytest.approx(0.8) and report.c_max == 1.6
        assert report.Kq_condition_ok and report.Phi_sup_norm == 0.0
        assert report.c1 > 0 and report.V2 > 0

    def test_flags_large_mismatch(self):
        grid = GridSpec()
        state = initial_state(grid)
        state.theta[1:] = np.pi / 2
        report = check_stability_conditions(state, _outer(np.zeros(11)), InnerGains(), OuterGains(K_q=0.2), RodParams())
        assert not report.Kq_condition_ok
        assert "not positive-definite" in report.notes
        assert report.c_used < report.c_max
