import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softrod.dynamics import RodParams, initial_state, rotational_rhs
from softrod.grid import GridSpec, differentiation_matrix
from softrod.inner import InnerGains, compute_mc, damping_constant_bound, rotation_error
from softrod.outer import OuterSolution


def _outer(theta_star):
    n = theta_star.size
    return OuterSolution(theta_star, np.ones(n), np.ones(n), 0.0, 0)


def _random_case(seed, N=11):
    rng = np.random.default_rng(seed)
    grid = GridSpec(0.5, N)
    state = initial_state(grid)
    state.p[1:] += 0.05 * rng.standard_normal((N - 1, 2))
    state.v[1:] = rng.standard_normal((N - 1, 2))
    state.theta[1:] = rng.uniform(-1, 1, N - 1)
    state.w[1:] = rng.standard_normal(N - 1)
    theta_star = np.concatenate([[0.0], rng.uniform(-1, 1, N - 1)])
    return grid, state, theta_star, rng


class TestGains:
    @pytest.mark.parametrize("kw", [{"k_u": 0.0}, {"k_w": -1.0}, {"k_theta": np.array([1.0, 0.0])}])
    def test_rejects_non_positive(self, kw):
        with pytest.raises(ValueError):
            InnerGains(**kw)


class TestCompute:
    def test_zero_at_rest(self):
        grid = GridSpec()
        ctrl = compute_mc(initial_state(grid), _outer(np.zeros(grid.N)), np.zeros(grid.N), np.zeros(grid.N),
                          InnerGains(), RodParams())
        np.testing.assert_allclose(ctrl.m_c, 0.0, atol=1e-14)
        np.testing.assert_allclose(ctrl.m_c_s, 0.0, atol=1e-14)

    @given(st.integers(0, 10_000), st.sampled_from([5, 11, 21]), st.floats(0.1, 10.0))
    def test_cancellation_identity(self, seed, N, rho_J):
        grid, state, theta_star, rng = _random_case(seed, N)
        params = RodParams(rho_J=rho_J)
        gains = InnerGains(k_u=rng.uniform(0.1, 2.0, N), k_w=2.0, k_theta=4.0)
        th_t, th_tt = rng.standard_normal(N), rng.standard_normal(N)
        ctrl = compute_mc(state, _outer(theta_star), th_t, th_tt, gains, params)
        err, err_s, err_t = rotation_error(state, _outer(theta_star), th_t)
        A = differentiation_matrix(grid)
        expected = A @ (gains.k_u * err_s) - gains.k_w * err_t - gains.k_theta * err
        got = rotational_rhs(state, params, ctrl) - th_tt
        assert np.max(np.abs(got - expected)) <= 1e-10 * max(1.0, np.max(np.abs(th_tt)))

    @given(st.integers(0, 10_000))
    def test_tip_moment_matches_boundary_condition(self, seed):
        grid, state, theta_star, rng = _random_case(seed)
        params = RodParams(rho_J=2.0)
        ctrl = compute_mc(state, _outer(theta_star), rng.standard_normal(grid.N), rng.standard_normal(grid.N),
                          InnerGains(), params)
        theta_s_tip = differentiation_matrix(grid)[-1] @ state.theta
        assert ctrl.m_c[-1] == pytest.approx(params.rho_J * params.K4 * theta_s_tip, abs=1e-12)

    @given(st.integers(0, 10_000), st.floats(0.2, 5.0))
    def test_linear_in_rho_J(self, seed, scale):
        grid, state, theta_star, rng = _random_case(seed)
        args = (state, _outer(theta_star), rng.standard_normal(grid.N), rng.standard_normal(grid.N), InnerGains())
        base = compute_mc(*args, RodParams(rho_J=1.0))
        scaled = compute_mc(*args, RodParams(rho_J=scale))
        np.testing.assert_allclose(scaled.m_c, scale * base.m_c, rtol=1e-12, atol=1e-12)

    def test_sine_error_base_moment(self):
        # theta~ = alpha sin(pi s / 2 ell) on a straight rod at rest, theta* = 0 static
        grid = GridSpec(0.5, 401)
        alpha, ell = 0.1, grid.ell
        state = initial_state(grid)
        state.theta = alpha * np.sin(np.pi * grid.s / (2 * ell))
        gains, params = InnerGains(), RodParams()
        theta_s0 = alpha * np.pi / (2 * ell)
        integral = -gains.k_theta * alpha * 2 * ell / np.pi
        # switch the shear torque off so only the closed-form terms remain
        straight = compute_mc(state, _outer(np.zeros(grid.N)), np.zeros(grid.N), np.zeros(grid.N), gains,
                              RodParams(K5=1e-12))
        assert straight.m_c[0] == pytest.approx(params.rho_J * ((params.K4 - gains.k_u) * theta_s0 + integral), rel=1e-4)

    def test_grid_mismatch(self):
        grid = GridSpec()
        with pytest.raises(ValueError):
            compute_mc(initial_state(grid), _outer(np.zeros(5)), np.zeros(11), np.zeros(11), InnerGains(), RodParams())


class TestBound:
    def test_reference_gains(self):
        assert damping_constant_bound(InnerGains(k_theta=4.0, k_w=2.0)) == 1.6

    def test_decreases_with_large_damping(self):
        values = [damping_constant_bound(InnerGains(k_theta=1.0, k_w=k)) for k in (10.0, 100.0, 1000.0)]
        assert values[0] > values[1] > values[2]
        assert values[-1] == pytest.approx(4.0 / 1000.0, rel=1e-3)

    def test_uses_the_infimum(self):
        gains = InnerGains(k_theta=np.array([1.0, 4.0, 4.0]), k_w=2.0)
        assert damping_constant_bound(gains) == damping_constant_bound(InnerGains(k_theta=1.0, k_w=2.0))
