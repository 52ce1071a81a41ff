import math

import numpy as np
import pytest

from depthnav.dynamics import (
    COV_DIM,
    ControlInput,
    DynamicsParams,
    MavState,
    NoiseConfig,
    dynamics_step,
    dynamics_step_vec,
    estimate_state,
    full_jacobians,
    jacobian,
    propagate_covariance,
    simulate_step,
)

PARAMS = DynamicsParams()
HOVER = MavState.hover([0.0, 0.0, 1.0])
ZERO_U = ControlInput()


def _random_state(rng) -> MavState:
    return MavState(rng.normal(size=3), rng.normal(scale=1.0, size=3),
                    rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                    rng.uniform(-math.pi, math.pi))


def _random_control(rng) -> ControlInput:
    return ControlInput(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                        rng.uniform(-1, 1), rng.uniform(-1.5, 1.5))


def test_hover_is_equilibrium():
    nxt = dynamics_step(HOVER, ZERO_U, 0.06)
    np.testing.assert_allclose(nxt.as_vector(), HOVER.as_vector(), atol=1e-12)


def test_small_pitch_gives_forward_acceleration():
    eps = 1e-4
    params = DynamicsParams(drag_coeff=0.0)
    x = MavState(np.zeros(3), np.zeros(3), pitch=eps)
    nxt = dynamics_step(x, ControlInput(pitch_cmd=eps), 0.01, params)
    assert nxt.velocity[0] == pytest.approx(params.gravity * eps * 0.01, rel=1e-6)


def test_first_order_pitch_response_matches_closed_form():
    dt = 0.01
    cmd = ControlInput(pitch_cmd=0.25)
    x = HOVER
    for step in range(1, 101):
        x = dynamics_step(x, cmd, dt)
        t = step * dt
        expected = 0.25 * (1.0 - math.exp(-t / PARAMS.tau_rp))
        if t >= 0.05:
            assert x.pitch == pytest.approx(expected, rel=0.02)


def test_attitude_clamped():
    x = HOVER
    for _ in range(400):
        x = dynamics_step(x, ControlInput(roll_cmd=1.0), 0.02)
    assert abs(x.roll) <= PARAMS.attitude_limit + 1e-12


def test_step_continuity():
    rng = np.random.default_rng(0)
    x = _random_state(rng)
    u = _random_control(rng)
    base = dynamics_step(x, u, 0.06).as_vector()
    bumped_vec = x.as_vector()
    bumped_vec[3] += 1e-9
    bumped = dynamics_step(MavState.from_vector(bumped_vec), u, 0.06).as_vector()
    assert np.max(np.abs(bumped - base)) < 1e-6


def test_drag_shrinks_horizontal_speed():
    x = MavState(np.zeros(3), np.array([2.0, -1.0, 0.0]))
    prev = np.linalg.norm(x.velocity[:2])
    for _ in range(100):
        x = dynamics_step(x, ZERO_U, 0.02)
        cur = np.linalg.norm(x.velocity[:2])
        assert cur <= prev + 1e-12
        prev = cur


def test_simulate_zero_noise_equals_deterministic():
    noise = NoiseConfig(process_cov=np.zeros((8, 8)))
    a = simulate_step(HOVER, ZERO_U, 0.06, noise, rng_seed=1)
    b = dynamics_step(HOVER, ZERO_U, 0.06)
    np.testing.assert_array_equal(a.as_vector(), b.as_vector())


def test_simulate_seed_determinism():
    noise = NoiseConfig()
    a = simulate_step(HOVER, ZERO_U, 0.06, noise, rng_seed=42)
    b = simulate_step(HOVER, ZERO_U, 0.06, noise, rng_seed=42)
    np.testing.assert_array_equal(a.as_vector(), b.as_vector())
    c = simulate_step(HOVER, ZERO_U, 0.06, noise, rng_seed=43)
    assert np.any(c.as_vector() != a.as_vector())


def test_simulate_noise_mean_is_zero():
    noise = NoiseConfig()
    base = dynamics_step(HOVER, ZERO_U, 0.06).as_vector()
    n = 10000
    delta = np.zeros((n, COV_DIM))
    for seed in range(n):
        delta[seed] = simulate_step(HOVER, ZERO_U, 0.06, noise,
                                    rng_seed=seed).as_vector()[:COV_DIM] - base[:COV_DIM]
    std_err = np.sqrt(np.diag(noise.process_cov) / n)
    assert np.all(np.abs(delta.mean(axis=0)) < 4.0 * std_err)


def test_estimate_state_zero_noise_is_truth():
    noise = NoiseConfig(estimator_cov=np.zeros((8, 8)))
    est = estimate_state(HOVER, noise, rng_seed=0)
    np.testing.assert_array_equal(est.state.as_vector(), HOVER.as_vector())


def test_estimate_state_reports_configured_covariance():
    noise = NoiseConfig()
    est = estimate_state(HOVER, noise, rng_seed=0)
    np.testing.assert_array_equal(est.gaussian.covariance, noise.estimator_cov)


def test_estimate_state_empirical_covariance():
    noise = NoiseConfig()
    n = 10000
    errs = np.zeros((n, COV_DIM))
    truth = HOVER.as_vector()[:COV_DIM]
    for seed in range(n):
        errs[seed] = estimate_state(HOVER, noise, seed).state.as_vector()[:COV_DIM] - truth
    emp = np.cov(errs.T)
    frob = np.linalg.norm(emp - noise.estimator_cov) / np.linalg.norm(noise.estimator_cov)
    assert frob < 0.10


def _finite_difference_jacobian(x, u, dt, h=1e-6):
    vec = x.as_vector()
    out = np.zeros((COV_DIM, COV_DIM))
    for j in range(COV_DIM):
        plus, minus = vec.copy(), vec.copy()
        plus[j] += h
        minus[j] -= h
        fp = dynamics_step_vec(plus, u.as_vector(), dt)
        fm = dynamics_step_vec(minus, u.as_vector(), dt)
        out[:, j] = (fp[:COV_DIM] - fm[:COV_DIM]) / (2 * h)
    return out


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(100):
        x = _random_state(rng)
        u = _random_control(rng)
        analytic = jacobian(x, u, 0.06)
        numeric = _finite_difference_jacobian(x, u, 0.06)
        worst = max(worst, np.max(np.abs(analytic - numeric)))
    assert worst <= 1e-5


def test_jacobian_position_velocity_block():
    f = jacobian(HOVER, ZERO_U, 0.06)
    np.testing.assert_array_equal(f[0:3, 3:6], 0.06 * np.eye(3))


def test_jacobian_hover_pitch_entry():
    f = jacobian(HOVER, ZERO_U, 0.06)
    assert f[3, 7] == pytest.approx(PARAMS.gravity * 0.06)


def test_control_jacobian_structure():
    _, b = full_jacobians(HOVER, ZERO_U, 0.06)
    assert b[5, 2] == pytest.approx(0.06 / PARAMS.tau_z)
    assert b[6, 0] == pytest.approx(0.06 / PARAMS.tau_rp)
    assert b[8, 3] == pytest.approx(0.06)


def test_propagate_identity_dynamics():
    # dt -> 0 limit: F -> I; with W = 0 the covariance must not move.
    gamma0 = np.diag(np.linspace(0.1, 0.8, COV_DIM))
    traj = [(HOVER, ZERO_U)] * 5
    out = propagate_covariance(gamma0, traj, np.zeros((COV_DIM, COV_DIM)), 1e-12)
    np.testing.assert_allclose(out[-1], gamma0, atol=1e-9)


def test_propagate_accumulates_process_noise():
    w = 1e-3 * np.eye(COV_DIM)
    traj = [(HOVER, ZERO_U)] * 10
    out = propagate_covariance(np.zeros((COV_DIM, COV_DIM)), traj, w, 1e-6)
    np.testing.assert_allclose(out[-1], 10 * w, rtol=1e-3)


def test_propagate_rejects_non_psd():
    bad = -np.eye(COV_DIM)
    with pytest.raises(ValueError):
        propagate_covariance(bad, [(HOVER, ZERO_U)], np.zeros((COV_DIM, COV_DIM)), 0.06)


def test_propagate_psd_and_symmetric_every_step():
    rng = np.random.default_rng(5)
    traj = [( _random_state(rng), _random_control(rng)) for _ in range(25)]
    w = np.diag(rng.uniform(1e-5, 1e-3, COV_DIM))
    gammas = propagate_covariance(1e-3 * np.eye(COV_DIM), traj, w, 0.06)
    for g in gammas:
        np.testing.assert_allclose(g, g.T, atol=1e-9)
        assert np.linalg.eigvalsh(g).min() > -1e-9


def test_position_covariance_trace_nondecreasing():
    traj = [(HOVER, ZERO_U)] * 25
    gammas = propagate_covariance(1e-4 * np.eye(COV_DIM), traj,
                                  NoiseConfig().process_cov, 0.06)
    traces = [np.trace(g[0:3, 0:3]) for g in gammas]
    assert all(b >= a - 1e-12 for a, b in zip(traces, traces[1:]))


def test_propagation_matches_particles():
    # Monte-Carlo oracle: push a particle cloud through the noisy
    # dynamics and compare its position covariance with the EKF's.
    rng = np.random.default_rng(2024)
    n, steps, dt = 100000, 25, 0.06
    noise = NoiseConfig()
    gamma0 = np.diag([1e-4] * 3 + [1e-4] * 3 + [1e-5] * 2)
    u = ControlInput(pitch_cmd=0.05)

    mean_traj = []
    x = HOVER
    for _ in range(steps):
        mean_traj.append((x, u))
        x = dynamics_step(x, u, dt)
    gammas = propagate_covariance(gamma0, mean_traj, noise.process_cov, dt)

    chol0 = np.linalg.cholesky(gamma0 + 1e-15 * np.eye(COV_DIM))
    cloud = np.tile(HOVER.as_vector(), (n, 1))
    cloud[:, :COV_DIM] += rng.standard_normal((n, COV_DIM)) @ chol0.T
    w_chol = np.linalg.cholesky(noise.process_cov + 1e-15 * np.eye(COV_DIM))
    for _ in range(steps):
        cloud = dynamics_step_vec(cloud, u.as_vector(), dt)
        cloud[:, :COV_DIM] += rng.standard_normal((n, COV_DIM)) @ w_chol.T
    emp = np.cov(cloud[:, 0:3].T)
    ekf = gammas[-1][0:3, 0:3]
    frob = np.linalg.norm(emp - ekf) / np.linalg.norm(ekf)
    assert frob < 0.15
