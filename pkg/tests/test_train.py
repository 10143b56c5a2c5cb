import numpy as np
import pytest

from neupde.errors import TooShort
from neupde.odeint import SolverConfig, Trajectory
from neupde.train import (AdamState, TrainConfig, adam_step, full_data_mse, sample_minibatch,
                          train_ode)

from conftest import tiny_field


def test_adam_zero_gradient_keeps_theta():
    theta = np.array([1.0, -2.0])
    new, st = adam_step(theta, np.zeros(2), AdamState.zeros(2), 0.1)
    np.testing.assert_array_equal(new, theta)
    assert st.step == 1


@pytest.mark.parametrize("g", [1e-6, 0.3, -50.0])
def test_adam_first_step_magnitude(g):
    new, _ = adam_step(np.zeros(1), np.array([g]), AdamState.zeros(1), 0.01)
    assert new[0] == pytest.approx(-0.01 * np.sign(g), rel=1e-2)


def test_adam_minimizes_quadratic():
    theta, st = np.array([1.0]), AdamState.zeros(1)
    for _ in range(100):
        theta, st = adam_step(theta, 2 * theta, st, 0.1)
    assert abs(theta[0]) < 0.05


def _traj(n=100, d=2):
    ts = np.linspace(0, 1, n)
    return Trajectory(ts, np.column_stack([np.sin(3 * ts), np.cos(2 * ts)])[:, :d])


def test_single_possible_window():
    picks = sample_minibatch(np.random.default_rng(0), _traj(11), 10, 3)
    assert picks == [(0, 0)] * 3
    with pytest.raises(TooShort):
        sample_minibatch(np.random.default_rng(0), _traj(10), 10, 1)


def test_disjoint_windows():
    picks = sample_minibatch(np.random.default_rng(1), _traj(100), 3, 16, overlap=False)
    assert len(picks) == 16
    covered = [i for _, s in picks for i in range(s, s + 4)]
    assert len(set(covered)) == 16 * 4
    assert all(0 <= i and i + 3 < 100 for _, i in picks)


def test_disjoint_across_series():
    data = [_traj(10), _traj(10), _traj(10)]
    picks = sample_minibatch(np.random.default_rng(2), data, 2, 9, overlap=False)
    for s in range(3):
        starts = sorted(i for ss, i in picks if ss == s)
        assert all(b - a >= 3 for a, b in zip(starts, starts[1:]))
    with pytest.raises(TooShort):
        sample_minibatch(np.random.default_rng(2), data, 2, 10, overlap=False)


def test_sampling_reproducible():
    a = sample_minibatch(np.random.default_rng(5), _traj(), 4, 8)
    b = sample_minibatch(np.random.default_rng(5), _traj(), 4, 8)
    assert a == b


def _cfg(**kw):
    base = dict(learning_rate=0.02, window_length=3, batch_size=4, iterations=30, seed=1,
                solver=SolverConfig("rk4", 1), eval_every=10)
    base.update(kw)
    return TrainConfig(**base)


def test_training_is_deterministic_and_pure():
    data = _traj(40)
    f0 = tiny_field(h=4)
    theta0 = f0.theta.copy()
    fa, ha = train_ode(data, f0, _cfg())
    fb, hb = train_ode(data, f0, _cfg())
    assert ha == hb
    np.testing.assert_array_equal(fa.theta, fb.theta)
    np.testing.assert_array_equal(f0.theta, theta0)


def test_training_reduces_misfit():
    data = _traj(40)
    f0 = tiny_field(h=4)
    s = SolverConfig("rk4", 1)
    f, hist = train_ode(data, f0, _cfg(iterations=150))
    assert full_data_mse(f, data, 3, s) < 0.5 * full_data_mse(f0, data, 3, s)
    assert hist[-1]["full_mse"] is not None and not any(h["skipped"] for h in hist)


def test_adjoint_engine_trains():
    data = _traj(40)
    f, hist = train_ode(data, tiny_field(h=4), _cfg(engine="adjoint", beta2=0.0, iterations=10))
    assert all(np.isfinite(h["loss"]) for h in hist)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(window_length=0)
    with pytest.raises(ValueError):
        TrainConfig(engine="sgd")
