import numpy as np
import pytest

from neupde.gradient import (LossSpec, Windows, adjoint_gradient, bptt_gradient, grad_check,
                             objective)
from neupde.odeint import SolverConfig

from conftest import random_windows, tiny_field

RK4 = SolverConfig("rk4", 1)


def _zero_output(field):
    theta = field.theta.copy()
    n, h, o = field.params.shape
    theta[h * n:h * n + o * h] = 0.0
    theta[-o:] = 0.0
    return field.with_theta(theta)


def test_objective_zero_for_static_field_and_constant_targets():
    f = _zero_output(tiny_field())
    w = Windows(np.array([[0.0, 0.1, 0.2]]), np.tile([0.5, -0.5], (1, 3, 1)))
    loss, pred = objective(f, w, RK4, LossSpec(0.0, 1e-3))
    assert loss == 0.0
    np.testing.assert_array_equal(pred, w.targets)


def test_l1_term_value():
    f = _zero_output(tiny_field())
    w = Windows(np.array([[0.0, 0.1]]), np.zeros((1, 2, 2)))
    base, _ = objective(f, w, RK4, LossSpec())
    reg, _ = objective(f, w, RK4, LossSpec(beta1=1e-4))
    assert reg - base == pytest.approx(1e-4 * np.abs(f.theta).sum(), rel=1e-12)


def test_zero_gradient_at_exact_fit():
    f = tiny_field()
    w = random_windows()
    _, pred = objective(f, w, RK4, LossSpec())
    exact = Windows(w.times, pred)
    np.testing.assert_array_equal(bptt_gradient(f, exact, RK4, LossSpec()), 0.0)


def test_l1_subgradient_is_sign():
    f = tiny_field()
    w = random_windows()
    g0 = bptt_gradient(f, w, RK4, LossSpec())
    g1 = bptt_gradient(f, w, RK4, LossSpec(beta1=0.25))
    np.testing.assert_allclose(g1 - g0, 0.25 * np.sign(f.theta), atol=1e-15)


def test_smoothness_gradient_vanishes_for_constant_prediction():
    f = _zero_output(tiny_field())
    w = random_windows()
    _, pred = objective(f, w, RK4, LossSpec())
    exact = Windows(w.times, pred)
    np.testing.assert_array_equal(bptt_gradient(f, exact, RK4, LossSpec(0.0, 0.5)), 0.0)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("beta2", [0.0, 1e-2])
def test_bptt_matches_finite_differences(seed, beta2):
    f = tiny_field(seed=seed)
    w = random_windows(seed=seed, k=2, batch=2)
    rep = grad_check(f, w, SolverConfig("rk4", 2), LossSpec(0.0, beta2), step=1e-6)
    assert rep["worst_rel_err"] <= 1e-6


def test_bptt_time_dependent_linear_field():
    f = tiny_field(include_time=True, linear=True, scale=1.5)
    rep = grad_check(f, random_windows(k=3), RK4, LossSpec(1e-4, 1e-5))
    assert rep["worst_rel_err"] <= 1e-6


def test_grad_check_flags_corrupted_entry():
    f = tiny_field()
    w = random_windows()
    g = bptt_gradient(f, w, RK4, LossSpec())
    j = int(np.argmax(np.abs(g)))
    g[j] *= 2.0
    rep = grad_check(f, w, RK4, LossSpec(), grad=g)
    assert rep["index"] == j and rep["worst_rel_err"] >= 0.1


def test_adjoint_converges_to_bptt():
    f = tiny_field(seed=3)
    w = random_windows(seed=3, k=2)
    ref = bptt_gradient(f, w, SolverConfig("rk4", 64), LossSpec())
    errs = []
    for s in (5, 10, 20, 40):
        g = adjoint_gradient(f, w, SolverConfig("rk4", 64), LossSpec(), adjoint_substeps=s)
        errs.append(np.linalg.norm(g - ref) / np.linalg.norm(ref))
    assert errs[-1] <= 1e-3
    for a, b in zip(errs, errs[1:]):
        assert b <= 0.6 * a


def test_adjoint_zero_dynamics_accumulates_jumps():
    # with a zero field the states never move and only the output-layer bias
    # gradient, sum of the integrated costate, is nonzero
    f = _zero_output(tiny_field())
    w = random_windows(k=3)
    g_adj = adjoint_gradient(f, w, RK4, LossSpec(), adjoint_substeps=4)
    g_bp = bptt_gradient(f, w, RK4, LossSpec())
    np.testing.assert_allclose(g_adj, g_bp, rtol=1e-12, atol=1e-14)


def test_engines_are_pure():
    f = tiny_field()
    w = random_windows()
    theta = f.theta.copy()
    targets = w.targets.copy()
    a = bptt_gradient(f, w, RK4, LossSpec(1e-4, 1e-5))
    b = bptt_gradient(f, w, RK4, LossSpec(1e-4, 1e-5))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(f.theta, theta)
    np.testing.assert_array_equal(w.targets, targets)
