import numpy as np
import pytest

from neupde.dictionary import DictionarySpec, term_count
from neupde.errors import DimensionMismatch
from neupde.network import (MlpParams, activation_eval, init_params, mlp_forward,
                            mlp_jacobian_input, mlp_vjp_params, param_count)


@pytest.mark.parametrize("n,h,o,total", [(9, 20, 3, 263), (3, 38, 3, 269), (3, 100, 3, 703),
                                          (4, 46, 3, 371), (69, 4, 3, 295), (69, 5, 3, 368)])
def test_param_count_reference_sizes(n, h, o, total):
    assert param_count(n, h, o) == total


def test_param_count_from_dictionaries():
    assert param_count(term_count(DictionarySpec(3, 2)), 20, 3) == 263
    assert param_count(term_count(DictionarySpec(3, 4, include_time=True)), 4, 3) == 295


def test_param_count_formula():
    assert param_count(9, 20, 3) == 20 * 9 + 20 + 3 * 20 + 3


def test_activation_examples():
    s, _ = activation_eval("elu", np.array([-np.log(2.0)]))
    assert s[0] == pytest.approx(-0.5, abs=1e-15)
    s, _ = activation_eval("paper_elu", np.array([np.log(2.0)]))
    assert s[0] == pytest.approx(1.0, abs=1e-15)
    s, ds = activation_eval("tanh", np.array([0.0]))
    assert (s[0], ds[0]) == (0.0, 1.0)


@pytest.mark.parametrize("kind", ["tanh", "elu", "paper_elu"])
def test_activation_derivative(kind):
    x = np.linspace(-2, 2, 41) + 1e-3  # avoid the kink at 0
    _, ds = activation_eval(kind, x)
    h = 1e-6
    fd = (activation_eval(kind, x + h)[0] - activation_eval(kind, x - h)[0]) / (2 * h)
    np.testing.assert_allclose(ds, fd, atol=1e-7)


def test_flatten_roundtrip_order():
    p = init_params(4, 3, 2, seed=1)
    theta = p.flatten()
    assert theta.size == p.size == param_count(4, 3, 2)
    np.testing.assert_array_equal(theta[:12], p.A1.ravel())
    np.testing.assert_array_equal(theta[12:18], p.A2.ravel())
    q = MlpParams.unflatten(theta, 4, 3, 2)
    np.testing.assert_array_equal(q.flatten(), theta)
    with pytest.raises(DimensionMismatch):
        MlpParams.unflatten(theta[:-1], 4, 3, 2)


def test_init_is_seeded():
    np.testing.assert_array_equal(init_params(5, 4, 3, seed=7).flatten(),
                                  init_params(5, 4, 3, seed=7).flatten())


@pytest.mark.parametrize("kind", ["tanh", "elu"])
def test_jacobian_and_vjp_finite_differences(kind):
    rng = np.random.default_rng(0)
    p = init_params(4, 5, 3, kind, seed=2)
    p.b1[:] = rng.normal(size=5)
    z, w, h = rng.uniform(-1, 1, 4), rng.normal(size=3), 1e-6
    J = mlp_jacobian_input(p, z)
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        np.testing.assert_allclose(J[:, j], (mlp_forward(p, z + e) - mlp_forward(p, z - e)) / (2 * h),
                                   atol=1e-8)
    g = mlp_vjp_params(p, z, w).flatten()
    theta = p.flatten()
    for j in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        fp = w @ mlp_forward(MlpParams.unflatten(tp, 4, 5, 3, kind), z)
        fm = w @ mlp_forward(MlpParams.unflatten(tm, 4, 5, 3, kind), z)
        assert g[j] == pytest.approx((fp - fm) / (2 * h), abs=1e-7)


def test_shape_errors():
    p = init_params(4, 3, 2)
    with pytest.raises(DimensionMismatch):
        mlp_forward(p, np.zeros(5))
    with pytest.raises(ValueError):
        init_params(0, 3, 2)
