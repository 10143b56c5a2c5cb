import logging

import numpy as np
import pytest

from neupde.baselines import (RegressionProblem, build_problem, estimate_derivatives, lasso,
                              lasso_debias, lasso_objective, read_coefficients, stlsq,
                              write_coefficients)
from neupde.dictionary import DictionarySpec
from neupde.errors import SingularSystem, TooShort
from neupde.odeint import Trajectory
from neupde.systems import GeneratorConfig, generate

LORENZ_TRUE = {("x1", 0): -10.0, ("x2", 0): 10.0, ("x1", 1): 28.0, ("x2", 1): -1.0,
               ("x1*x3", 1): -1.0, ("x3", 2): -8.0 / 3.0, ("x1*x2", 2): 1.0}


def test_derivatives_exact_on_quadratics():
    ts = np.linspace(0, 1, 11)
    tr = Trajectory(ts, np.column_stack([ts ** 2, 3 * ts]))
    np.testing.assert_allclose(estimate_derivatives(tr), np.column_stack([2 * ts, 3 + 0 * ts]),
                               atol=1e-12)
    with pytest.raises(TooShort):
        estimate_derivatives(Trajectory([0.0, 1.0], [[0.0], [1.0]]))


@pytest.fixture(scope="module")
def lorenz_problem():
    clean, _ = generate(GeneratorConfig("lorenz", N=2500, fine_substeps=10))
    return build_problem(clean, DictionarySpec(3, 2))


def test_stlsq_recovers_lorenz(lorenz_problem):
    Xi = stlsq(lorenz_problem, 0.5)
    names = lorenz_problem.names
    expect = np.zeros_like(Xi)
    for (name, k), v in LORENZ_TRUE.items():
        expect[names.index(name), k] = v
    np.testing.assert_array_equal(Xi != 0, expect != 0)
    np.testing.assert_allclose(Xi, expect, atol=1e-2)


def test_stlsq_exact_on_noiseless_linear():
    rng = np.random.default_rng(0)
    Theta = rng.normal(size=(50, 4))
    xi = np.array([1.5, 0.0, -2.0, 0.0])
    out = stlsq(RegressionProblem(Theta, Theta @ xi), 0.1)
    np.testing.assert_allclose(out[:, 0], xi, atol=1e-12)


def test_stlsq_rank_deficient(caplog):
    Theta = np.ones((10, 2))
    p = RegressionProblem(Theta, np.full(10, 2.0))
    with caplog.at_level(logging.WARNING):
        out = stlsq(p, 0.1)
    assert "rank-deficient" in caplog.text
    np.testing.assert_allclose(out[:, 0], [1.0, 1.0])
    with pytest.raises(SingularSystem):
        stlsq(p, 0.1, strict=True)


def test_lasso_objective_monotone_and_gap():
    rng = np.random.default_rng(1)
    Theta = rng.normal(size=(80, 10))
    y = Theta[:, 2] * 3 - Theta[:, 7] + 0.1 * rng.normal(size=80)
    xi, hist, ok, _ = lasso(Theta, y, 0.1)
    assert ok
    assert np.all(np.diff(hist) <= 1e-12)
    assert hist[-1] == pytest.approx(lasso_objective(Theta, y, xi, 0.1))


def test_lasso_large_lambda_gives_zero():
    rng = np.random.default_rng(2)
    Theta = rng.normal(size=(30, 5))
    y = rng.normal(size=30)
    lam = np.max(np.abs(Theta.T @ y)) / 30 * 1.01
    xi, _, _, _ = lasso(Theta, y, lam)
    np.testing.assert_array_equal(xi, 0.0)


def test_debias_keeps_support():
    rng = np.random.default_rng(3)
    Theta = rng.normal(size=(100, 12))
    Y = np.column_stack([Theta[:, 0] - 2 * Theta[:, 5], 0.5 * Theta[:, 3]]) \
        + 0.05 * rng.normal(size=(100, 2))
    for lam in (0.01, 0.05, 0.2):
        Xi, info = lasso_debias(RegressionProblem(Theta, Y), lam)
        assert np.all((Xi != 0) <= info.support)
        assert all(g >= -1e-10 for g in info.duality_gap)
    Xi, _ = lasso_debias(RegressionProblem(Theta, Y), 0.05)
    assert abs(Xi[5, 0] + 2.0) < 0.05


def test_spiral_lasso_support():
    clean, _ = generate(GeneratorConfig("spiral", N=3000, fine_substeps=10, noise_sigma=0.0))
    spec = DictionarySpec(3, 4, include_time=True)
    p = build_problem(clean, spec, constant=True)
    Xi, _ = lasso_debias(p, 0.01, max_iters=20000)
    assert Xi[p.names.index("x2^3"), 0] == pytest.approx(2.0, abs=0.05)
    assert Xi[p.names.index("x1^3"), 1] == pytest.approx(-2.0, abs=0.05)


def test_coefficients_roundtrip(tmp_path):
    Xi = np.array([[1.0 / 3.0, 0.0], [0.0, -2.5e-17]])
    write_coefficients(tmp_path / "c.csv", Xi, ["x1", "x2"])
    names, back, comps = read_coefficients(tmp_path / "c.csv")
    assert names == ["x1", "x2"] and comps == ["dx1", "dx2"]
    np.testing.assert_array_equal(back, Xi)
