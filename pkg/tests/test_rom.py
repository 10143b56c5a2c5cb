import numpy as np
import pytest
from scipy.linalg import expm

from neupde.errors import DimensionMismatch, RankTooLarge
from neupde.odeint import FunctionField, SolverConfig, Trajectory, integrate
from neupde.pde import FieldSeries, Grid2D
from neupde.rom import (RomConfig, RomSynthConfig, make_rom_snapshots, project, reconstruct,
                        rel_l2_terminal, snapshot_matrix, svd_truncate, train_rom)
from neupde.train import TrainConfig, full_data_mse


def _low_rank(m=64, n=50, r=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(m, r)) @ rng.normal(size=(r, n))


def test_exact_rank_reconstruction_and_orthonormality():
    X = _low_rank()
    b = svd_truncate(X, 4)
    np.testing.assert_allclose(b.Ur @ (b.Ur.T @ X), X, atol=1e-10)
    np.testing.assert_allclose(b.Ur.T @ b.Ur, np.eye(4), atol=1e-10)
    assert np.all(np.diff(b.singular_values) <= 0) and np.all(b.singular_values >= 0)


def test_diagonal_singular_values():
    b = svd_truncate(np.diag([1.0, -5.0, 3.0]), 3)
    np.testing.assert_allclose(b.singular_values, [5.0, 3.0, 1.0])


@pytest.mark.parametrize("r", [1, 5, 20])
def test_eckart_young(r):
    X = np.random.default_rng(r).normal(size=(64, 50))
    b = svd_truncate(X, r)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    approx = b.Ur @ np.diag(b.singular_values) @ Vt[:r]
    assert np.linalg.norm(X - approx) == pytest.approx(np.sqrt(np.sum(s[r:] ** 2)), abs=1e-10)


def test_rank_too_large():
    with pytest.raises(RankTooLarge):
        svd_truncate(np.ones((5, 3)), 4)
    with pytest.raises(RankTooLarge):
        svd_truncate(np.ones((5, 3)), 0)


def test_project_reconstruct():
    X = _low_rank(m=36, n=10, r=3)
    b = svd_truncate(X, 3, shape=(6, 6))
    alpha = project(b, X)
    np.testing.assert_allclose(reconstruct(b, alpha).reshape(10, 36).T, X, atol=1e-10)
    e1 = np.tile(b.Ur[:, :1], (1, 4))
    np.testing.assert_allclose(project(b, e1).states, np.tile([1.0, 0, 0], (4, 1)), atol=1e-12)
    np.testing.assert_array_equal(reconstruct(b, np.zeros((2, 3))), 0.0)


def test_projection_non_expansive():
    X = np.random.default_rng(7).normal(size=(40, 12))
    b = svd_truncate(X, 5)
    a = project(b, X).states
    assert np.all(np.linalg.norm(a, axis=1) <= np.linalg.norm(X, axis=0) + 1e-12)


def test_reconstruct_to_field_series():
    g = Grid2D.unit(6, 6)
    X = _low_rank(m=36, n=8, r=2)
    b = svd_truncate(X, 2, grid=g)
    out = reconstruct(b, project(b, X, np.linspace(0, 1, 8)))
    assert isinstance(out, FieldSeries) and out.values.shape == (8, 6, 6)
    with pytest.raises(DimensionMismatch):
        reconstruct(b, np.zeros((3, 4)))


def test_rel_l2_terminal():
    truth = np.random.default_rng(1).normal(size=(5, 4, 4))
    pred = truth + 0.01 * np.random.default_rng(2).normal(size=truth.shape)
    expect = np.sqrt(np.sum((pred[-1] - truth[-1]) ** 2) / np.sum(truth[-1] ** 2))
    assert rel_l2_terminal(pred, truth) == pytest.approx(expect, rel=1e-14)


def test_snapshot_matrix_columns():
    vals = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
    S = snapshot_matrix(vals)
    assert S.shape == (12, 2)
    np.testing.assert_array_equal(S[:, 1], vals[1].ravel())


def _linear_data(jitter=False):
    A = np.array([[-0.1, -1.0], [1.0, -0.1]])
    ts = np.linspace(0, 10, 101)
    if jitter:
        ts[1:-1] += np.random.default_rng(0).uniform(-0.03, 0.03, 99)
    tr = integrate(FunctionField(lambda t, X: X @ A.T), [1.0, 0.0], ts, SolverConfig("rk4", 20))
    return A, tr


def test_linear_generator_recovered():
    A, tr = _linear_data()
    cfg = TrainConfig(beta1=0.0, beta2=0.0, learning_rate=0.02, window_length=5, batch_size=16,
                      iterations=1500, eval_every=0, seed=0)
    field, _ = train_rom(tr, config=RomConfig(closure=False), train_config=cfg)
    dt = tr.timestamps[1] - tr.timestamps[0]
    np.testing.assert_allclose(expm(field.linear_part * dt), expm(A * dt), atol=1e-3)
    assert field.n_params == 4


def test_jittered_stamps_accepted():
    _, tr = _linear_data(jitter=True)
    cfg = TrainConfig(iterations=5, window_length=3, batch_size=4, eval_every=0)
    _, hist = train_rom(tr, train_config=cfg)
    assert len(hist) == 5


def test_synthetic_snapshots():
    ts, fields, coeffs = make_rom_snapshots(RomSynthConfig(N=50, tN=5.0))
    assert fields.shape == (51, 16, 16) and coeffs.shape == (51, 3)
    b = svd_truncate(snapshot_matrix(fields), 3)
    np.testing.assert_allclose(reconstruct(b, project(b, snapshot_matrix(fields))),
                               snapshot_matrix(fields).T, atol=1e-10)


@pytest.mark.slow
def test_closure_beats_linear():
    ts, fields, _ = make_rom_snapshots()
    b = svd_truncate(snapshot_matrix(fields), 3)
    alpha = project(b, snapshot_matrix(fields), ts)
    cfg = TrainConfig(learning_rate=0.01, window_length=5, batch_size=16, iterations=400,
                      eval_every=0, seed=0)
    lin, _ = train_rom(alpha, config=RomConfig(closure=False), train_config=cfg)
    clo, _ = train_rom(alpha, config=RomConfig(closure=True), train_config=cfg)
    s = SolverConfig("rk4", 1)
    assert full_data_mse(clo, alpha, 5, s) < full_data_mse(lin, alpha, 5, s)
