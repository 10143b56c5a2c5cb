import json

import numpy as np
import pytest

from neupde.io import (export_field_csv, load_checkpoint, read_field_series, read_trajectory_csv,
                       save_checkpoint, write_field_series, write_trajectory_csv)
from neupde.odeint import SolverConfig, Trajectory, integrate
from neupde.pde import FieldSeries, Grid2D, make_pde_model
from neupde.train import TrainConfig

from conftest import tiny_field


def test_trajectory_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tr = Trajectory(np.cumsum(rng.uniform(0.1, 1, 7)), rng.normal(size=(7, 3)) * 1e5)
    p = tmp_path / "t.csv"
    write_trajectory_csv(p, tr)
    assert p.read_text().splitlines()[0] == "t,x1,x2,x3"
    back = read_trajectory_csv(p)
    np.testing.assert_array_equal(back.timestamps, tr.timestamps)
    np.testing.assert_array_equal(back.states, tr.states)


def test_trajectory_csv_header_check(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,x1\n0,1\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(p)


def test_field_series_roundtrip(tmp_path):
    g = Grid2D(5, 4, 0.2, 0.25)
    rng = np.random.default_rng(1)
    a = FieldSeries(0.5 + 1.5e-5 * np.arange(3), rng.normal(size=(3, 5, 4)), g)
    b = FieldSeries(np.arange(2.0), rng.normal(size=(2, 5, 4)), g)
    p = tmp_path / "f.field"
    write_field_series(p, [a, b])
    assert p.read_bytes().startswith(b"NEUPDE-FIELD v1 3 5 4 ")
    back = read_field_series(p)
    assert len(back) == 2
    np.testing.assert_array_equal(back[0].values, a.values)
    np.testing.assert_allclose(back[0].timestamps, a.timestamps, rtol=1e-13)
    np.testing.assert_array_equal(back[1].values, b.values)
    assert (back[0].grid.hx, back[0].grid.hy) == (0.2, 0.25)


def test_field_series_rejects_nonuniform_and_truncated(tmp_path):
    g = Grid2D(3, 3, 1.0, 1.0)
    with pytest.raises(ValueError):
        write_field_series(tmp_path / "x", FieldSeries([0.0, 1.0, 3.0], np.zeros((3, 3, 3)), g))
    p = tmp_path / "t.field"
    write_field_series(p, FieldSeries([0.0, 1.0], np.zeros((2, 3, 3)), g))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_field_series(p)


def test_export_field_csv(tmp_path):
    g = Grid2D.unit(4, 3)
    vals = np.arange(24, dtype=float).reshape(2, 4, 3)
    export_field_csv(tmp_path / "e.csv", FieldSeries([0.0, 1.0], vals, g), stamp=1)
    data = np.loadtxt(tmp_path / "e.csv", delimiter=",", skiprows=1)
    assert data.shape == (12, 3)
    np.testing.assert_array_equal(data[:, 2], vals[1].ravel())


def test_ode_checkpoint_bit_for_bit(tmp_path):
    f = tiny_field(include_time=True, linear=True, scale=1.234567890123)
    p = tmp_path / "c.json"
    save_checkpoint(p, f, SolverConfig("rk4", 2), TrainConfig(), [{"iteration": 0}])
    g, doc = load_checkpoint(p)
    np.testing.assert_array_equal(g.theta, f.theta)
    ts = np.linspace(0, 1, 9)
    np.testing.assert_array_equal(integrate(g, [0.3, -0.1], ts).states,
                                  integrate(f, [0.3, -0.1], ts).states)
    assert doc["solver"]["substeps"] == 2 and doc["history"] == [{"iteration": 0}]


def test_pde_checkpoint_bit_for_bit(tmp_path):
    g = Grid2D.unit(6, 6)
    s = [FieldSeries([0.0, 1.0], np.random.default_rng(2).normal(size=(2, 6, 6)), g)]
    m = make_pde_model(s, g, hidden=4, bounds_mode="channel")
    save_checkpoint(tmp_path / "p.json", m)
    m2, _ = load_checkpoint(tmp_path / "p.json")
    U = np.random.default_rng(3).normal(size=(1, 6, 6))
    np.testing.assert_array_equal(m(0.2, U), m2(0.2, U))


def test_checkpoint_format_check(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_checkpoint(p)
