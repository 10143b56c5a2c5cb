"""File formats: trajectory CSV, binary field series, JSON checkpoints."""

import csv
import json

import numpy as np

from .odeint import Trajectory, VectorField

FIELD_MAGIC = "NEUPDE-FIELD"
FIELD_VERSION = "v1"


def write_trajectory_csv(path, traj):
    """Header ``t,x1,...,xd`` followed by one row per stamp (17 significant digits)."""
    d = traj.states.shape[1]
    data = np.column_stack([traj.timestamps, traj.states])
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(d)])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1:])


def _uniform_step(ts):
    if ts.size < 2:
        return 0.0
    dt = (ts[-1] - ts[0]) / (ts.size - 1)
    if not np.allclose(np.diff(ts), dt, rtol=1e-9, atol=0.0):
        raise ValueError("the field format stores uniformly spaced stamps only")
    return dt


def write_field_series(path, series):
    """One record per series, back to back: an ASCII header line
    ``NEUPDE-FIELD v1 nt nx ny hx hy t0 dt_store`` then nt*nx*ny
    little-endian doubles in (t, x, y) row-major order."""
    items = series if isinstance(series, (list, tuple)) else [series]
    with open(path, "wb") as fh:
        for s in items:
            nt, nx, ny = s.values.shape
            nums = (float(v) for v in (s.grid.hx, s.grid.hy, s.timestamps[0],
                                        _uniform_step(s.timestamps)))
            head = f"{FIELD_MAGIC} {FIELD_VERSION} {nt} {nx} {ny} " + " ".join(map(repr, nums)) + "\n"
            fh.write(head.encode("ascii"))
            fh.write(np.ascontiguousarray(s.values, dtype="<f8").tobytes())


def read_field_series(path):
    """All records of a field file as a list of FieldSeries."""
    from .pde import FieldSeries, Grid2D

    out = []
    with open(path, "rb") as fh:
        while True:
            line = fh.readline()
            if not line:
                break
            parts = line.decode("ascii").split()
            if len(parts) != 9 or parts[0] != FIELD_MAGIC or parts[1] != FIELD_VERSION:
                raise ValueError(f"{path}: bad field header {line[:60]!r}")
            nt, nx, ny = (int(v) for v in parts[2:5])
            hx, hy, t0, dt = (float(v) for v in parts[5:9])
            count = nt * nx * ny
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated record")
            values = np.frombuffer(raw, dtype="<f8").reshape(nt, nx, ny).astype(float)
            ts = t0 + dt * np.arange(nt)
            out.append(FieldSeries(ts, values, Grid2D(nx, ny, hx, hy)))
    return out


def export_field_csv(path, series, stamp=-1):
    """One stamp of a field series as rows (x, y, u)."""
    X, Y = series.grid.coords()
    u = series.values[stamp]
    data = np.column_stack([X.ravel(), Y.ravel(), u.ravel()])
    np.savetxt(path, data, delimiter=",", header="x,y,u", comments="", fmt="%.17g")


def model_from_dict(d):
    if d.get("kind") == "pde":
        from .pde import PdeModel

        return PdeModel.from_dict(d)
    return VectorField.from_dict(d)


def save_checkpoint(path, model, solver=None, train_config=None, history=None, extra=None):
    """JSON with the model (dictionary, bounds, weights, A0), solver and
    training settings, and the loss history.  Floats are written with
    ``repr`` precision so a reload evaluates bit-for-bit identically."""
    doc = {
        "format": "neupde-checkpoint-1",
        "model": model.to_dict(),
        "n_params": int(model.n_params),
        "solver": None if solver is None else solver.to_dict(),
        "train": None if train_config is None else train_config.to_dict(),
        "history": history or [],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, allow_nan=True)


def load_checkpoint(path):
    """Return (model, document)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "neupde-checkpoint-1":
        raise ValueError(f"{path}: not a checkpoint")
    return model_from_dict(doc["model"]), doc
