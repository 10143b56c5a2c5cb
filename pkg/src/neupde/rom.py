"""Reduced-order models: POD truncation, projection, and training of
alpha' = A0 alpha + F(D(N(alpha)), theta) on the mode coefficients."""

from dataclasses import dataclass

import numpy as np

from .dictionary import DictionarySpec, fit_bounds
from .errors import DimensionMismatch, RankTooLarge
from .odeint import SolverConfig, Trajectory, derivative_scale, integrate, make_field
from .train import TrainConfig, train_ode


@dataclass
class RomBasis:
    """``Ur`` is m x r with orthonormal columns; ``shape`` de-vectorizes a
    column (for instance (nx, ny)), or is None for plain vectors.  With a
    ``grid`` the shape is (nx, ny) and reconstructions are field series."""

    Ur: np.ndarray
    singular_values: np.ndarray
    shape: tuple = None
    grid: object = None

    def __post_init__(self):
        if self.grid is not None and self.shape is None:
            self.shape = (self.grid.nx, self.grid.ny)
        self.Ur = np.asarray(self.Ur, dtype=float)
        self.singular_values = np.asarray(self.singular_values, dtype=float)
        if self.Ur.ndim != 2 or self.singular_values.shape != (self.Ur.shape[1],):
            raise DimensionMismatch("Ur must be m x r with r singular values")
        if self.shape is not None:
            self.shape = tuple(int(v) for v in self.shape)
            if int(np.prod(self.shape)) != self.Ur.shape[0]:
                raise DimensionMismatch(f"shape {self.shape} does not hold {self.Ur.shape[0]} values")

    @property
    def r(self):
        return self.Ur.shape[1]

    def to_dict(self):
        return {"r": self.r, "m": self.Ur.shape[0],
                "shape": None if self.shape is None else list(self.shape),
                "grid": None if self.grid is None else self.grid.to_dict(),
                "singular_values": self.singular_values.tolist()}


def svd_truncate(X, r, shape=None, grid=None):
    """Leading r left singular vectors and values of the m x N snapshot matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("snapshot matrix must be 2-d")
    if not 1 <= r <= min(X.shape):
        raise RankTooLarge(f"rank {r} outside [1, {min(X.shape)}]")
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    return RomBasis(U[:, :r].copy(), s[:r].copy(), shape, grid)


def snapshot_matrix(series):
    """Stack the stamps of a field series (or (N, ...) array) as columns."""
    values = getattr(series, "values", series)
    values = np.asarray(values, dtype=float)
    return values.reshape(values.shape[0], -1).T


def project(basis, X, timestamps=None):
    """alpha_i = Ur^T X[:, i] as a Trajectory on ``timestamps`` (default 0..N-1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != basis.Ur.shape[0]:
        raise DimensionMismatch(f"columns must have {basis.Ur.shape[0]} entries")
    ts = np.arange(X.shape[1], dtype=float) if timestamps is None else np.asarray(timestamps, dtype=float)
    if ts.size != X.shape[1]:
        raise DimensionMismatch("one timestamp per column required")
    return Trajectory(ts, (basis.Ur.T @ X).T)


def reconstruct(basis, alpha):
    """Ur alpha_i per stamp; returns a FieldSeries when the basis has a 2-d
    shape with grid metadata, otherwise an (N, ...) array."""
    states = alpha.states if isinstance(alpha, Trajectory) else np.asarray(alpha, dtype=float)
    states = np.atleast_2d(states)
    if states.shape[1] != basis.r:
        raise DimensionMismatch(f"expected {basis.r} coefficients per stamp")
    cols = states @ basis.Ur.T
    if basis.shape is None:
        return cols
    fields = cols.reshape((-1,) + basis.shape)
    if basis.grid is not None and isinstance(alpha, Trajectory):
        from .pde import FieldSeries

        return FieldSeries(alpha.timestamps, fields, basis.grid)
    return fields


def rel_l2_terminal(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    return float(np.linalg.norm((pred[-1] - truth[-1]).ravel()) / np.linalg.norm(truth[-1].ravel()))


@dataclass
class RomConfig:
    degree: int = 2
    hidden: int = 8
    activation: str = "elu"
    closure: bool = True
    seed: int = 0


def train_rom(alpha_series, spec=None, config=None, train_config=None, callback=None):
    """Train A0 (from zero) and, with ``closure``, the perceptron jointly.

    Returns (field, history).  ``spec`` defaults to a degree ``config.degree``
    dictionary over the r coefficients.
    """
    config = config or RomConfig()
    train_config = train_config or TrainConfig()
    series = alpha_series if isinstance(alpha_series, (list, tuple)) else [alpha_series]
    r = series[0].dim
    spec = spec or DictionarySpec(r, config.degree)
    if spec.dim != r:
        raise DimensionMismatch("dictionary dimension must equal the rank")
    t0 = min(s.timestamps[0] for s in series)
    t1 = max(s.timestamps[-1] for s in series)
    field = make_field(spec, fit_bounds(series), config.hidden, config.activation, config.seed,
                       derivative_scale(series), (t0, t1), linear=True, closure=config.closure)
    return train_ode(series, field, train_config, callback)


def mean_field_rhs(t, A, mu=0.1, omega=1.0, coupling=-0.1, rate=10.0):
    """A three-mode oscillator whose amplitude saturates on a limit cycle
    through a slaved third mode; used for synthetic snapshot data."""
    a1, a2, a3 = A[:, 0], A[:, 1], A[:, 2]
    return np.stack([mu * a1 - omega * a2 + coupling * a1 * a3,
                     omega * a1 + mu * a2 + coupling * a2 * a3,
                     -rate * (a3 - a1 * a1 - a2 * a2)], axis=1)


@dataclass
class RomSynthConfig:
    nx: int = 16
    ny: int = 16
    t0: float = 0.0
    tN: float = 30.0
    N: int = 300
    a0: tuple = (0.1, 0.0, 0.0)
    noise_sigma: float = 0.0
    fine_substeps: int = 10
    seed: int = 0


def synthetic_modes(nx, ny):
    """Three orthonormal smooth spatial patterns, columns of an (nx*ny, 3) matrix."""
    X, Y = np.meshgrid(np.arange(nx) / nx, np.arange(ny) / ny, indexing="ij")
    raw = np.stack([np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y),
                    np.cos(2 * np.pi * X) * np.sin(4 * np.pi * Y),
                    np.cos(4 * np.pi * X)], axis=-1).reshape(nx * ny, 3)
    Q, _ = np.linalg.qr(raw)
    return Q


def make_rom_snapshots(config=None):
    """(timestamps, snapshots (N+1, nx, ny), true coefficients) from the
    three-mode model lifted onto fixed spatial modes."""
    from .odeint import FunctionField

    cfg = config or RomSynthConfig()
    ts = np.linspace(cfg.t0, cfg.tN, cfg.N + 1)
    coeffs = integrate(FunctionField(mean_field_rhs), np.array(cfg.a0, dtype=float), ts,
                       SolverConfig("rk4", cfg.fine_substeps)).states
    fields = (coeffs @ synthetic_modes(cfg.nx, cfg.ny).T).reshape(-1, cfg.nx, cfg.ny)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        fields = fields + rng.normal(0.0, cfg.noise_sigma, fields.shape)
    return ts, fields, coeffs
