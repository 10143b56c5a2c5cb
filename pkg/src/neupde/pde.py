"""PDE pathway: finite-difference channels, a pointwise dictionary and
perceptron (a 1x1 convolution over channels), and a reference 2-d Burgers
solver used to generate data.

Arrays indexed ``[i, j]`` hold ``u(x_i, y_j)`` with ``x_i = i hx`` and
``y_j = j hy`` on a periodic grid over ``[0, nx hx) x [0, ny hy)``.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from . import _kernels
from .dictionary import DictionarySpec, NormalizationBounds, normalize
from .errors import ConfigError, DimensionMismatch, UnstableStep
from .network import MlpParams, init_params
from .odeint import SolverConfig, rollout
from .train import TrainConfig, train_ode

VISCOSITY = 0.01
CHANNELS = ("t", "x", "y", "u", "ux", "uy", "uxx", "uxy", "uyy")
DEFAULT_CHANNELS = ("t", "x", "y", "u", "ux", "uy", "uxx", "uyy")
STENCIL_OF = {"u": "identity", "ux": "dx", "uy": "dy", "uxx": "dxx", "uxy": "dxy", "uyy": "dyy"}


@dataclass(frozen=True)
class Grid2D:
    nx: int = 32
    ny: int = 32
    hx: float = 1.0 / 32
    hy: float = 1.0 / 32
    boundary: str = "periodic"

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 points per direction")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")

    @classmethod
    def unit(cls, nx=32, ny=32):
        """Periodic grid on the unit square."""
        return cls(nx, ny, 1.0 / nx, 1.0 / ny)

    def coords(self):
        """(X, Y) coordinate arrays of shape (nx, ny)."""
        return np.meshgrid(np.arange(self.nx) * self.hx, np.arange(self.ny) * self.hy,
                           indexing="ij")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Field2D:
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("a field is a 2-d array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


@dataclass
class FieldSeries:
    """Stored stamps of a scalar field: ``values`` is (nt, nx, ny)."""

    timestamps: np.ndarray
    values: np.ndarray
    grid: Grid2D = field(default_factory=Grid2D)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[0] != self.timestamps.size:
            raise DimensionMismatch("values must be (nt, nx, ny) with one stamp per time")
        if self.values.shape[1:] != (self.grid.nx, self.grid.ny):
            raise DimensionMismatch("values do not match the grid")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return self.timestamps.size

    def __getitem__(self, i):
        return Field2D(self.values[i], float(self.timestamps[i]))


def _kernel_set(grid):
    hx, hy = grid.hx, grid.hy
    k = {name: np.zeros((3, 3)) for name in ("identity", "dx", "dy", "dxx", "dxy", "dyy")}
    k["identity"][1, 1] = 1.0
    k["dx"][2, 1], k["dx"][0, 1] = 0.5 / hx, -0.5 / hx
    k["dy"][1, 2], k["dy"][1, 0] = 0.5 / hy, -0.5 / hy
    k["dxx"][[0, 2], 1] = 1.0 / hx ** 2
    k["dxx"][1, 1] = -2.0 / hx ** 2
    k["dyy"][1, [0, 2]] = 1.0 / hy ** 2
    k["dyy"][1, 1] = -2.0 / hy ** 2
    c = 0.25 / (hx * hy)
    k["dxy"][2, 2] = k["dxy"][0, 0] = c
    k["dxy"][2, 0] = k["dxy"][0, 2] = -c
    return k


class StencilSet:
    """The identity and five central-difference 3x3 kernels for a grid.

    Entry ``K[a, b]`` multiplies ``u[i + a - 1, j + b - 1]``.
    """

    names = ("identity", "dx", "dy", "dxx", "dxy", "dyy")

    def __init__(self, grid):
        self.grid = grid
        self.kernels = _kernel_set(grid)

    def __getitem__(self, name):
        return self.kernels[name]


def _correlate(u, kernel, sign):
    out = np.zeros_like(u)
    for a in range(3):
        for b in range(3):
            w = kernel[a, b]
            if w != 0.0:
                out += w * np.roll(u, (sign * (1 - a), sign * (1 - b)), axis=(-2, -1))
    return out


def apply_stencil(u, kernel, grid=None):
    """Periodic 3x3 stencil application over the last two axes.

    ``u`` may be a Field2D or an array (..., nx, ny); ``kernel`` is a 3x3
    array or a kernel name (which then needs ``grid``).
    """
    if isinstance(kernel, str):
        if grid is None:
            raise ValueError("a named kernel needs a grid")
        kernel = _kernel_set(grid)[kernel]
    if isinstance(u, Field2D):
        return Field2D(_correlate(u.values, kernel, 1), u.t)
    return _correlate(np.asarray(u, dtype=float), kernel, 1)


def apply_stencil_transpose(w, kernel):
    """Adjoint of :func:`apply_stencil` with respect to the field."""
    return _correlate(np.asarray(w, dtype=float), kernel, -1)


def channel_stack(grid, channels, t, U):
    """Channels of a batch of fields U (B, nx, ny) at times t, shape (B, nx, ny, c)."""
    U = np.asarray(U, dtype=float)
    kernels = _kernel_set(grid)
    X, Y = grid.coords()
    t = np.broadcast_to(np.reshape(np.asarray(t, dtype=float), (-1, 1, 1)), U.shape)
    cols = []
    for name in channels:
        if name == "t":
            cols.append(t)
        elif name == "x":
            cols.append(np.broadcast_to(X, U.shape))
        elif name == "y":
            cols.append(np.broadcast_to(Y, U.shape))
        else:
            cols.append(_correlate(U, kernels[STENCIL_OF[name]], 1))
    return np.stack(cols, axis=-1)


def param_count_pde(n_terms, hidden):
    return hidden * n_terms + hidden + hidden + 1


class PdeModel:
    """u_t = s * F(D(N(channels)), theta) applied identically at every grid point.

    The state is a batch of fields, shape (B, nx, ny).  ``bounds`` holds one
    normalization range per channel and ``output_scale`` is a fixed scalar.
    """

    def __init__(self, grid, channels, degree, params, bounds, output_scale=1.0):
        self.grid = grid
        self.channels = tuple(channels)
        unknown = set(self.channels) - set(CHANNELS)
        if unknown or len(set(self.channels)) != len(self.channels):
            raise ConfigError(f"bad channel list {self.channels}")
        self.degree = int(degree)
        self.spec = DictionarySpec(len(self.channels), self.degree)
        self.params = params
        self.bounds = bounds
        self.output_scale = float(output_scale)
        self.stencils = StencilSet(grid)
        n, _, o = params.shape
        if n != len(self.spec) or o != 1:
            raise DimensionMismatch(
                f"network must map {len(self.spec)} terms to 1 output, got {n} -> {o}")
        if np.shape(bounds.m) != (len(self.channels),):
            raise DimensionMismatch("bounds need one range per channel")

    @property
    def n_params(self):
        return self.params.size

    @property
    def theta(self):
        return self.params.flatten()

    def with_theta(self, theta):
        n, h, o = self.params.shape
        p = MlpParams.unflatten(theta, n, h, o, self.params.activation)
        return PdeModel(self.grid, self.channels, self.degree, p, self.bounds, self.output_scale)

    def channel_values(self, t, U):
        """Raw channel stack, shape (B, nx, ny, c)."""
        return channel_stack(self.grid, self.channels, t, U)

    def forward(self, t, U):
        U = np.asarray(U, dtype=float)
        if U.ndim != 3 or U.shape[1:] != (self.grid.nx, self.grid.ny):
            raise DimensionMismatch(f"state must be (B, {self.grid.nx}, {self.grid.ny})")
        C = self.channel_values(t, U)
        Z = np.ascontiguousarray(normalize(C, self.bounds).reshape(-1, len(self.channels)))
        p = self.params
        Phi, pre, out = _kernels.field_forward(Z, self.spec.exponents, p.A1, p.b1, p.A2, p.b2,
                                               p.act_code)
        return self.output_scale * out.reshape(U.shape), (U.shape, Z, Phi, pre)

    def __call__(self, t, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 2:
            return self.forward(t, U[None])[0][0]
        return self.forward(t, U)[0]

    def vjp(self, cache, W):
        shape, Z, Phi, pre = cache
        p = self.params
        Wf = np.ascontiguousarray(self.output_scale * np.reshape(W, (-1, 1)))
        dZ, dA1, db1, dA2, db2 = _kernels.field_backward(Z, self.spec.exponents, Phi, pre,
                                                         p.A1, p.A2, p.act_code, Wf)
        dC = (dZ * self.bounds.scale).reshape(shape + (len(self.channels),))
        dU = np.zeros(shape)
        for c, name in enumerate(self.channels):
            if name == "u":
                dU += dC[..., c]
            elif name in STENCIL_OF:
                dU += apply_stencil_transpose(dC[..., c], self.stencils[STENCIL_OF[name]])
        return dU, np.concatenate([dA1.ravel(), dA2.ravel(), db1, db2])

    def jacobian_x(self, t, U):
        raise NotImplementedError("the adjoint smoothness term is not available for PDE models")

    time_derivative = jacobian_x

    def to_dict(self):
        return {
            "kind": "pde",
            "grid": self.grid.to_dict(),
            "channels": list(self.channels),
            "degree": self.degree,
            "network": self.params.to_dict(),
            "bounds": self.bounds.to_dict(),
            "output_scale": self.output_scale,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(Grid2D(**d["grid"]), d["channels"], d["degree"],
                   MlpParams.from_dict(d["network"]), NormalizationBounds.from_dict(d["bounds"]),
                   d.get("output_scale", 1.0))


def fit_channel_bounds(series, grid, channels, mode="global"):
    """Normalization ranges over every stamp of every series.

    ``mode="global"`` uses one (min, max) pair over all channels, as on the
    ODE path; ``mode="channel"`` fits each channel separately.  Either way
    one range per channel is returned.
    """
    lo = np.full(len(channels), np.inf)
    hi = np.full(len(channels), -np.inf)
    for s in series:
        C = channel_stack(grid, channels, s.timestamps, s.values)
        lo = np.minimum(lo, C.min(axis=(0, 1, 2)))
        hi = np.maximum(hi, C.max(axis=(0, 1, 2)))
    if mode == "global":
        lo[:], hi[:] = lo.min(), hi.max()
    elif mode != "channel":
        raise ValueError(f"unknown bounds mode {mode!r}")
    flat = hi <= lo
    hi[flat] = lo[flat] + 1.0
    return NormalizationBounds(lo, hi)


def time_derivative_scale(series):
    sq, count = 0.0, 0
    for s in series:
        d = np.diff(s.values, axis=0) / np.diff(s.timestamps)[:, None, None]
        sq += float(np.sum(d * d))
        count += d.size
    rms = np.sqrt(sq / max(count, 1))
    return rms if rms > 0 else 1.0


def make_pde_model(series, grid, channels=DEFAULT_CHANNELS, degree=2, hidden=50,
                   activation="elu", seed=0, bounds_mode="global"):
    """Model with bounds and output scale fitted on ``series``."""
    spec = DictionarySpec(len(channels), degree)
    params = init_params(len(spec), hidden, 1, activation, seed)
    return PdeModel(grid, channels, degree, params, fit_channel_bounds(series, grid, channels, bounds_mode),
                    time_derivative_scale(series))


def pde_rhs(model, t, state):
    """u_t estimate at every grid point for a Field2D or an (nx, ny) array."""
    if isinstance(state, Field2D):
        return Field2D(model(t, state.values), t)
    return model(t, state)


def burgers_rhs(U, grid, nu=VISCOSITY):
    """-0.5 div(u^2) + nu lap(u), central differences, for (..., nx, ny)."""
    k = _kernel_set(grid)
    sq = U * U
    return (-0.5 * (_correlate(sq, k["dx"], 1) + _correlate(sq, k["dy"], 1))
            + nu * (_correlate(U, k["dxx"], 1) + _correlate(U, k["dyy"], 1)))


def stable_step(grid, umax, nu=VISCOSITY):
    h = min(grid.hx, grid.hy)
    bound = h * h / (8.0 * nu)
    if umax > 0:
        bound = min(bound, h / (2.0 * umax))
    return bound


def burgers_reference(ic, grid, dt, steps, store_every=1, nu=VISCOSITY):
    """RK4 method-of-lines solution; stores the initial field and every
    ``store_every``-th step, so ``steps // store_every + 1`` stamps."""
    u = ic.values.copy() if isinstance(ic, Field2D) else np.array(ic, dtype=float)
    t0 = ic.t if isinstance(ic, Field2D) else 0.0
    if u.shape != (grid.nx, grid.ny):
        raise DimensionMismatch("initial field does not match the grid")
    umax0 = float(np.max(np.abs(u)))
    limit = stable_step(grid, umax0, nu)
    if dt > limit:
        raise UnstableStep(f"dt={dt:g} exceeds the stability bound {limit:g}")
    out = [u.copy()]
    for n in range(1, steps + 1):
        k1 = burgers_rhs(u, grid, nu)
        k2 = burgers_rhs(u + 0.5 * dt * k1, grid, nu)
        k3 = burgers_rhs(u + 0.5 * dt * k2, grid, nu)
        k4 = burgers_rhs(u + dt * k3, grid, nu)
        u = u + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        umax = float(np.max(np.abs(u)))
        if not np.isfinite(umax) or umax > 10.0 * max(umax0, 1e-300):
            raise UnstableStep(f"solution blew up at step {n}")
        if dt > stable_step(grid, umax, nu):
            raise UnstableStep(f"dt={dt:g} exceeds the stability bound at step {n}")
        if n % store_every == 0:
            out.append(u.copy())
    ts = t0 + dt * store_every * np.arange(len(out))
    return FieldSeries(ts, np.stack(out), grid)


@dataclass
class BurgersDataConfig:
    nx: int = 32
    ny: int = 32
    dt: float = 1.5e-5
    stamps: int = 100
    store_every: int = 1
    amplitude: float = 50.0
    noise_sigma: float = 0.1
    n_train: int = 5
    seed: int = 0

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def make_burgers_dataset(seed=0, config=None):
    """(train, test) lists of FieldSeries.

    Training initial fields are ``amplitude * sin(2 pi x)`` plus i.i.d.
    Gaussian perturbations of size ``noise_sigma`` at every grid point; the
    test initial field is ``amplitude * sin(2 pi y)``.
    """
    cfg = config or BurgersDataConfig(seed=seed)
    grid = Grid2D.unit(cfg.nx, cfg.ny)
    X, Y = grid.coords()
    rng = np.random.default_rng(cfg.seed if config is not None else seed)
    steps = (cfg.stamps - 1) * cfg.store_every
    train = []
    for _ in range(cfg.n_train):
        ic = cfg.amplitude * np.sin(2 * np.pi * X) + rng.normal(0.0, cfg.noise_sigma, X.shape)
        train.append(burgers_reference(ic, grid, cfg.dt, steps, cfg.store_every))
    test = [burgers_reference(cfg.amplitude * np.sin(2 * np.pi * Y), grid, cfg.dt, steps,
                              cfg.store_every)]
    return train, test


def burgers_train_config(**overrides):
    """Training defaults for the Burgers experiment: 16 disjoint windows of 3
    stamps, learning rate 0.1, 2000 iterations."""
    base = dict(learning_rate=0.1, window_length=2, batch_size=16, iterations=2000,
                overlap=False, beta1=1e-4, beta2=1e-5, eval_every=0)
    base.update(overrides)
    return TrainConfig(**base)


def train_burgers(dataset, model0, config=None, callback=None):
    config = config or burgers_train_config()
    if config.engine == "adjoint" and config.beta2:
        raise ConfigError("the adjoint engine supports PDE models only with beta2 = 0")
    return train_ode(dataset, model0, config, callback)


def forecast_series(model, ic, timestamps, solver=None):
    """Roll ``model`` out from one initial field over ``timestamps``."""
    solver = solver or SolverConfig()
    u0 = ic.values if isinstance(ic, Field2D) else np.asarray(ic, dtype=float)
    states, _ = rollout(model, u0[None], np.asarray(timestamps, dtype=float), solver)
    return FieldSeries(timestamps, states[:, 0], model.grid)


def series_mse(a, b):
    """Mean squared difference over every stamp after the first."""
    d = a.values[1:] - b.values[1:]
    return float(np.mean(d * d))
