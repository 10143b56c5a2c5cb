"""Reference systems used to generate training data."""

from dataclasses import dataclass, fields

import numpy as np

from .odeint import FunctionField, SolverConfig, Trajectory, integrate


def lorenz_rhs(x, y, z):
    return 10.0 * (y - x), x * (28.0 - z) - y, x * y - 8.0 * z / 3.0


def spiral_rhs(t, x, y, z):
    """Cubic oscillator in (x, y) with a time-forced drift in z."""
    return 2.0 * y ** 3, -2.0 * x ** 3, 0.25 + 0.5 * np.sin(np.pi * t)


def _lorenz_batch(t, X):
    return np.stack(lorenz_rhs(X[:, 0], X[:, 1], X[:, 2]), axis=1)


def _spiral_batch(t, X):
    t = np.broadcast_to(np.asarray(t, dtype=float), X[:, 0].shape)
    return np.stack(spiral_rhs(t, X[:, 0], X[:, 1], X[:, 2]), axis=1)


SYSTEMS = {"lorenz": _lorenz_batch, "spiral": _spiral_batch}

DEFAULTS = {
    "lorenz": dict(x0=(-8.0, 7.0, 27.0), t0=0.0, tN=2.5, N=250, noise_sigma=0.0),
    "spiral": dict(x0=(1.0, 0.0, 0.0), t0=0.0, tN=6.0, N=300, noise_sigma=0.05),
}


@dataclass
class GeneratorConfig:
    """Data generation settings.  ``N`` is the index of the last stamp, so a
    run has N + 1 samples on a uniform grid from t0 to tN."""

    system: str
    x0: tuple = None
    t0: float = None
    tN: float = None
    N: int = None
    fine_substeps: int = 20
    noise_sigma: float = None
    seed: int = 0

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        for key, value in DEFAULTS[self.system].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        self.x0 = tuple(float(v) for v in self.x0)
        if not self.tN > self.t0:
            raise ValueError("tN must exceed t0")
        if self.N < 2 or self.fine_substeps < 1 or self.noise_sigma < 0:
            raise ValueError("need N >= 2, fine_substeps >= 1, noise_sigma >= 0")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["x0"] = list(self.x0)
        return d


def generate(config):
    """Return (clean, noisy) trajectories.

    The clean run uses RK4 with ``fine_substeps`` steps per stamp interval.
    Gaussian noise is added to every state except the initial one.
    """
    ts = np.linspace(config.t0, config.tN, config.N + 1)
    field = FunctionField(SYSTEMS[config.system])
    clean = integrate(field, np.array(config.x0), ts, SolverConfig("rk4", config.fine_substeps))
    noisy_states = clean.states.copy()
    if config.noise_sigma > 0:
        rng = np.random.default_rng(config.seed)
        noisy_states[1:] += rng.normal(0.0, config.noise_sigma, size=noisy_states[1:].shape)
    return clean, Trajectory(ts, noisy_states)
