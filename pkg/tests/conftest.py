import sys

import numpy as np
import pytest

from neupde.dictionary import DictionarySpec, NormalizationBounds
from neupde.gradient import Windows
from neupde.odeint import make_field


def tiny_field(d=2, p=2, h=3, activation="tanh", seed=0, include_time=False, linear=False,
               scale=1.0):
    spec = DictionarySpec(d, p, include_time=include_time)
    field = make_field(spec, NormalizationBounds(-2.0, 2.0), h, activation, seed, scale,
                       (0.0, 1.0), linear=linear)
    rng = np.random.default_rng(seed + 100)
    # move biases off zero so every parameter is exercised
    return field.with_theta(field.theta + 0.3 * rng.standard_normal(field.n_params))


def random_windows(d=2, k=2, batch=1, seed=0, dt=0.1):
    rng = np.random.default_rng(seed)
    t0 = rng.uniform(0, 0.5, size=(batch, 1))
    times = t0 + dt * np.arange(k + 1)
    return Windows(times, rng.uniform(-1.5, 1.5, size=(batch, k + 1, d)))


@pytest.fixture
def field():
    return tiny_field()


@pytest.fixture
def windows():
    return random_windows()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        RESULTS = mod.RESULTS
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
