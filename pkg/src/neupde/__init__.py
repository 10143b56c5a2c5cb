"""Learn differential equations from time series with a shallow network on a
normalized monomial dictionary, integrated by explicit Runge-Kutta schemes."""

from ._kernels import BACKEND
from .dictionary import (DictionarySpec, NormalizationBounds, eval_dictionary, fit_bounds,
                         normalize, term_count)
from .errors import (ConfigError, DegenerateData, DimensionMismatch, Divergence, NeupdeError,
                     NonFiniteState, RankTooLarge, SingularSystem, TooShort, UnstableStep)
from .gradient import LossSpec, Windows, adjoint_gradient, bptt_gradient, grad_check, objective
from .network import MlpParams, init_params, mlp_forward, param_count
from .odeint import SolverConfig, Trajectory, VectorField, integrate, make_field, rk_step
from .train import AdamState, TrainConfig, adam_step, train_ode

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DictionarySpec", "NormalizationBounds", "eval_dictionary", "fit_bounds",
    "normalize", "term_count", "ConfigError", "DegenerateData", "DimensionMismatch",
    "Divergence", "NeupdeError", "NonFiniteState", "RankTooLarge", "SingularSystem", "TooShort",
    "UnstableStep", "LossSpec", "Windows", "adjoint_gradient", "bptt_gradient", "grad_check",
    "objective", "MlpParams", "init_params", "mlp_forward", "param_count", "SolverConfig",
    "Trajectory", "VectorField", "integrate", "make_field", "rk_step", "AdamState",
    "TrainConfig", "adam_step", "train_ode",
]
