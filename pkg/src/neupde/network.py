"""Shallow perceptron F(z) = A2 sigma(A1 z + b1) + b2."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch

ACTIVATIONS = {"tanh": _kernels.TANH, "elu": _kernels.ELU, "paper_elu": _kernels.PAPER_ELU}


@dataclass
class MlpParams:
    A1: np.ndarray
    b1: np.ndarray
    A2: np.ndarray
    b2: np.ndarray
    activation: str = "elu"

    def __post_init__(self):
        self.A1 = np.ascontiguousarray(self.A1, dtype=float)
        self.A2 = np.ascontiguousarray(self.A2, dtype=float)
        self.b1 = np.ascontiguousarray(self.b1, dtype=float).reshape(-1)
        self.b2 = np.ascontiguousarray(self.b2, dtype=float).reshape(-1)
        h, _ = self.A1.shape
        if self.b1.shape != (h,) or self.A2.shape[1] != h or self.b2.shape != (self.A2.shape[0],):
            raise DimensionMismatch(
                f"inconsistent shapes A1{self.A1.shape} b1{self.b1.shape} "
                f"A2{self.A2.shape} b2{self.b2.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def shape(self):
        """(n_inputs, n_hidden, n_outputs)."""
        return self.A1.shape[1], self.A1.shape[0], self.A2.shape[0]

    @property
    def size(self):
        return self.A1.size + self.b1.size + self.A2.size + self.b2.size

    @property
    def act_code(self):
        return ACTIVATIONS[self.activation]

    def flatten(self):
        """vect(A1, A2, b1, b2), row-major."""
        return np.concatenate([self.A1.ravel(), self.A2.ravel(), self.b1, self.b2])

    @classmethod
    def unflatten(cls, theta, n, h, o, activation="elu"):
        theta = np.asarray(theta, dtype=float)
        if theta.size != param_count(n, h, o):
            raise DimensionMismatch(f"expected {param_count(n, h, o)} parameters, got {theta.size}")
        i = 0
        A1 = theta[i:i + h * n].reshape(h, n); i += h * n
        A2 = theta[i:i + o * h].reshape(o, h); i += o * h
        b1 = theta[i:i + h]; i += h
        b2 = theta[i:i + o]
        return cls(A1.copy(), b1.copy(), A2.copy(), b2.copy(), activation)

    def to_dict(self):
        return {
            "activation": self.activation,
            "shape": list(self.shape),
            "A1": self.A1.tolist(),
            "b1": self.b1.tolist(),
            "A2": self.A2.tolist(),
            "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["A1"]), np.array(d["b1"]), np.array(d["A2"]), np.array(d["b2"]),
                   d["activation"])


def param_count(n, h, o):
    return h * n + h + o * h + o


def init_params(n, h, o, activation="elu", seed=0):
    """Uniform fan-in initialization; biases start at zero."""
    if min(n, h, o) < 1:
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    a1 = np.sqrt(1.0 / n)
    a2 = np.sqrt(1.0 / h)
    A1 = rng.uniform(-a1, a1, size=(h, n))
    A2 = rng.uniform(-a2, a2, size=(o, h))
    return MlpParams(A1, np.zeros(h), A2, np.zeros(o), activation)


def activation_eval(kind, x):
    """(sigma(x), sigma'(x)) for ``kind`` in {'tanh', 'elu', 'paper_elu'}."""
    return _kernels.activation(ACTIVATIONS[kind], np.asarray(x, dtype=float))


def _check_input(theta, z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != theta.shape[0]:
        raise DimensionMismatch(f"network expects {theta.shape[0]} inputs, got {z.shape[-1]}")
    return z


def mlp_forward(theta, z):
    z = _check_input(theta, z)
    s, _ = activation_eval(theta.activation, z @ theta.A1.T + theta.b1)
    return s @ theta.A2.T + theta.b2


def mlp_jacobian_input(theta, z):
    """dF/dz = A2 diag(sigma'(A1 z + b1)) A1 for a single input vector."""
    z = _check_input(theta, z)
    _, ds = activation_eval(theta.activation, theta.A1 @ z + theta.b1)
    return (theta.A2 * ds) @ theta.A1


def mlp_vjp_params(theta, z, w):
    """Gradient of w . F(z, theta) with respect to every parameter.

    Returns an :class:`MlpParams` holding the gradient arrays.
    """
    z = _check_input(theta, z)
    w = np.asarray(w, dtype=float)
    if w.shape != (theta.shape[2],):
        raise DimensionMismatch(f"cotangent must have length {theta.shape[2]}")
    s, ds = activation_eval(theta.activation, theta.A1 @ z + theta.b1)
    g = (theta.A2.T @ w) * ds
    return MlpParams(np.outer(g, z), g, np.outer(w, s), w.copy(), theta.activation)
