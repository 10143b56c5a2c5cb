"""Objective and gradients for trajectory fitting.

Two engines compute d(loss)/d(theta):

* ``bptt_gradient`` differentiates the discrete Runge-Kutta rollout exactly
  (discretize-then-optimize);
* ``adjoint_gradient`` integrates the continuous costate backward in time,
  with a jump at every data stamp, and accumulates the parameter gradient by
  quadrature along the way.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteState
from .odeint import Trajectory, rollout, rollout_vjp


@dataclass
class LossSpec:
    """Regularization weights.

    ``beta2`` weights the discrete smoothness term sum ||x_{i+1} - x_i||^2 in
    the backprop engine and the continuous integral of ||dx/dt||^2 in the
    adjoint engine.
    """

    beta1: float = 0.0
    beta2: float = 0.0

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("regularization weights must be non-negative")


@dataclass
class Windows:
    """A batch of equally long trajectory windows.

    ``times`` is (B, K+1) and ``targets`` is (B, K+1, ...).  The first target
    of each window is its initial condition.
    """

    times: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.times = np.atleast_2d(np.asarray(self.times, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.shape[:2] != self.times.shape:
            raise DimensionMismatch("targets must be (B, K+1, ...) matching times")
        if self.times.shape[1] < 2:
            raise ValueError("a window needs at least two stamps")

    @classmethod
    def from_trajectory(cls, traj):
        return cls(traj.timestamps[None], traj.states[None])

    @property
    def batch(self):
        return self.times.shape[0]

    @property
    def n_predicted(self):
        """Number of scalar predictions entering the misfit."""
        return int(np.prod(self.targets.shape)) // self.times.shape[1] * (self.times.shape[1] - 1)


def _predict(field, windows, solver, record=False):
    X0 = windows.targets[:, 0]
    states, tape = rollout(field, X0, windows.times, solver, record=record)
    return np.moveaxis(states, 0, 1), tape  # (B, K+1, ...)


def loss_terms(pred, windows, theta, loss):
    """(misfit, l1 term, smoothness term) for predictions (B, K+1, ...)."""
    r = pred[:, 1:] - windows.targets[:, 1:]
    misfit = float(np.sum(r * r))
    dx = np.diff(pred, axis=1)
    smooth = 0.5 * loss.beta2 * float(np.sum(dx * dx))
    l1 = loss.beta1 * float(np.sum(np.abs(theta)))
    return misfit, l1, smooth


def objective(field, windows, solver, loss):
    """Return (loss value, predicted states of shape (B, K+1, ...))."""
    if isinstance(windows, Trajectory):
        windows = Windows.from_trajectory(windows)
    pred, _ = _predict(field, windows, solver)
    return sum(loss_terms(pred, windows, field.theta, loss)), pred


def _stamp_cotangents(pred, windows, beta2):
    xbar = np.zeros_like(pred)
    xbar[:, 1:] = 2.0 * (pred[:, 1:] - windows.targets[:, 1:])
    if beta2:
        dx = np.diff(pred, axis=1)
        xbar[:, 1:] += beta2 * dx
        xbar[:, :-1] -= beta2 * dx
    return xbar


def bptt_gradient(field, windows, solver, loss, return_loss=False):
    """Exact gradient of the discrete objective by reverse-mode through RK stages."""
    if isinstance(windows, Trajectory):
        windows = Windows.from_trajectory(windows)
    pred, tape = _predict(field, windows, solver, record=True)
    xbar = _stamp_cotangents(pred, windows, loss.beta2)
    theta = field.theta
    grad = rollout_vjp(field, tape, solver, np.moveaxis(xbar, 1, 0))
    grad += loss.beta1 * np.sign(theta)
    if return_loss:
        return grad, sum(loss_terms(pred, windows, theta, loss)), pred
    return grad


def _costate_rates(field, beta2, t, X, lam, hb):
    """Rates of (x, lambda) and the h-weighted parameter-quadrature increment.

    ``hb`` holds the per-row step sizes (broadcastable against X).  The
    parameter part is returned already multiplied by the step, because the
    field's vjp sums over batch rows and each row may use its own step.
    """
    g, cache = field.forward(t, X)
    lam_gx_h, lam_gth_h = field.vjp(cache, hb * lam)
    dlam = -lam_gx_h / hb
    if beta2:
        J = field.jacobian_x(t, X)
        xddot = np.einsum("bij,bj->bi", J, g) + field.time_derivative(t, X)
        dlam = dlam + beta2 * xddot
    return g, dlam, lam_gth_h


def adjoint_gradient(field, windows, solver, loss, adjoint_substeps=10, return_loss=False):
    """Gradient from the continuous adjoint with checkpoints at data stamps.

    The costate obeys d(lambda)/dt = -g_x^T lambda + beta2 (g_x g + g_t) on
    every interval, starts from 2 (x_N - target_N) + beta2 g(x_N) at the last
    stamp, and picks up 2 (x_i - target_i) at every interior stamp on the way
    back.  The parameter gradient is beta1 sign(theta) plus the integral of
    g_theta^T lambda, accumulated with the same RK4 steps.  On each interval
    the state is re-integrated backward from the stored forward value at the
    right stamp.  ``beta2`` is the continuous smoothness weight here.
    """
    if isinstance(windows, Trajectory):
        windows = Windows.from_trajectory(windows)
    if adjoint_substeps < 1:
        raise ValueError("adjoint_substeps must be >= 1")
    pred, _ = _predict(field, windows, solver)
    T = windows.times
    K = T.shape[1] - 1
    beta2 = loss.beta2

    misfit_grad = 2.0 * (pred - windows.targets)
    lam = misfit_grad[:, K].copy()
    if beta2:
        lam = lam + beta2 * field.forward(T[:, K], pred[:, K])[0]
    mu = np.zeros(field.n_params)
    for i in range(K, 0, -1):
        X = pred[:, i].copy()
        h = (T[:, i - 1] - T[:, i]) / adjoint_substeps  # negative: backward in time
        hb = h.reshape((-1,) + (1,) * (X.ndim - 1))
        for s in range(adjoint_substeps):
            t = T[:, i] + s * h
            g1, l1, m1 = _costate_rates(field, beta2, t, X, lam, hb)
            g2, l2, m2 = _costate_rates(field, beta2, t + 0.5 * h, X + 0.5 * hb * g1,
                                        lam + 0.5 * hb * l1, hb)
            g3, l3, m3 = _costate_rates(field, beta2, t + 0.5 * h, X + 0.5 * hb * g2,
                                        lam + 0.5 * hb * l2, hb)
            g4, l4, m4 = _costate_rates(field, beta2, t + h, X + hb * g3, lam + hb * l3, hb)
            X = X + hb * (g1 + 2 * g2 + 2 * g3 + g4) / 6.0
            lam = lam + hb * (l1 + 2 * l2 + 2 * l3 + l4) / 6.0
            # d(mu)/dt = -lambda^T g_theta, stepped with negative h
            mu = mu - (m1 + 2 * m2 + 2 * m3 + m4) / 6.0
            if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(X))):
                raise NonFiniteState(f"adjoint blow-up in interval {i - 1}", interval=i - 1)
        if i > 1:
            lam = lam + misfit_grad[:, i - 1]
    grad = mu + loss.beta1 * np.sign(field.theta)
    if return_loss:
        return grad, sum(loss_terms(pred, windows, field.theta, loss)), pred
    return grad


ENGINES = {"bptt": bptt_gradient, "adjoint": adjoint_gradient}


def grad_check(field, windows, solver, loss, step=1e-6, engine="bptt", grad=None,
               adjoint_substeps=50):
    """Compare a gradient with central finite differences of the objective.

    Returns a report dict with the worst relative error and its index.  The
    relative error of entry j is |g_j - fd_j| / max(|g_j|, |fd_j|, 1e-3 max|fd|),
    so entries far below the gradient scale, where central differences are
    rounding-limited, do not dominate.  Pass ``grad`` to
    check a precomputed vector instead of running the engine.
    """
    if isinstance(windows, Trajectory):
        windows = Windows.from_trajectory(windows)
    theta = field.theta
    if grad is None:
        if engine == "adjoint":
            grad = adjoint_gradient(field, windows, solver, loss, adjoint_substeps)
        else:
            grad = bptt_gradient(field, windows, solver, loss)
    fd = finite_difference_gradient(field, windows, solver, loss, step)
    floor = 1e-3 * max(float(np.max(np.abs(fd))), 1e-300)
    denom = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), floor)
    rel = np.abs(grad - fd) / denom
    j = int(np.argmax(rel))
    return {"engine": engine, "worst_rel_err": float(rel[j]), "index": j, "step": step}


def finite_difference_gradient(field, windows, solver, loss, step=1e-6):
    """Central differences of the objective, one parameter at a time.

    The difference L(theta + h e_j) - L(theta - h e_j) is formed term by term
    as sum (r+ - r-)(r+ + r-), which avoids cancelling two large sums.
    """
    if isinstance(windows, Trajectory):
        windows = Windows.from_trajectory(windows)
    theta = field.theta
    fd = np.empty_like(theta)
    for j in range(theta.size):
        tp = theta.copy()
        tp[j] += step
        tm = theta.copy()
        tm[j] -= step
        pp, _ = _predict(field.with_theta(tp), windows, solver)
        pm, _ = _predict(field.with_theta(tm), windows, solver)
        rp = pp[:, 1:] - windows.targets[:, 1:]
        rm = pm[:, 1:] - windows.targets[:, 1:]
        diff = np.sum((pp[:, 1:] - pm[:, 1:]) * (rp + rm))
        if loss.beta2:
            dp, dm = np.diff(pp, axis=1), np.diff(pm, axis=1)
            diff += 0.5 * loss.beta2 * np.sum((dp - dm) * (dp + dm))
        diff += loss.beta1 * (abs(tp[j]) - abs(tm[j]))
        fd[j] = diff / (2 * step)
    return fd


def write_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
