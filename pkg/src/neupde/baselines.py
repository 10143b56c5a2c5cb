"""Sparse-regression baselines on the same monomial dictionary:
sequentially thresholded least squares and LASSO with debiasing."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .dictionary import eval_dictionary
from .errors import DimensionMismatch, SingularSystem, TooShort

log = logging.getLogger(__name__)


def estimate_derivatives(traj):
    """Second-order finite differences: central inside, one-sided at the ends."""
    ts = np.asarray(traj.timestamps, dtype=float)
    if ts.size < 3:
        raise TooShort("derivative estimation needs at least 3 stamps")
    return np.gradient(np.asarray(traj.states, dtype=float), ts, axis=0, edge_order=2)


@dataclass
class RegressionProblem:
    """Fit ``targets ~ Theta @ Xi`` column by column."""

    Theta: np.ndarray
    targets: np.ndarray
    names: list = None
    normalized: bool = False
    constant: bool = False

    def __post_init__(self):
        self.Theta = np.asarray(self.Theta, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        if self.Theta.ndim != 2 or self.Theta.shape[0] != self.targets.shape[0]:
            raise DimensionMismatch("Theta and targets need the same row count")
        if self.names is None:
            self.names = [f"f{j}" for j in range(self.Theta.shape[1])]
        if len(self.names) != self.Theta.shape[1]:
            raise DimensionMismatch("one name per dictionary column")


def build_problem(traj, spec, constant=False, derivatives=None):
    """Regression on unnormalized features of ``traj`` with estimated derivatives."""
    dX = estimate_derivatives(traj) if derivatives is None else np.asarray(derivatives, dtype=float)
    Theta = eval_dictionary(spec, traj.timestamps if spec.include_time else None, traj.states)
    names = spec.term_names()
    if constant:
        Theta = np.hstack([np.ones((Theta.shape[0], 1)), Theta])
        names = ["1"] + names
    return RegressionProblem(Theta, dX, names, normalized=False, constant=constant)


def _lstsq(A, b, strict):
    if A.shape[1] == 0:
        return np.zeros((0,) + b.shape[1:])
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < A.shape[1]:
        if strict:
            raise SingularSystem(f"support of size {A.shape[1]} has rank {rank}")
        log.warning("rank-deficient support (%d of %d); using the minimum-norm solution",
                    rank, A.shape[1])
    return coef


def stlsq(problem, threshold, max_iters=10, strict=False):
    """Alternate least squares and hard thresholding (|xi| < threshold -> 0)
    until the support stops changing or ``max_iters`` passes.

    Rank-deficient supports fall back to the minimum-norm solution with a
    logged warning, or raise :class:`SingularSystem` when ``strict``.
    """
    Theta, Y = problem.Theta, problem.targets
    n, d = Theta.shape[1], Y.shape[1]
    Xi = np.zeros((n, d))
    for k in range(d):
        support = np.ones(n, dtype=bool)
        xi = np.zeros(n)
        for _ in range(max(max_iters, 1)):
            xi = np.zeros(n)
            xi[support] = _lstsq(Theta[:, support], Y[:, k], strict)
            new = np.abs(xi) >= threshold
            xi[~new] = 0.0
            if np.array_equal(new, support):
                break
            support = new
        else:
            xi = np.zeros(n)
            xi[support] = _lstsq(Theta[:, support], Y[:, k], strict)
            xi[np.abs(xi) < threshold] = 0.0
        Xi[:, k] = xi
    return Xi


@dataclass
class LassoInfo:
    objective: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    duality_gap: list = field(default_factory=list)
    support: np.ndarray = None


def _soft(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def lasso_objective(Theta, y, xi, lam):
    r = y - Theta @ xi
    return 0.5 * float(r @ r) / Theta.shape[0] + lam * float(np.sum(np.abs(xi)))


def _duality_gap(Theta, y, xi, lam):
    N = Theta.shape[0]
    r = y - Theta @ xi
    primal = 0.5 * float(r @ r) / N + lam * float(np.sum(np.abs(xi)))
    corr = np.max(np.abs(Theta.T @ r)) / N if Theta.shape[1] else 0.0
    nu = r / N * (min(1.0, lam / corr) if corr > 0 else 1.0)
    dual = float(nu @ y) - 0.5 * N * float(nu @ nu)
    return primal - dual


def lasso(Theta, y, lam, max_iters=10000, tol=1e-8):
    """Proximal gradient for 1/(2N) ||y - Theta xi||^2 + lam ||xi||_1.

    Returns (xi, objective history, converged flag, iterations).
    """
    N = Theta.shape[0]
    xi = np.zeros(Theta.shape[1])
    L = np.linalg.norm(Theta, 2) ** 2 / N if Theta.size else 0.0
    history = [lasso_objective(Theta, y, xi, lam)]
    if L == 0.0:
        return xi, history, True, 0
    step = 1.0 / L
    for it in range(1, max_iters + 1):
        grad = Theta.T @ (Theta @ xi - y) / N
        new = _soft(xi - step * grad, step * lam)
        history.append(lasso_objective(Theta, y, new, lam))
        delta = np.max(np.abs(new - xi))
        xi = new
        if delta <= tol * max(1.0, np.max(np.abs(xi))):
            return xi, history, True, it
    return xi, history, False, max_iters


def lasso_debias(problem, lam, max_iters=10000, tol=1e-8, normalize_columns=True):
    """LASSO per target column followed by least squares on the recovered support.

    With ``normalize_columns`` the LASSO runs on unit-norm columns (scaled
    back afterwards).  Returns (Xi, LassoInfo); a non-converged column is
    logged together with its final duality-gap estimate.
    """
    Theta, Y = problem.Theta, problem.targets
    n, d = Theta.shape[1], Y.shape[1]
    norms = np.linalg.norm(Theta, axis=0) if normalize_columns else np.ones(n)
    norms = np.where(norms > 0, norms, 1.0)
    A = Theta / norms
    Xi = np.zeros((n, d))
    info = LassoInfo(support=np.zeros((n, d), dtype=bool))
    for k in range(d):
        xi, hist, ok, its = lasso(A, Y[:, k], lam, max_iters, tol)
        gap = _duality_gap(A, Y[:, k], xi, lam)
        if not ok:
            log.warning("lasso column %d stopped after %d iterations, duality gap %.3g", k, its, gap)
        support = xi != 0
        info.objective.append(hist)
        info.converged.append(ok)
        info.iterations.append(its)
        info.duality_gap.append(gap)
        info.support[:, k] = support
        if support.any():
            Xi[support, k] = _lstsq(Theta[:, support], Y[:, k], strict=False)
    return Xi, info


def write_coefficients(path, Xi, names, components=None):
    """CSV with a ``term`` column and one coefficient column per component."""
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    components = components or [f"dx{k + 1}" for k in range(Xi.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["term"] + list(components))
        for name, row in zip(names, Xi):
            w.writerow([name] + [repr(float(v)) for v in row])


def read_coefficients(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = [r[0] for r in rows[1:]]
    return names, np.array([[float(v) for v in r[1:]] for r in rows[1:]]), rows[0][1:]
