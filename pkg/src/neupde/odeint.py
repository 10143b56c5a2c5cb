"""Explicit Runge-Kutta integration of learned vector fields.

Fields follow a small protocol: ``forward(t, X) -> (dX/dt, cache)`` on a
batch of states ``X`` (leading axis = batch), ``vjp(cache, W) -> (dX,
dtheta)``, plus ``theta`` / ``with_theta`` for the flat parameter vector.
``t`` is a scalar or one time per batch row.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dictionary import DictionarySpec, NormalizationBounds, normalize
from .errors import DimensionMismatch, NonFiniteState
from .network import MlpParams


# Butcher tableaus: (c, a, b, b_err).  b_err is the embedded lower-order
# solution, used only by the adaptive scheme.
@dataclass(frozen=True)
class Tableau:
    c: tuple
    a: tuple
    b: tuple
    b_err: tuple = None

    @property
    def stages(self):
        return len(self.c)


EULER = Tableau(c=(0.0,), a=((),), b=(1.0,))
RK4 = Tableau(
    c=(0.0, 0.5, 0.5, 1.0),
    a=((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
    b=(1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0),
)
DOPRI5 = Tableau(
    c=(0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0),
    a=(
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    ),
    b=(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0),
    b_err=(5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40),
)
TABLEAUS = {"euler": EULER, "rk4": RK4, "rk45": DOPRI5}


@dataclass
class SolverConfig:
    scheme: str = "rk4"
    substeps: int = 1
    rk45_tol: float = 1e-6
    max_steps: int = 100000

    def __post_init__(self):
        if self.scheme not in TABLEAUS:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1")
        if self.rk45_tol <= 0:
            raise ValueError("rk45_tol must be positive")
        self.substeps = int(self.substeps)

    def to_dict(self):
        return {"scheme": self.scheme, "substeps": self.substeps, "rk45_tol": self.rk45_tol,
                "max_steps": self.max_steps}


@dataclass
class Trajectory:
    timestamps: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.states) != len(self.timestamps):
            raise DimensionMismatch("one state per timestamp required")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def dim(self):
        return self.states.shape[1]

    def __len__(self):
        return len(self.timestamps)


def _bc(v, x):
    """Broadcast a scalar or per-row array against a batched state."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return v
    return v.reshape(v.shape + (1,) * (x.ndim - v.ndim))


def _stages(field, t, x, h, tab, keep):
    """One explicit RK step; returns (x_next, stage caches or None, stage values)."""
    hb = _bc(h, x)
    ks, caches = [], []
    for i in range(tab.stages):
        xi = x
        for j, aij in enumerate(tab.a[i]):
            if aij != 0.0:
                xi = xi + (hb * aij) * ks[j]
        ki, cache = field.forward(t + tab.c[i] * np.asarray(h), xi)
        ks.append(ki)
        if keep:
            caches.append(cache)
    incr = 0.0
    for bi, ki in zip(tab.b, ks):
        if bi != 0.0:
            incr = incr + bi * ki
    return x + hb * incr, caches, ks


def _stages_vjp(field, caches, h, tab, xbar):
    """Reverse of :func:`_stages` given the cotangent of x_next.

    Returns (cotangent of x, parameter gradient).
    """
    hb = _bc(h, xbar)
    kbar = [hb * bi * xbar if bi != 0.0 else None for bi in tab.b]
    xb = xbar.copy()
    gtheta = 0.0
    for i in range(tab.stages - 1, -1, -1):
        if kbar[i] is None:
            continue
        dy, dth = field.vjp(caches[i], kbar[i])
        xb += dy
        gtheta = gtheta + dth
        for j, aij in enumerate(tab.a[i]):
            if aij != 0.0:
                contrib = (hb * aij) * dy
                kbar[j] = contrib if kbar[j] is None else kbar[j] + contrib
    return xb, gtheta


def _check_finite(x, interval=None):
    if not np.all(np.isfinite(x)):
        where = "" if interval is None else f" in interval {interval}"
        raise NonFiniteState(f"non-finite state{where}", interval=interval)


def rk_step(field, t, x, h, scheme="rk4"):
    """Advance ``x`` by one explicit step of size ``h``."""
    tab = TABLEAUS[scheme] if isinstance(scheme, str) else scheme
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None] if single else x
    out, _, _ = _stages(field, t, X, h, tab, keep=False)
    _check_finite(out)
    return out[0] if single else out


def _error_norm(err, x, xn, tol):
    scale = tol + tol * np.maximum(np.abs(x), np.abs(xn))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _adaptive_interval(field, t0, t1, x, tol, max_steps, record, interval):
    """Dormand-Prince steps from t0 to t1 (scalars or per-row arrays).

    Steps are chosen on the unit interval s in [0, 1] shared by all rows,
    with h = ds (t1 - t0).  Returns x(t1) and, if ``record``, the list of
    (t, x, h, caches) for every accepted step.
    """
    span = np.asarray(t1, dtype=float) - np.asarray(t0, dtype=float)
    s, ds, steps = 0.0, 0.1, []
    n = 0
    while s < 1.0:
        if n >= max_steps:
            raise NonFiniteState("adaptive step limit reached", interval=interval)
        n += 1
        ds = min(ds, 1.0 - s)
        h = ds * span
        t = np.asarray(t0) + s * span
        xn, caches, ks = _stages(field, t, x, h, DOPRI5, keep=record)
        err = _bc(h, x) * sum(e * k for e, k in zip(np.subtract(DOPRI5.b, DOPRI5.b_err), ks))
        enorm = _error_norm(err, x, xn, tol) if np.all(np.isfinite(xn)) else np.inf
        if enorm <= 1.0:
            if record:
                steps.append((t, x, h, caches))
            x = xn
            s = 1.0 if ds >= 1.0 - s else s + ds
        factor = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
        ds *= factor
        if ds < 1e-12:
            raise NonFiniteState("adaptive step size underflow", interval=interval)
    return x, steps


def rollout(field, x0, times, solver, record=False):
    """Integrate a batch of windows.

    ``x0`` is (B, ...) and ``times`` is (B, K+1) (or (K+1,) shared).  Returns
    (states with shape (K+1, B, ...), tape) where ``tape`` is a list of
    per-interval step records when ``record`` is set.
    """
    X = np.asarray(x0, dtype=float)
    T = np.asarray(times, dtype=float)
    K = T.shape[-1] - 1
    out = [X]
    tape = []
    tab = TABLEAUS[solver.scheme]
    for i in range(K):
        t0, t1 = T[..., i], T[..., i + 1]
        steps = []
        if solver.scheme == "rk45":
            X, steps = _adaptive_interval(field, t0, t1, X, solver.rk45_tol, solver.max_steps,
                                          record, i)
        else:
            h = (t1 - t0) / solver.substeps
            for s in range(solver.substeps):
                t = t0 + s * h
                Xn, caches, _ = _stages(field, t, X, h, tab, keep=record)
                if record:
                    steps.append((t, X, h, caches))
                X = Xn
        _check_finite(X, i)
        out.append(X)
        if record:
            tape.append(steps)
    return np.stack(out), tape


def rollout_vjp(field, tape, solver, xbar_at_stamps):
    """Backpropagate through a recorded rollout.

    ``xbar_at_stamps`` has shape (K+1, B, ...): the direct loss cotangents of
    each stored state.  Returns the parameter gradient (summed over batch).
    """
    tab = TABLEAUS[solver.scheme]
    K = len(tape)
    xb = xbar_at_stamps[K].copy()
    g = np.zeros(field.n_params)
    for i in range(K - 1, -1, -1):
        for t, X, h, caches in reversed(tape[i]):
            xb, dth = _stages_vjp(field, caches, h, tab, xb)
            g += dth
        xb = xb + xbar_at_stamps[i]
    return g


def integrate(field, x0, timestamps, solver=None):
    """Solve from ``x0`` and return the states at every timestamp."""
    solver = solver or SolverConfig()
    ts = np.asarray(timestamps, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    states, _ = rollout(field, x0[None], ts[None], solver)
    return Trajectory(ts, states[:, 0])


class VectorField:
    """g(t, x) = [A0 x +] s * F(D(N(x), tau(t)), theta).

    ``tau`` maps ``time_span`` affinely onto [0, 1] and ``s`` is a fixed
    output scale fitted from the data (1 disables it).  With
    ``closure=False`` the perceptron is switched off and only A0 is trained.
    """

    def __init__(self, spec, bounds, params, linear_part=None, output_scale=1.0,
                 time_span=(0.0, 1.0), closure=True):
        self.spec = spec
        self.bounds = bounds
        self.params = params
        self.linear_part = None if linear_part is None else np.asarray(linear_part, dtype=float)
        self.output_scale = float(output_scale)
        self.time_span = (float(time_span[0]), float(time_span[1]))
        self.closure = bool(closure)
        if self.time_span[1] <= self.time_span[0]:
            raise ValueError("time_span must be increasing")
        n, _, o = params.shape
        if n != len(spec):
            raise DimensionMismatch(f"network takes {n} inputs but dictionary has {len(spec)} terms")
        if o != spec.dim:
            raise DimensionMismatch("network output size must equal state dimension")
        if self.linear_part is not None and self.linear_part.shape != (o, o):
            raise DimensionMismatch("linear part must be square in the state dimension")

    @property
    def dim(self):
        return self.spec.dim

    @property
    def n_params(self):
        n = self.params.size if self.closure else 0
        if self.linear_part is not None:
            n += self.linear_part.size
        return n

    @property
    def theta(self):
        parts = [self.params.flatten()] if self.closure else []
        if self.linear_part is not None:
            parts.append(self.linear_part.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise DimensionMismatch(f"expected {self.n_params} parameters, got {theta.size}")
        params, i = self.params, 0
        if self.closure:
            n, h, o = params.shape
            params = MlpParams.unflatten(theta[:params.size], n, h, o, params.activation)
            i = params.size
        A0 = None if self.linear_part is None else theta[i:].reshape(self.linear_part.shape).copy()
        return VectorField(self.spec, self.bounds, params, A0, self.output_scale,
                           self.time_span, self.closure)

    def _inputs(self, t, X):
        Z = normalize(X, self.bounds)
        if self.spec.include_time:
            t0, t1 = self.time_span
            tau = (np.asarray(t, dtype=float) - t0) / (t1 - t0)
            tau = np.broadcast_to(np.reshape(tau, (-1, 1)), (X.shape[0], 1))
            Z = np.hstack([tau, Z])
        return np.ascontiguousarray(Z)

    def forward(self, t, X):
        X = np.asarray(X, dtype=float)
        p = self.params
        if self.closure:
            Z = self._inputs(t, X)
            Phi, pre, out = _kernels.field_forward(Z, self.spec.exponents, p.A1, p.b1, p.A2, p.b2,
                                                   p.act_code)
            out = self.output_scale * out
        else:
            Z = Phi = pre = None
            out = np.zeros_like(X)
        if self.linear_part is not None:
            out = out + X @ self.linear_part.T
        return out, (X, Z, Phi, pre)

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.forward(t, x[None])[0][0]
        return self.forward(t, x)[0]

    def vjp(self, cache, W):
        X, Z, Phi, pre = cache
        parts = []
        dX = np.zeros_like(X)
        if self.closure:
            p = self.params
            dZ, dA1, db1, dA2, db2 = _kernels.field_backward(
                Z, self.spec.exponents, Phi, pre, p.A1, p.A2, p.act_code, self.output_scale * W)
            if self.spec.include_time:
                dZ = dZ[:, 1:]
            dX += dZ * self.bounds.scale
            parts += [dA1.ravel(), dA2.ravel(), db1, db2]
        if self.linear_part is not None:
            dX += W @ self.linear_part
            parts.append((W.T @ X).ravel())
        return dX, (np.concatenate(parts) if parts else np.zeros(0))

    def _hidden_jac(self, t, X):
        """Rows of s * A2 diag(sigma') A1 per batch point, shape (B, d, n)."""
        Z = self._inputs(t, X)
        p = self.params
        _, pre, _ = _kernels.field_forward(Z, self.spec.exponents, p.A1, p.b1, p.A2, p.b2, p.act_code)
        _, ds = _kernels.activation(p.act_code, pre)
        M = np.einsum("oh,bh,hn->bon", p.A2, ds, p.A1) * self.output_scale
        J = _kernels.monomials_jacobian(Z, self.spec.exponents)
        return M, J

    def jacobian_x(self, t, X):
        """dg/dx, shape (B, d, d)."""
        X = np.asarray(X, dtype=float)
        B, d = X.shape
        out = np.zeros((B, d, d))
        if self.closure:
            M, J = self._hidden_jac(t, X)
            Jz = J[:, :, 1:] if self.spec.include_time else J
            out += np.einsum("bon,bni->boi", M, Jz) * self.bounds.scale
        if self.linear_part is not None:
            out += self.linear_part
        return out

    def time_derivative(self, t, X):
        """Partial dg/dt, shape (B, d)."""
        X = np.asarray(X, dtype=float)
        if not (self.closure and self.spec.include_time):
            return np.zeros_like(X)
        M, J = self._hidden_jac(t, X)
        t0, t1 = self.time_span
        return np.einsum("bon,bn->bo", M, J[:, :, 0]) / (t1 - t0)

    def to_dict(self):
        return {
            "kind": "ode",
            "dictionary": self.spec.to_dict(),
            "bounds": self.bounds.to_dict(),
            "network": self.params.to_dict(),
            "linear_part": None if self.linear_part is None else self.linear_part.tolist(),
            "output_scale": self.output_scale,
            "time_span": list(self.time_span),
            "closure": self.closure,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            DictionarySpec.from_dict(d["dictionary"]),
            NormalizationBounds.from_dict(d["bounds"]),
            MlpParams.from_dict(d["network"]),
            None if d.get("linear_part") is None else np.array(d["linear_part"]),
            d.get("output_scale", 1.0),
            tuple(d.get("time_span", (0.0, 1.0))),
            d.get("closure", True),
        )


class FunctionField:
    """Wrap a plain ``f(t, X) -> dX/dt`` (batched) as a parameter-free field."""

    n_params = 0
    theta = np.zeros(0)

    def __init__(self, f):
        self.f = f

    def forward(self, t, X):
        return self.f(t, X), None

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.f(t, x[None])[0]
        return self.f(t, x)


def make_field(spec, bounds, hidden, activation="elu", seed=0, output_scale=1.0,
               time_span=(0.0, 1.0), linear=False, closure=True):
    from .network import init_params

    params = init_params(len(spec), hidden, spec.dim, activation, seed)
    A0 = np.zeros((spec.dim, spec.dim)) if linear else None
    return VectorField(spec, bounds, params, A0, output_scale, time_span, closure)


def derivative_scale(trajectories):
    """RMS of finite-difference time derivatives; used as the output scale."""
    sq, count = 0.0, 0
    for tr in trajectories:
        d = np.diff(tr.states, axis=0) / np.diff(tr.timestamps)[:, None]
        sq += float(np.sum(d * d))
        count += d.size
    rms = np.sqrt(sq / max(count, 1))
    return rms if rms > 0 else 1.0
