"""Adam training with temporal minibatches of short windows."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import Divergence, NonFiniteState, TooShort
from .gradient import LossSpec, Windows, adjoint_gradient, bptt_gradient, loss_terms, _predict
from .odeint import SolverConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    beta1: float = 1e-4
    beta2: float = 1e-5
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    window_length: int = 5
    batch_size: int = 16
    iterations: int = 1000
    seed: int = 0
    engine: str = "bptt"
    solver: SolverConfig = field(default_factory=SolverConfig)
    overlap: bool = True
    adjoint_substeps: int = 10
    eval_every: int = 1
    chunk_windows: int = 0

    def __post_init__(self):
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        if self.window_length < 1 or self.batch_size < 1:
            raise ValueError("window_length and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.engine not in ("bptt", "adjoint"):
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def loss(self):
        return LossSpec(self.beta1, self.beta2)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["solver"] = self.solver.to_dict()
        return d


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(theta, grad, state, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Bias-corrected Adam update; returns (new theta, new state)."""
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    return theta - lr * mhat / (np.sqrt(vhat) + eps), AdamState(m, v, t)


def _series_arrays(data):
    items = data if isinstance(data, (list, tuple)) else [data]
    out = []
    for item in items:
        values = getattr(item, "states", None)
        if values is None:
            values = item.values
        out.append((np.asarray(item.timestamps, dtype=float), np.asarray(values, dtype=float)))
    return out


def _disjoint_starts(rng, n_stamps, length, count):
    free = n_stamps - count * length
    if free < 0:
        return None
    offsets = np.sort(rng.choice(free + count, size=count, replace=False))
    return offsets + np.arange(count) * (length - 1)


def sample_minibatch(rng, data, k, batch_size, overlap=True):
    """Draw ``batch_size`` windows of k+1 consecutive stamps.

    Returns a list of (series index, start index) pairs.  With
    ``overlap=False`` the windows occupy disjoint stamp ranges.
    """
    series = _series_arrays(data)
    lengths = np.array([len(t) for t, _ in series])
    valid = lengths >= k + 1
    if not valid.any():
        raise TooShort(f"no series has the {k + 1} stamps a window needs")
    candidates = np.flatnonzero(valid)
    if overlap:
        picks = []
        for _ in range(batch_size):
            s = int(rng.choice(candidates))
            picks.append((s, int(rng.integers(0, lengths[s] - k))))
        return picks
    capacity = lengths[candidates] // (k + 1)
    if capacity.sum() < batch_size:
        raise TooShort(f"cannot place {batch_size} disjoint windows of {k + 1} stamps")
    while True:
        counts = rng.multinomial(batch_size, np.full(len(candidates), 1.0 / len(candidates)))
        if np.all(counts <= capacity):
            break
    picks = []
    for s, c in zip(candidates, counts):
        if c:
            for start in _disjoint_starts(rng, lengths[s], k + 1, c):
                picks.append((int(s), int(start)))
    return picks


def gather_windows(data, picks, k):
    series = _series_arrays(data)
    times = np.stack([series[s][0][i:i + k + 1] for s, i in picks])
    targets = np.stack([series[s][1][i:i + k + 1] for s, i in picks])
    return Windows(times, targets.copy())


def tile_windows(data, k):
    """Cover every stamp with consecutive windows of k intervals.

    Returns a list of :class:`Windows` batches (one per distinct window length,
    since the last window of a series may be shorter).
    """
    by_len = {}
    for s, (t, _) in enumerate(_series_arrays(data)):
        n = len(t) - 1
        for start in range(0, n, k):
            kk = min(k, n - start)
            by_len.setdefault(kk, []).append((s, start))
    return [gather_windows(data, picks, kk) for kk, picks in sorted(by_len.items())]


def full_data_mse(field, data, k, solver):
    """Mean-squared misfit over all tiled windows (each started from the data)."""
    sq, count = 0.0, 0
    for w in tile_windows(data, k):
        pred, _ = _predict(field, w, solver)
        r = pred[:, 1:] - w.targets[:, 1:]
        sq += float(np.sum(r * r))
        count += r.size
    return sq / count


def _threads():
    n = int(os.environ.get("NEUPDE_THREADS", "1") or 1)
    if n == 0:
        return os.cpu_count() or 1
    return max(n, 1)


def batch_gradient(field, windows, config):
    """Gradient and (misfit, smoothness) over a minibatch.

    Windows are split into fixed chunks (``chunk_windows``) that may run in
    parallel; chunk results are reduced in chunk order so the result does not
    depend on the thread count.
    """
    engine = adjoint_gradient if config.engine == "adjoint" else bptt_gradient
    noreg = LossSpec(0.0, config.beta2)
    B = windows.batch
    size = config.chunk_windows if config.chunk_windows > 0 else B
    chunks = [Windows(windows.times[i:i + size], windows.targets[i:i + size])
              for i in range(0, B, size)]

    def run(w):
        if config.engine == "adjoint":
            g, _, pred = engine(field, w, config.solver, noreg, config.adjoint_substeps,
                                return_loss=True)
        else:
            g, _, pred = engine(field, w, config.solver, noreg, return_loss=True)
        misfit, _, smooth = loss_terms(pred, w, field.theta, noreg)
        return g, misfit, smooth, pred[:, 1:].size

    threads = _threads()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(w) for w in chunks]
    grad = np.zeros(field.n_params)
    misfit = smooth = 0.0
    count = 0
    for g, mf, sm, c in results:
        grad += g
        misfit += mf
        smooth += sm
        count += c
    theta = field.theta
    grad += config.beta1 * np.sign(theta)
    return grad, misfit, smooth, count


def train_ode(data, field0, config, callback=None):
    """Minimize the windowed trajectory objective with Adam.

    Returns (trained field, history) where history holds one dict per
    iteration with keys ``iteration``, ``minibatch_mse``, ``loss`` (objective
    value on the minibatch), ``full_mse`` (``None`` when not evaluated that
    iteration) and ``skipped``.
    """
    rng = np.random.default_rng(config.seed)
    field = field0
    theta = field.theta.copy()
    state = AdamState.zeros(theta.size)
    lr = config.learning_rate
    k = config.window_length
    history = []
    skipped = []
    halved_at = -10**9
    for it in range(config.iterations):
        picks = sample_minibatch(rng, data, k, config.batch_size, config.overlap)
        windows = gather_windows(data, picks, k)
        entry = {"iteration": it, "minibatch_mse": None, "loss": None, "full_mse": None,
                 "skipped": False}
        try:
            grad, misfit, smooth, count = batch_gradient(field, windows, config)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteState("non-finite gradient")
        except NonFiniteState as exc:
            log.debug("iteration %d skipped: %s", it, exc)
            entry["skipped"] = True
            skipped.append(it)
            if it - halved_at >= 100:
                lr *= 0.5
                halved_at = it
            recent = [s for s in skipped if s > it - 100]
            if len(recent) > 50:
                raise Divergence(f"{len(recent)} of the last 100 steps were skipped")
        else:
            entry["minibatch_mse"] = misfit / count
            entry["loss"] = misfit + smooth + config.beta1 * float(np.sum(np.abs(theta)))
            theta, state = adam_step(theta, grad, state, lr, config.adam_beta1,
                                     config.adam_beta2, config.adam_eps)
            field = field.with_theta(theta)
        last = it == config.iterations - 1
        if config.eval_every and (it % config.eval_every == 0 or last):
            try:
                entry["full_mse"] = full_data_mse(field, data, k, config.solver)
            except NonFiniteState:
                entry["full_mse"] = float("inf")
        history.append(entry)
        if callback is not None:
            callback(entry, field)
    return field, history
