"""Build data, models and training runs from a validated experiment config."""

import numpy as np

from .baselines import build_problem, lasso_debias, stlsq
from .dictionary import DictionarySpec, fit_bounds
from .gradient import LossSpec, grad_check
from .odeint import SolverConfig, derivative_scale, make_field
from .pde import BurgersDataConfig, make_burgers_dataset, make_pde_model
from .rom import (RomConfig, RomSynthConfig, make_rom_snapshots, project, snapshot_matrix,
                  svd_truncate, train_rom)
from .systems import GeneratorConfig, generate
from .train import TrainConfig, gather_windows, sample_minibatch, train_ode


def solver_config(doc):
    return SolverConfig(**doc.get("solver", {}))


def train_config(doc, **overrides):
    kw = dict(doc.get("train", {}))
    kw.update(overrides)
    return TrainConfig(seed=doc.get("seed", 0), solver=solver_config(doc), **kw)


def generator_config(doc, **overrides):
    kw = {k: v for k, v in doc["data"].items() if k != "use"}
    kw.update(overrides)
    return GeneratorConfig(**kw)


def ode_data(doc):
    """(clean, noisy, training trajectory)."""
    clean, noisy = generate(generator_config(doc))
    use = doc["data"].get("use", "noisy")
    return clean, noisy, (clean if use == "clean" else noisy)


def build_ode_model(doc, data):
    m = doc["model"]
    spec = DictionarySpec(data.dim, m["degree"], include_time=m.get("include_time", False))
    scale = m.get("output_scale", "auto")
    if scale == "auto":
        scale = derivative_scale([data])
    span = (float(data.timestamps[0]), float(data.timestamps[-1]))
    return make_field(spec, fit_bounds(data), m["hidden"], m.get("activation", "elu"),
                      doc.get("seed", 0), scale, span)


def run_ode(doc, data=None, callback=None, **train_overrides):
    """Returns (initial model, trained model, history, training data)."""
    if data is None:
        data = ode_data(doc)[2]
    field0 = build_ode_model(doc, data)
    field, history = train_ode(data, field0, train_config(doc, **train_overrides), callback)
    return field0, field, history, data


def burgers_data_config(doc):
    return BurgersDataConfig(**doc["data"])


def pde_data(doc):
    cfg = burgers_data_config(doc)
    return make_burgers_dataset(cfg.seed, cfg)


def build_pde_model(doc, train):
    m = doc["model"]
    kw = {k: m[k] for k in ("degree", "hidden", "activation") if k in m}
    if "channels" in m:
        kw["channels"] = tuple(m["channels"])
    return make_pde_model(train, train[0].grid, seed=doc.get("seed", 0),
                          bounds_mode=m.get("bounds", "global"), **kw)


def run_pde(doc, data=None, callback=None, **train_overrides):
    """Returns (initial model, trained model, history, (train, test))."""
    train, test = data if data is not None else pde_data(doc)
    model0 = build_pde_model(doc, train)
    model, history = train_ode(train, model0, train_config(doc, **train_overrides), callback)
    return model0, model, history, (train, test)


def rom_synth_config(doc):
    kw = dict(doc["data"])
    if "a0" in kw:
        kw["a0"] = tuple(kw["a0"])
    return RomSynthConfig(**kw)


def rom_data(doc):
    """(timestamps, snapshot fields (N+1, nx, ny), true coefficients)."""
    return make_rom_snapshots(rom_synth_config(doc))


def run_rom(doc, data=None, closure=None, callback=None, **train_overrides):
    """Returns (basis, projected coefficients, trained model, history)."""
    ts, fields, _ = data if data is not None else rom_data(doc)
    m = doc["model"]
    basis = svd_truncate(snapshot_matrix(fields), m["rank"], shape=fields.shape[1:])
    alpha = project(basis, snapshot_matrix(fields), ts)
    rc = RomConfig(degree=m.get("degree", 2), hidden=m.get("hidden", 8),
                   activation=m.get("activation", "elu"),
                   closure=m.get("closure", True) if closure is None else closure,
                   seed=doc.get("seed", 0))
    field, history = train_rom(alpha, config=rc, train_config=train_config(doc, **train_overrides),
                               callback=callback)
    return basis, alpha, field, history


def run_baseline(doc):
    """(term names, coefficient matrix) from the configured sparse regression."""
    b = doc.get("baseline", {})
    over = {k: v for k, v in b.get("data", {}).items() if k != "use"}
    clean, noisy = generate(generator_config(doc, **over))
    traj = noisy if b.get("data", {}).get("use", "clean") == "noisy" else clean
    spec = DictionarySpec(traj.dim, b.get("degree", doc["model"]["degree"]),
                          include_time=b.get("include_time", False))
    problem = build_problem(traj, spec, constant=b.get("constant", False))
    if b.get("method", "stlsq") == "lasso":
        Xi, _ = lasso_debias(problem, b.get("lambda", 1e-2), b.get("max_iters", 10000))
    else:
        Xi = stlsq(problem, b.get("threshold", 0.5), b.get("max_iters", 10))
    return problem.names, Xi


def run_gradcheck(doc):
    """Finite-difference check of the configured engine on a few windows."""
    g = doc.get("gradcheck", {})
    cfg = train_config(doc)
    k = g.get("window_length", cfg.window_length)
    rng = np.random.default_rng(doc.get("seed", 0))
    if doc["kind"] == "pde":
        train, _ = pde_data(doc)
        model, data = build_pde_model(doc, train), train
    else:
        data = ode_data(doc)[2]
        model = build_ode_model(doc, data)
    picks = sample_minibatch(rng, data, k, g.get("windows", 2), overlap=True)
    windows = gather_windows(data, picks, k)
    # the adjoint's smoothness term is the continuous integral, which central
    # differences of the discrete objective cannot check, so it is dropped there
    beta2 = 0.0 if cfg.engine == "adjoint" else cfg.beta2
    report = grad_check(model, windows, cfg.solver, LossSpec(cfg.beta1, beta2),
                        step=g.get("step", 1e-6), engine=cfg.engine,
                        adjoint_substeps=g.get("adjoint_substeps", 50))
    report["n_params"] = int(model.n_params)
    report["beta2"] = beta2
    if "tolerance" in g:
        report["tolerance"] = g["tolerance"]
        report["passed"] = bool(report["worst_rel_err"] <= g["tolerance"])
    return report
