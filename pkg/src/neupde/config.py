"""Experiment configuration: JSON documents checked against a schema before
any computation.  Unknown keys are rejected at every level."""

import copy
import json
from importlib import resources

import jsonschema

from .errors import ConfigError

_num = {"type": "number"}
_int = {"type": "integer"}
_pos_int = {"type": "integer", "minimum": 1}
_nonneg = {"type": "number", "minimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SOLVER = _obj({
    "scheme": {"enum": ["euler", "rk4", "rk45"]},
    "substeps": _pos_int,
    "rk45_tol": {"type": "number", "exclusiveMinimum": 0},
    "max_steps": _pos_int,
})

TRAIN = _obj({
    "beta1": _nonneg,
    "beta2": _nonneg,
    "learning_rate": {"type": "number", "exclusiveMinimum": 0},
    "adam_beta1": _nonneg,
    "adam_beta2": _nonneg,
    "adam_eps": _nonneg,
    "window_length": _pos_int,
    "batch_size": _pos_int,
    "iterations": {"type": "integer", "minimum": 0},
    "engine": {"enum": ["bptt", "adjoint"]},
    "overlap": {"type": "boolean"},
    "adjoint_substeps": _pos_int,
    "eval_every": {"type": "integer", "minimum": 0},
    "chunk_windows": {"type": "integer", "minimum": 0},
})

ACT = {"enum": ["tanh", "elu", "paper_elu"]}

ODE_DATA = _obj({
    "system": {"enum": ["lorenz", "spiral"]},
    "x0": {"type": "array", "items": _num, "minItems": 1},
    "t0": _num,
    "tN": _num,
    "N": {"type": "integer", "minimum": 2},
    "fine_substeps": _pos_int,
    "noise_sigma": _nonneg,
    "seed": _int,
    "use": {"enum": ["clean", "noisy"]},
}, ["system"])

ODE_MODEL = _obj({
    "degree": _pos_int,
    "hidden": _pos_int,
    "activation": ACT,
    "include_time": {"type": "boolean"},
    "output_scale": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
}, ["degree", "hidden"])

PDE_DATA = _obj({
    "nx": {"type": "integer", "minimum": 3},
    "ny": {"type": "integer", "minimum": 3},
    "dt": {"type": "number", "exclusiveMinimum": 0},
    "stamps": {"type": "integer", "minimum": 2},
    "store_every": _pos_int,
    "amplitude": _num,
    "noise_sigma": _nonneg,
    "n_train": _pos_int,
    "seed": _int,
})

PDE_MODEL = _obj({
    "channels": {"type": "array", "uniqueItems": True, "minItems": 1,
                 "items": {"enum": ["t", "x", "y", "u", "ux", "uy", "uxx", "uxy", "uyy"]}},
    "degree": _pos_int,
    "hidden": _pos_int,
    "activation": ACT,
    "bounds": {"enum": ["global", "channel"]},
}, ["degree", "hidden"])

ROM_DATA = _obj({
    "nx": {"type": "integer", "minimum": 3},
    "ny": {"type": "integer", "minimum": 3},
    "t0": _num,
    "tN": _num,
    "N": {"type": "integer", "minimum": 2},
    "a0": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
    "noise_sigma": _nonneg,
    "fine_substeps": _pos_int,
    "seed": _int,
})

ROM_MODEL = _obj({
    "rank": _pos_int,
    "degree": _pos_int,
    "hidden": _pos_int,
    "activation": ACT,
    "closure": {"type": "boolean"},
}, ["rank"])

BASELINE = _obj({
    "method": {"enum": ["stlsq", "lasso"]},
    "degree": _pos_int,
    "include_time": {"type": "boolean"},
    "constant": {"type": "boolean"},
    "threshold": _nonneg,
    "lambda": _nonneg,
    "max_iters": _pos_int,
    "data": _obj({
        "N": {"type": "integer", "minimum": 2},
        "fine_substeps": _pos_int,
        "use": {"enum": ["clean", "noisy"]},
    }),
})

GRADCHECK = _obj({
    "windows": _pos_int,
    "window_length": _pos_int,
    "step": {"type": "number", "exclusiveMinimum": 0},
    "adjoint_substeps": _pos_int,
    "tolerance": {"type": "number", "exclusiveMinimum": 0},
})

_COMMON = {
    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "kind": {"enum": ["ode", "pde", "rom"]},
    "description": {"type": "string"},
    "seed": _int,
    "solver": SOLVER,
    "train": TRAIN,
    "baseline": BASELINE,
    "gradcheck": GRADCHECK,
}


def _kind_schema(kind, data, model):
    props = dict(_COMMON, data=data, model=model)
    props["kind"] = {"const": kind}
    return _obj(props, ["name", "kind", "data", "model"])


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["ode", "pde", "rom"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}}, "then": _kind_schema(k, d, m)}
        for k, d, m in (("ode", ODE_DATA, ODE_MODEL), ("pde", PDE_DATA, PDE_MODEL),
                        ("rom", ROM_DATA, ROM_MODEL))
    ],
}


def validate(doc):
    """Raise ConfigError listing the first schema violation."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}")
    return doc


def load_config(path, seed=None, engine=None):
    """Read, validate, and apply command-line overrides.

    ``seed`` replaces every seed in the document (model, sampling and the
    data noise), so a new seed gives a new noise realization too.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    validate(doc)
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc["seed"] = int(seed)
        if "data" in doc:
            doc["data"]["seed"] = int(seed)
    if engine is not None:
        doc.setdefault("train", {})["engine"] = engine
    return doc


def shipped_configs():
    """Names of the experiment configs bundled with the package."""
    return sorted(p.name for p in resources.files("neupde.configs").iterdir()
                  if p.name.endswith(".json"))


def shipped_config_path(name):
    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files("neupde.configs") / name)
