"""Command-line front end.

Exit codes: 0 success, 1 configuration or I/O error, 2 numerical divergence.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import experiments as ex
from .baselines import write_coefficients
from .config import load_config
from .errors import ConfigError, Divergence, NonFiniteState, UnstableStep
from .io import (export_field_csv, load_checkpoint, read_field_series, read_trajectory_csv,
                 save_checkpoint, write_field_series, write_trajectory_csv)
from .odeint import Trajectory, rollout
from .pde import FieldSeries, Grid2D
from .rom import RomBasis, project, reconstruct, rel_l2_terminal, snapshot_matrix

log = logging.getLogger("neupde")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _path(args, doc, suffix):
    return os.path.join(args.out, f"{doc['name']}{suffix}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _emit(obj):
    print(json.dumps(obj, indent=2))


def _need(path):
    if not os.path.exists(path):
        raise _Exit(EXIT_CONFIG, f"missing input {path}; run 'neupde generate' first")
    return path


def _rom_grid(doc):
    d = ex.rom_synth_config(doc)
    return Grid2D.unit(d.nx, d.ny)


# data ---------------------------------------------------------------------

def cmd_generate(args, doc):
    meta = {"config": doc, "seed": doc.get("seed", 0), "files": []}
    if doc["kind"] == "ode":
        clean, noisy, _ = ex.ode_data(doc)
        for tag, traj in (("clean", clean), ("noisy", noisy)):
            path = _path(args, doc, f"_{tag}.csv")
            write_trajectory_csv(path, traj)
            meta["files"].append(path)
        meta["generator"] = ex.generator_config(doc).to_dict()
    elif doc["kind"] == "pde":
        train, test = ex.pde_data(doc)
        for tag, series in (("train", train), ("test", test)):
            path = _path(args, doc, f"_{tag}.field")
            write_field_series(path, series)
            meta["files"].append(path)
        meta["shapes"] = {"train": [len(train)] + list(train[0].values.shape),
                          "test": [len(test)] + list(test[0].values.shape)}
    else:
        ts, fields, _ = ex.rom_data(doc)
        path = _path(args, doc, "_snapshots.field")
        write_field_series(path, FieldSeries(ts, fields, _rom_grid(doc)))
        meta["files"].append(path)
    _write_json(_path(args, doc, ".meta.json"), meta)
    _emit({"files": meta["files"]})


def _load_ode_data(args, doc):
    use = doc["data"].get("use", "noisy")
    return read_trajectory_csv(_need(_path(args, doc, f"_{use}.csv")))


def _load_pde_data(args, doc):
    train = read_field_series(_need(_path(args, doc, "_train.field")))
    test = read_field_series(_need(_path(args, doc, "_test.field")))
    return train, test


def _load_rom_data(args, doc):
    s = read_field_series(_need(_path(args, doc, "_snapshots.field")))[0]
    return s.timestamps, s.values, None


# training -----------------------------------------------------------------

def _write_losses(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "minibatch_mse", "loss", "full_mse", "skipped"])
        for e in history:
            w.writerow([e["iteration"],
                        "" if e["minibatch_mse"] is None else repr(e["minibatch_mse"]),
                        "" if e["loss"] is None else repr(e["loss"]),
                        "" if e["full_mse"] is None else repr(e["full_mse"]),
                        int(e["skipped"])])


def _progress(every):
    def cb(entry, _model):
        if every and entry["iteration"] % every == 0:
            log.info("iteration %d minibatch mse %s", entry["iteration"], entry["minibatch_mse"])
    return cb


def cmd_train(args, doc):
    extra = {"config": doc}
    cb = _progress(args.log_every)
    if doc["kind"] == "ode":
        _, model, history, _ = ex.run_ode(doc, _load_ode_data(args, doc), cb)
    elif doc["kind"] == "pde":
        _, model, history, _ = ex.run_pde(doc, _load_pde_data(args, doc), cb)
    else:
        basis, _, model, history = ex.run_rom(doc, _load_rom_data(args, doc), callback=cb)
        modes = FieldSeries(np.arange(basis.r, dtype=float),
                            basis.Ur.T.reshape((basis.r,) + basis.shape), _rom_grid(doc))
        write_field_series(_path(args, doc, "_basis.field"), modes)
        extra["basis"] = basis.to_dict()
    cfg = ex.train_config(doc)
    save_checkpoint(_path(args, doc, ".ckpt.json"), model, cfg.solver, cfg, history, extra)
    _write_losses(_path(args, doc, "_losses.csv"), history)
    last = history[-1] if history else {}
    fulls = [e["full_mse"] for e in history if e["full_mse"] is not None]
    _emit({"n_params": int(model.n_params), "iterations": len(history),
           "final_minibatch_mse": last.get("minibatch_mse"),
           "final_full_mse": fulls[-1] if fulls else None,
           "checkpoint": _path(args, doc, ".ckpt.json")})


def _checkpoint(args, doc):
    return load_checkpoint(_need(args.checkpoint or _path(args, doc, ".ckpt.json")))


def _rollout_or_exit(model, x0, ts, solver):
    try:
        states, _ = rollout(model, x0[None], ts, solver)
    except NonFiniteState as exc:
        last = exc.interval if exc.interval is not None else 0
        raise _Exit(EXIT_DIVERGED, f"forecast diverged; last valid stamp index {last} "
                                   f"(t = {ts[last]!r})") from exc
    return states[:, 0]


def cmd_forecast(args, doc):
    model, ck = _checkpoint(args, doc)
    solver = ex.solver_config({"solver": ck["solver"]} if ck.get("solver") else doc)
    if doc["kind"] == "ode":
        data = _load_ode_data(args, doc)
        states = _rollout_or_exit(model, data.states[0], data.timestamps, solver)
        path = _path(args, doc, "_forecast.csv")
        write_trajectory_csv(path, Trajectory(data.timestamps, states))
    elif doc["kind"] == "pde":
        _, test = _load_pde_data(args, doc)
        out = []
        for s in test:
            out.append(FieldSeries(s.timestamps,
                                   _rollout_or_exit(model, s.values[0], s.timestamps, solver),
                                   s.grid))
        path = _path(args, doc, "_forecast.field")
        write_field_series(path, out)
    else:
        ts, fields, _ = _load_rom_data(args, doc)
        modes = read_field_series(_need(_path(args, doc, "_basis.field")))[0]
        basis = RomBasis(modes.values.reshape(modes.values.shape[0], -1).T,
                         np.array(ck["basis"]["singular_values"]), grid=modes.grid)
        alpha0 = project(basis, snapshot_matrix(fields[:1])).states[0]
        alpha = Trajectory(ts, _rollout_or_exit(model, alpha0, ts, solver))
        path = _path(args, doc, "_forecast.field")
        write_field_series(path, reconstruct(basis, alpha))
    _emit({"forecast": path})


# evaluation ---------------------------------------------------------------

def _read_any(path):
    _need(path)
    if path.endswith(".csv"):
        return read_trajectory_csv(path).states
    return np.stack([s.values for s in read_field_series(path)])


def evaluate(pred, truth, metric):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise _Exit(EXIT_CONFIG, f"shape mismatch {pred.shape} vs {truth.shape}")
    if metric == "mse":
        return float(np.mean((pred - truth) ** 2))
    if metric == "rel_l2_terminal":
        if pred.ndim == 4:  # (records, nt, nx, ny): terminal stamp of each record
            pred, truth = pred.swapaxes(0, 1), truth.swapaxes(0, 1)
        return rel_l2_terminal(pred, truth)
    raise _Exit(EXIT_CONFIG, f"unknown metric {metric!r}")


def cmd_eval(args, doc):
    if not (args.pred and args.truth):
        raise _Exit(EXIT_CONFIG, "eval needs --pred and --truth")
    metric = args.metric or "mse"
    value = evaluate(_read_any(args.pred), _read_any(args.truth), metric)
    report = {"metric": metric, "value": value, "pred": args.pred, "truth": args.truth}
    if args.out:
        _write_json(os.path.join(args.out, f"eval_{metric}.json"), report)
    _emit(report)


def cmd_baseline(args, doc):
    if doc["kind"] != "ode":
        raise _Exit(EXIT_CONFIG, "baselines are defined for ODE configs")
    names, Xi = ex.run_baseline(doc)
    path = _path(args, doc, "_coefficients.csv")
    d = Xi.shape[1]
    write_coefficients(path, Xi, names, [f"dx{k + 1}/dt" for k in range(d)])
    _emit({"coefficients": path, "nonzero": int(np.count_nonzero(Xi))})


def cmd_gradcheck(args, doc):
    report = ex.run_gradcheck(doc)
    path = _path(args, doc, "_gradcheck.json")
    _write_json(path, report)
    _emit(report)


def cmd_export(args, doc):
    if not args.input:
        raise _Exit(EXIT_CONFIG, "export needs --input")
    src = _need(args.input)
    stem = os.path.splitext(os.path.basename(src))[0]
    if src.endswith(".csv"):
        traj = read_trajectory_csv(src)
        path = os.path.join(args.out, f"{stem}_plot.csv")
        write_trajectory_csv(path, traj)
    else:
        records = read_field_series(src)
        if not 0 <= args.record < len(records):
            raise _Exit(EXIT_CONFIG, f"record {args.record} not in file ({len(records)} records)")
        series = records[args.record]
        stamp = args.stamp if args.stamp >= 0 else len(series) + args.stamp
        if not 0 <= stamp < len(series):
            raise _Exit(EXIT_CONFIG, f"stamp {args.stamp} out of range")
        path = os.path.join(args.out, f"{stem}_r{args.record}_s{stamp}.csv")
        export_field_csv(path, series, stamp)
    _emit({"export": path})


COMMANDS = {
    "generate": (cmd_generate, True),
    "train": (cmd_train, True),
    "forecast": (cmd_forecast, True),
    "eval": (cmd_eval, False),
    "baseline": (cmd_baseline, True),
    "gradcheck": (cmd_gradcheck, True),
    "export": (cmd_export, False),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--engine", choices=["bptt", "adjoint"], help="gradient engine")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--metric", choices=["mse", "rel_l2_terminal"], help="eval metric")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="neupde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "train":
            sp.add_argument("--log-every", type=int, default=0, help="progress logging period")
        if name == "forecast":
            sp.add_argument("--checkpoint", help="checkpoint path (default: from --out)")
        if name == "eval":
            sp.add_argument("--pred")
            sp.add_argument("--truth")
        if name == "export":
            sp.add_argument("--input", help="trajectory CSV or field file")
            sp.add_argument("--stamp", type=int, default=-1)
            sp.add_argument("--record", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    fn, needs_config = COMMANDS[args.command]
    try:
        os.makedirs(args.out, exist_ok=True)
        doc = None
        if needs_config:
            if not args.config:
                raise ConfigError(f"{args.command} needs --config")
            doc = load_config(args.config, args.seed, args.engine)
        fn(args, doc)
    except _Exit as exc:
        print(f"neupde: {exc}", file=sys.stderr)
        return exc.code
    except (Divergence, NonFiniteState, UnstableStep) as exc:
        print(f"neupde: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"neupde: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
