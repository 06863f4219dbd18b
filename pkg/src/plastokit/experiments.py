"""Experiment runners behind the command line: build, run, write artifacts.

Every run writes its outputs plus ``manifest.json`` (config echo, seed,
code version, wall time) into the output directory; identical config and
seed reproduce identical numerical outputs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import fields

import numpy as np

from . import __version__
from .config import dump_config
from .datasets import UniaxialDataset, load_dataset, write_dataset_csv
from .errors import ParseError, PlastokitError
from .fem import FemConfig, cook_summary, run_benchmark
from .loadpath import LoadingPath
from .reference import (MultiNlkModel, MultiNlkParams, ParamBounds,
                        SingleNlkModel, SingleNlkParams,
                        generate_uniaxial_dataset, run_uniaxial_path)
from .returnmap import SurrogateModel
from .training import (TrainConfig, ablate_constraints, evaluate_extrapolation,
                       fit_phenomenological, forward_uniaxial, train)


def _dataclass_from_section(cls, section, **extra):
    allowed = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in section.items() if k in allowed}
    unknown = set(section) - allowed - set(extra)
    if unknown:
        raise ParseError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs.update(extra)
    return cls(**kwargs)


def build_reference(cfg):
    sec = dict(cfg.section("reference"))
    kind = sec.pop("type", "single_nlk")
    if kind == "single_nlk":
        return SingleNlkModel(_dataclass_from_section(SingleNlkParams, sec))
    if kind == "multi_nlk":
        return MultiNlkModel(_dataclass_from_section(MultiNlkParams, sec))
    raise ParseError(f"unknown reference type {kind!r}")


def build_surrogate(cfg, seed):
    mat = cfg.section("material")
    sur = cfg.section("surrogate")
    return SurrogateModel.fresh(
        E=float(mat.get("e", mat.get("E", 200e3))),
        nu=float(mat.get("nu", 0.3)),
        sigma_y=float(mat.get("sigma_y", 207.0)),
        seed=int(sur.get("seed", seed)),
        C0=float(sur.get("c0", sur.get("C0", 1.0))),
        width=int(sur.get("width", 10)),
        iso_input_scale=sur.get("iso_input_scale"),
        kin_input_scale=float(sur.get("kin_input_scale", 1.0)),
        enforce=bool(sur.get("enforce", True)),
    )


def build_train_config(cfg, seed):
    sec = cfg.section("train")
    return TrainConfig(
        iterations=int(sec.get("iterations", 300)),
        lr_net=float(sec.get("lr_net", 1e-2)),
        lr_material=float(sec.get("lr_material", 5e-2)),
        weight_decay=float(sec.get("weight_decay", 1e-4)),
        seed=seed,
    )


def _load_training_data(cfg, out_dir, seed):
    """Dataset from [data] file, or synthesized from [reference] + [path]."""
    data_file = cfg.get("data", "dataset")
    if data_file is not None:
        if not os.path.exists(data_file):
            raise ParseError(f"referenced dataset {data_file!r} does not exist")
        return load_dataset(data_file)
    ref = build_reference(cfg)
    path = cfg.loading_path()
    noise = float(cfg.get("generate", "noise", 0.0))
    steps, eps, sig = generate_uniaxial_dataset(path, ref, noise=noise,
                                                seed=seed)
    write_dataset_csv(os.path.join(out_dir, "training_data.csv"),
                      steps, eps, sig)
    return UniaxialDataset(eps, sig)


def _write_predictions(path_csv, path, model):
    steps = forward_uniaxial(model, path.targets())
    with open(path_csv, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("step,eps11,sig11\n")
        fh.write("0,0.0,0.0\n")
        for i, (t, s) in enumerate(zip(path.targets(), steps), start=1):
            fh.write(f"{i},{float(t)!r},{float(s.sigma11)!r}\n")


# ---------------------------------------------------------------------------
# per-kind runners
# ---------------------------------------------------------------------------

def _run_generate(cfg, out_dir, seed):
    model = build_reference(cfg)
    path = cfg.loading_path()
    noise = float(cfg.get("generate", "noise", 0.0))
    steps, eps, sig = generate_uniaxial_dataset(path, model, noise=noise,
                                                seed=seed)
    out = os.path.join(out_dir, "dataset.csv")
    write_dataset_csv(out, steps, eps, sig)
    return {"rows": len(steps), "dataset": out}


def _run_train(cfg, out_dir, seed):
    dataset = _load_training_data(cfg, out_dir, seed)
    model = build_surrogate(cfg, seed)
    path = cfg.loading_path()
    tcfg = build_train_config(cfg, seed)
    best, record = train(model, path, dataset, tcfg)
    record.write_csv(os.path.join(out_dir, "training.csv"))
    with open(os.path.join(out_dir, "model.json"), "w", encoding="utf-8") as fh:
        json.dump(best.to_json_dict(), fh)
    return {"iterations": len(record.losses),
            "best_loss": record.best_loss,
            "relative_loss": float(record.best_loss / record.losses[0])
            if record.losses else None,
            "final_C": record.C_values[-1] if record.C_values else None}


def _run_evaluate(cfg, out_dir, seed):
    model_file = cfg.require("data", "model")
    if not os.path.exists(model_file):
        raise ParseError(f"referenced model {model_file!r} does not exist")
    with open(model_file, "r", encoding="utf-8") as fh:
        model = SurrogateModel.from_json_dict(json.load(fh))
    reference = build_reference(cfg)
    train_path = cfg.loading_path("path")
    test_path = cfg.loading_path("test_path")
    errors = evaluate_extrapolation(model, train_path, test_path, reference)
    _write_predictions(os.path.join(out_dir, "predictions.csv"),
                       test_path, model)
    with open(os.path.join(out_dir, "errors.json"), "w",
              encoding="utf-8") as fh:
        json.dump(errors, fh, indent=1)
    return errors


def _run_ablate(cfg, out_dir, seed):
    dataset = _load_training_data(cfg, out_dir, seed)
    reference = build_reference(cfg)
    train_path = cfg.loading_path("path")
    test_path = cfg.loading_path("test_path")
    tcfg = build_train_config(cfg, seed)

    def make_model(enforce):
        c = parse_like = cfg  # same material/surrogate sections for both
        mat, sur = c.section("material"), c.section("surrogate")
        return SurrogateModel.fresh(
            E=float(mat.get("e", mat.get("E", 200e3))),
            nu=float(mat.get("nu", 0.3)),
            sigma_y=float(mat.get("sigma_y", 207.0)),
            seed=int(sur.get("seed", seed)),
            C0=float(sur.get("c0", sur.get("C0", 1.0))),
            width=int(sur.get("width", 10)),
            iso_input_scale=sur.get("iso_input_scale"),
            kin_input_scale=float(sur.get("kin_input_scale", 1.0)),
            enforce=enforce)

    report = ablate_constraints(make_model, train_path, test_path, dataset,
                                reference, tcfg)
    summary = {}
    for flavor, data in report.items():
        data["record"].write_csv(os.path.join(out_dir,
                                              f"training_{flavor}.csv"))
        with open(os.path.join(out_dir, f"model_{flavor}.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(data["model"].to_json_dict(), fh)
        summary[flavor] = {"errors": data["errors"],
                           "violations": data["violations"]}
    with open(os.path.join(out_dir, "ablation.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
    return summary


def _run_fit_phenom(cfg, out_dir, seed):
    dataset = _load_training_data(cfg, out_dir, seed)
    path = cfg.loading_path()
    fit_sec = cfg.section("fit")
    n_runs = int(fit_sec.get("runs", 10))
    iterations = int(fit_sec.get("iterations", 600))
    bounds = ParamBounds.table_defaults()
    base = SingleNlkModel(_dataclass_from_section(
        SingleNlkParams, {k: v for k, v in cfg.section("reference").items()
                          if k != "type"})).p

    tcfg = TrainConfig(iterations=iterations, seed=seed)
    phen_traces, surr_traces = [], []
    final_params = []
    for run in range(n_runs):
        run_seed = seed + run
        fitted, record = fit_phenomenological(dataset, bounds, run_seed,
                                              path, base=base, cfg=tcfg)
        phen_traces.append(record.losses)
        final_params.append({k: getattr(fitted, k)
                             for k in ("C", "gamma", "m", "H1", "H2", "H3")})
        rng = np.random.default_rng(run_seed)
        C0 = rng.uniform(bounds.lower["C"], bounds.upper["C"])
        model = SurrogateModel.fresh(base.E, base.nu, base.sigma_y,
                                     seed=run_seed, C0=C0)
        _, srec = train(model, path, dataset,
                        build_train_config(cfg, run_seed)
                        if cfg.section("train")
                        else TrainConfig(iterations=iterations,
                                         seed=run_seed))
        surr_traces.append(srec.losses)

    def pad(traces):
        n = max(len(t) for t in traces)
        return np.array([t + [t[-1]] * (n - len(t)) for t in traces])

    for name, traces in (("phenomenological", phen_traces),
                         ("surrogate", surr_traces)):
        arr = pad(traces)
        with open(os.path.join(out_dir, f"loss_{name}.csv"), "w",
                  newline="\n", encoding="utf-8") as fh:
            cols = ",".join(f"run{j}" for j in range(arr.shape[0]))
            fh.write(f"iter,{cols},mean\n")
            for i in range(arr.shape[1]):
                row = ",".join(repr(float(v)) for v in arr[:, i])
                fh.write(f"{i},{row},{float(arr[:, i].mean())!r}\n")
    with open(os.path.join(out_dir, "fitted_params.json"), "w",
              encoding="utf-8") as fh:
        json.dump(final_params, fh, indent=1)
    return {"runs": n_runs, "iterations": iterations}


def _run_fem(cfg, out_dir, seed):
    sec = cfg.section("fem")
    which = sec.get("model", "reference")
    if which == "reference":
        model = build_reference(cfg)
    elif which == "surrogate":
        model_file = sec.get("model_file")
        if model_file:
            if not os.path.exists(model_file):
                raise ParseError(f"referenced model {model_file!r} "
                                 "does not exist")
            with open(model_file, "r", encoding="utf-8") as fh:
                model = SurrogateModel.from_json_dict(json.load(fh))
        else:
            model = build_surrogate(cfg, seed)
    else:
        raise ParseError(f"unknown fem model selector {which!r}")

    fem_cfg = FemConfig(
        benchmark=sec.get("benchmark", "punch"),
        u0=sec.get("u0"),
        n_increments=int(sec.get("n_increments", 10)),
        max_iterations=int(sec.get("max_iterations", 12)),
        divisions=sec.get("divisions"),
    )
    result = run_benchmark(fem_cfg, model)
    result.write_probe_csv(os.path.join(out_dir, "probe.csv"))
    result.log.write_csv(os.path.join(out_dir, "convergence.csv"))
    result.write_field_csv(os.path.join(out_dir, "field.csv"))
    summary = cook_summary(result)
    with open(os.path.join(out_dir, "averages.csv"), "w", newline="\n",
              encoding="utf-8") as fh:
        fh.write("increment,strain_norm,stress_norm\n")
        for inc, en, sn in summary:
            fh.write(f"{inc},{float(en)!r},{float(sn)!r}\n")
    return {"iterations": result.log.iterations_per_increment(),
            "dissipation": result.dissipation}


_RUNNERS = {
    "generate": _run_generate,
    "train": _run_train,
    "evaluate": _run_evaluate,
    "ablate": _run_ablate,
    "fit-phenom": _run_fit_phenom,
    "fem": _run_fem,
}


def run(cfg, out_dir, seed=None):
    """Execute one experiment; returns the summary written to the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.seed if seed is None else int(seed)
    t0 = time.time()
    summary = _RUNNERS[cfg.kind](cfg, out_dir, seed)
    manifest = {
        "kind": cfg.kind,
        "seed": seed,
        "version": __version__,
        "wall_time_s": time.time() - t0,
        "config": dump_config(cfg),
        "summary": summary,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return summary
