"""Experiment configs and the runners behind the ``pdf`` command.

An experiment config is one JSON document::

    {
      "dataset": {"synth": {"kind": "cycle_vs_path", "n_graphs": 40, "n_range": [4, 10], "seed": 0}},
      "split": {"fractions": [0.6, 0.2, 0.2], "seed": 0},
      "model": {"hidden_dim": 16, "num_layers": 2, "mixer_depth": "2L", "variant": "idp",
                "family": {"entries": [[0, 1], [-0.5, 1]], "sparsity": "dense"}, "readout": "mean"},
      "train": {"batch_size": 16, "initial_lr": 0.01, "max_epochs": 200, "seed": 0},
      "output_dir": "runs/demo"
    }

Relative paths are resolved against the directory holding the config file.
"""
from __future__ import annotations

import csv
import json
import math
import os
import shutil
import statistics
import time
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .checkpoint import save_checkpoint
from .family import PRESETS, FamilySpec, build_family, lap_spec, parse_sparsity, preset_operator
from .graph import Dataset, DatasetFormatError, dataset_from_json, kfold_indices, load_json, load_tudataset, \
    split_indices, synth_dataset
from .model import ModelConfig, build_families, count_params, init_params
from .spectral import PolyFilter, classify_filter, eigendecompose, smoothness_quadratic
from .train import AdamState, TrainConfig, default_loss, evaluate, lr_at, train, train_epoch


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Experiment:
    dataset: Dataset
    model: ModelConfig
    train: TrainConfig
    output_dir: str
    raw: dict
    source_path: Optional[str] = None


def _resolve(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def _build(cls, section: dict, path: str):
    if not isinstance(section, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name for f in fields(cls)}
    for key in section:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown field")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from exc


def load_dataset(section: dict, base: str) -> Dataset:
    if not isinstance(section, dict) or len(section) != 1:
        raise ConfigError("dataset", "expected exactly one of 'synth', 'json', 'tudataset'")
    (kind, spec), = section.items()
    try:
        if kind == "synth":
            return synth_dataset(spec.get("kind"), int(spec.get("n_graphs", 40)),
                                 tuple(spec.get("n_range", (4, 10))), int(spec.get("seed", 0)))
        if kind == "json":
            path = _resolve(base, spec)
            if not os.path.exists(path):
                raise ConfigError("dataset.json", f"file not found: {path}")
            return load_json(path)
        if kind == "tudataset":
            directory = _resolve(base, spec.get("dir", "."))
            name = spec.get("name")
            if not name or not os.path.exists(os.path.join(directory, f"{name}_A.txt")):
                raise ConfigError("dataset.tudataset", f"no {name}_A.txt under {directory}")
            return load_tudataset(directory, name)
    except (DatasetFormatError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"dataset.{kind}", str(exc)) from exc
    raise ConfigError("dataset", f"unknown source {kind!r}")


def apply_split(ds: Dataset, section: Optional[dict]) -> Dataset:
    if section is None:
        if ds.splits.get("train"):
            return ds
        section = {}
    try:
        seed = int(section.get("seed", 0))
        if "kfold" in section:
            splits = kfold_indices(len(ds), int(section["kfold"]), int(section.get("fold", 0)), seed)
        else:
            splits = split_indices(len(ds), tuple(section.get("fractions", (0.6, 0.2, 0.2))), seed)
    except ValueError as exc:
        raise ConfigError("split", str(exc)) from exc
    return replace(ds, splits=splits)


def parse_experiment(doc: dict, base: str = ".", source_path: Optional[str] = None) -> Experiment:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    if "dataset" not in doc:
        raise ConfigError("dataset", "missing")
    ds = apply_split(load_dataset(doc["dataset"], base), doc.get("split"))
    model_section = dict(doc.get("model", {}))
    if "family" in model_section:
        fam = model_section["family"]
        try:
            model_section["family"] = FamilySpec.parse(fam.get("entries", []), fam.get("sparsity", "dense"))
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError("model.family", str(exc)) from exc
    if ds.task == "classification":
        model_section.setdefault("num_classes", ds.num_classes)
    model_section.setdefault("task", ds.task)
    model = _build(ModelConfig, model_section, "model")
    try:
        model = model.bind(ds)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc
    tc = _build(TrainConfig, doc.get("train", {}), "train")
    out = _resolve(base, doc.get("output_dir", "runs/default"))
    return Experiment(ds, model, tc, out, doc, source_path)


def load_experiment(path: str) -> Experiment:
    if not os.path.exists(path):
        raise ConfigError("<config>", f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<config>", f"invalid JSON: {exc}") from exc
    return parse_experiment(doc, os.path.dirname(os.path.abspath(path)), path)


def _better(a: float, b: float, task: str) -> bool:
    """Strict improvement of metric ``a`` over ``b``."""
    if math.isnan(a):
        return False
    if math.isnan(b):
        return True
    return a < b if task == "regression" else a > b


def _copy_config(exp: Experiment, out_dir: str) -> None:
    target = os.path.join(out_dir, "config.json")
    if exp.source_path:
        if os.path.abspath(exp.source_path) != os.path.abspath(target):
            shutil.copyfile(exp.source_path, target)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(exp.raw, fh, indent=2)


def run_training(ds: Dataset, model: ModelConfig, tc: TrainConfig, out_dir: Optional[str] = None,
                 families=None) -> dict:
    """Train, keep the best-validation epoch (earliest on ties), optionally write outputs."""
    best = {"epoch": None, "val": float("nan"), "test": float("nan"), "params": None}

    def track(record, params):
        val = record.val_metric if not math.isnan(record.val_metric) else record.train_metric
        if best["epoch"] is None or _better(val, best["val"], model.task):
            best.update(epoch=record.epoch, val=val, test=record.test_metric,
                        params={k: v.copy() for k, v in params.items()})

    params, history = train(ds, model, tc, callback=track, families=families)
    cfg = history.model_config
    if best["params"] is None:
        best["params"] = params
    summary = {
        "metric": history.metric,
        "best_epoch": best["epoch"],
        "best_val_metric": None if math.isnan(best["val"]) else best["val"],
        "test_metric_at_best_val": None if math.isnan(best["test"]) else best["test"],
        "n_params": count_params(cfg),
        "epochs": len(history),
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "history.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(history.to_csv())
        save_checkpoint(os.path.join(out_dir, "best.ckpt"), cfg, best["params"],
                        extra={"epoch": best["epoch"]})
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    return {"summary": summary, "history": history, "params": best["params"], "config": cfg}


def cmd_train(exp: Experiment) -> dict:
    os.makedirs(exp.output_dir, exist_ok=True)
    _copy_config(exp, exp.output_dir)
    return run_training(exp.dataset, exp.model, exp.train, exp.output_dir)


# --- ablation --------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    family: str      # "lap" or "eps_k"
    mixer: str
    variant: str
    hops: Optional[int]

    @property
    def name(self) -> str:
        fam = "Lap" if self.family == "lap" else "(eps,k)"
        tag = f"{self.variant}-({fam},{self.mixer})"
        return tag if self.hops is None else f"{tag}-sps{self.hops}"


def ablation_grid(section: dict) -> list:
    if not isinstance(section, dict):
        raise ConfigError("ablation", "expected an object")
    families = section.get("families", ["lap", "eps_k"])
    mixers = section.get("mixers", ["Lin", "1L", "2L"])
    variants = section.get("variants", ["shd", "idp"])
    sps = section.get("sps", [None])
    for key, values, allowed in (("families", families, ("lap", "eps_k")),
                                 ("mixers", mixers, ("Lin", "1L", "2L")),
                                 ("variants", variants, ("shd", "idp"))):
        for v in values:
            if v not in allowed:
                raise ConfigError(f"ablation.{key}", f"unknown value {v!r}")
    cells = [Cell(f, m, v, parse_sparsity(h) if isinstance(h, str) else h)
             for v in variants for f in families for m in mixers for h in sps]
    if not cells:
        raise ConfigError("ablation", "empty variant grid")
    return cells


def _stats(values: list) -> tuple:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        return float("nan"), float("nan"), float("nan")
    return statistics.fmean(vals), statistics.pstdev(vals), statistics.median(vals)


def cmd_ablate(exp: Experiment) -> list:
    section = exp.raw.get("ablation", {})
    cells = ablation_grid(section)
    seeds = section.get("seeds", [exp.train.seed])
    if not seeds:
        raise ConfigError("ablation.seeds", "empty seed list")
    os.makedirs(exp.output_dir, exist_ok=True)
    _copy_config(exp, exp.output_dir)
    base = exp.model.family
    rows = []
    for ci, cell in enumerate(cells):
        spec = lap_spec(len(base), cell.hops) if cell.family == "lap" else FamilySpec(base.entries, cell.hops)
        cfg = replace(exp.model, family=spec, mixer_depth=cell.mixer, variant=cell.variant)
        families = build_families(exp.dataset.graphs, spec)
        vals, tests = [], []
        for seed in seeds:
            tc = replace(exp.train, seed=int(seed) + ci)
            out_dir = os.path.join(exp.output_dir, f"cell{ci:02d}_seed{seed}")
            result = run_training(exp.dataset, cfg, tc, out_dir, families=families)
            vals.append(result["summary"]["best_val_metric"])
            tests.append(result["summary"]["test_metric_at_best_val"])
        vm, vs, vmed = _stats(vals)
        tm, ts, tmed = _stats(tests)
        rows.append({"name": cell.name, "variant": cell.variant, "family": cell.family, "mixer": cell.mixer,
                     "sparsity": "dense" if cell.hops is None else f"hop:{cell.hops}", "n_seeds": len(seeds),
                     "valid_mean": vm, "valid_std": vs, "valid_median": vmed,
                     "test_mean": tm, "test_std": ts, "test_median": tmed})
    metric = "MAE" if exp.dataset.task == "regression" else "ACC"
    header = ["name", "variant", "family", "mixer", "sparsity", "n_seeds",
              f"valid {metric} mean", f"valid {metric} std", f"valid {metric} median",
              f"test {metric} mean", f"test {metric} std", f"test {metric} median"]
    keys = ["name", "variant", "family", "mixer", "sparsity", "n_seeds", "valid_mean", "valid_std",
            "valid_median", "test_mean", "test_std", "test_median"]
    with open(os.path.join(exp.output_dir, "ablation.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([r[k] if not isinstance(r[k], float) else f"{r[k]:.6g}" for k in keys])
    return rows


def ordering_report(rows: list, task: str) -> list:
    """Soft check of the expected variant ordering on median validation metric."""
    by_name = {r["name"]: r for r in rows}
    sign = 1.0 if task == "classification" else -1.0
    lines = []
    for better, worse in (("idp-((eps,k),2L)", "idp-((eps,k),Lin)"), ("idp-((eps,k),2L)", "shd-((eps,k),2L)")):
        if better in by_name and worse in by_name:
            a, b = by_name[better]["valid_median"], by_name[worse]["valid_median"]
            ok = sign * (a - b) >= 0
            lines.append((better, worse, a, b, ok))
    return lines


# --- benchmark -------------------------------------------------------------

def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def cmd_bench(exp: Experiment, epochs: Optional[int] = None) -> list:
    """Per-epoch wall-clock of training and evaluation passes for shd/idp, dense/hop-masked."""
    section = exp.raw.get("bench", {})
    n_epochs = int(epochs if epochs is not None else section.get("epochs", 5))
    if n_epochs < 1:
        raise ConfigError("bench.epochs", "must be >= 1")
    variants = section.get("variants", ["shd", "idp"])
    hops_list = section.get("hops", [None])
    ds, tc = exp.dataset, exp.train
    kind = tc.loss or default_loss(ds.task)
    rows = []
    for variant in variants:
        for hops in hops_list:
            spec = FamilySpec(exp.model.family.entries, hops)
            cfg = replace(exp.model, variant=variant, family=spec)
            families = build_families(ds.graphs, spec)
            params = init_params(cfg, np.random.default_rng([tc.seed, 0]))
            state = AdamState.zeros(params)
            shuffle_rng = np.random.default_rng([tc.seed, 1])
            drop_rng = np.random.default_rng([tc.seed, 2])
            times = {"train": [], "eval_train": [], "eval_val": [], "eval_test": []}
            for epoch in range(n_epochs):
                order = shuffle_rng.permutation(ds.subset("train"))
                lr = lr_at(epoch, tc)
                times["train"].append(_timed(
                    lambda: train_epoch(ds, order, families, cfg, params, state, lr, tc, kind, drop_rng)))
                for split in ("train", "val", "test"):
                    times[f"eval_{split}"].append(_timed(
                        lambda: evaluate(ds, ds.subset(split), families, cfg, params)))
            label = f"{variant}-PDF" + ("" if hops is None else f"^{hops}-hop")
            rows.append({"model": label, "variant": variant, "hops": hops,
                         **{k: (statistics.fmean(v), statistics.pstdev(v)) for k, v in times.items()}})
    os.makedirs(exp.output_dir, exist_ok=True)
    with open(os.path.join(exp.output_dir, "bench.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_bench(rows, n_epochs))
    return rows


def format_bench(rows: list, n_epochs: int) -> str:
    cols = [("train", "Training (Train set)"), ("eval_train", "Eval (Train set)"),
            ("eval_val", "Eval (Val set)"), ("eval_test", "Eval (Test set)")]
    lines = [f"mean +/- std over {n_epochs} epochs (seconds)",
             f"{'Model':<18}" + "".join(f"{title:>26}" for _, title in cols)]
    for r in rows:
        lines.append(f"{r['model']:<18}" + "".join(f"{r[k][0]:>15.5f} +/- {r[k][1]:<7.5f}" for k, _ in cols))
    return "\n".join(lines) + "\n"


# --- inspection ------------------------------------------------------------

def parse_family_arg(text: str):
    """A preset name, a JSON list of ``[eps, k]`` pairs, or ``eps:k,eps:k``."""
    if text in PRESETS:
        return text
    try:
        if text.strip().startswith("["):
            return FamilySpec.parse(json.loads(text))
        return FamilySpec(tuple((float(e), int(k)) for e, k in (item.split(":") for item in text.split(","))))
    except (ValueError, TypeError) as exc:
        raise ConfigError("--family", f"cannot parse {text!r}: {exc}") from exc


def load_graphs_file(path: str) -> list:
    if not os.path.exists(path):
        raise ConfigError("<graph>", f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<graph>", f"invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and "graphs" not in doc and "n" in doc:
        doc = {"task": "regression", "graphs": [doc]}
    try:
        return dataset_from_json(doc).graphs
    except DatasetFormatError as exc:
        raise ConfigError("<graph>", str(exc)) from exc


def inspect_graphs(graphs: list, families: list, coeffs=None, basis: str = "laplacian") -> list:
    reports = []
    filt = PolyFilter(tuple(coeffs)) if coeffs else None
    for gi, g in enumerate(graphs):
        operators = []
        for fam in families:
            if isinstance(fam, str):
                operators.append({"name": fam, "spectrum": eigendecompose(preset_operator(g, fam)).lam.tolist()})
            else:
                for (eps, k), m in build_family(g, fam):
                    operators.append({"name": f"({eps:g},{k})", "spectrum": eigendecompose(m).lam.tolist()})
        if g.node_features is not None:
            signals = g.node_features.T
        elif g.node_labels is not None:
            signals = g.node_labels.astype(np.float64)[None, :]
        else:
            signals = np.zeros((0, g.n))
        report = {"graph": g.name or f"graph_{gi}", "n": g.n, "operators": operators,
                  "smoothness": [smoothness_quadratic(g, s) for s in signals]}
        if filt is not None:
            lam = eigendecompose(preset_operator(g, basis)).lam
            report["filter"] = {"coeffs": list(filt.coeffs), "basis": basis,
                                "gains": filt(lam).tolist(), "verdict": classify_filter(filt, lam).value}
        reports.append(report)
    return reports
