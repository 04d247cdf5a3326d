"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary. Running this file directly prints the same lines.
"""
import json
import statistics
import time

import numpy as np
import pytest

from paramdf.cli import main
from paramdf.experiments import cmd_ablate, cmd_bench, ordering_report, parse_experiment
from paramdf.family import FamilySpec, build_family
from paramdf.graph import path_graph, synth_dataset
from paramdf.model import ModelConfig, build_families
from paramdf.train import TrainConfig, evaluate, train
from paramdf.verify import check_equivariance, check_eigenspace_sharing, check_spectral_identities, check_filter_smoothing, check_propagation_smoothing
from oracles import central_difference_check, feature_graphs, grad_config

RESULTS = []

FAMILY = {"entries": [[0, 1], [-0.25, 1], [-0.5, 1], [-0.5, 2]]}
SCHEDULE = dict(initial_lr=0.01, warmup_steps=5, lr_decay_steps=50, lr_decay_rate=0.5)


def record(number, name, passed, detail, soft=False):
    status = "PASS" if passed else ("FAIL (soft, logged only)" if soft else "FAIL")
    RESULTS.append(f"[{number:>2}] {status:<4} {name}: {detail}")
    return passed or soft


def test_01_smoothness_identity():
    t0 = time.perf_counter()
    res = check_spectral_identities(trials=200, seed=3)
    elapsed = time.perf_counter() - t0
    ok = res.failures == 0 and res.trials == 200 and elapsed < 5.0
    assert record(1, "edge-list vs spectral smoothness, 200 pairs", ok,
                  f"failures={res.failures} worst={res.worst_residual:.2e} (tol 1e-8 rel) time={elapsed:.2f}s (<5s)")


def test_02_polynomial_filter_smoothing():
    res = check_filter_smoothing(trials=100, seed=1)
    ok = res.failures == 0 and res.trials == 100
    assert record(2, "smoothing/amplifying filters, 100+100 trials", ok,
                  f"failures={res.failures} worst={res.worst_residual:.2e} (intermediate identity tol 1e-8 rel)")


def test_03_gcn_propagation():
    res = check_propagation_smoothing(trials=100, seed=1)
    ok = res.failures == 0 and res.trials == 100
    assert record(3, "renormalized propagation never increases smoothness, 100 trials", ok,
                  f"failures={res.failures} worst={res.worst_residual:.2e}; spectrum in [0, 2) checked per trial")


def test_04_symmetry_and_equivariance():
    res = check_equivariance(trials=50, seed=2)
    ok = res.failures == 0 and res.trials == 50 and res.worst_residual <= 1e-9
    assert record(4, "closeness and permutation equivariance, 50 trials x 6 mixers", ok,
                  f"failures={res.failures} worst={res.worst_residual:.2e} (sym <= 1e-10, equiv <= 1e-9)")


def test_05_eigenspace_sharing():
    res = check_eigenspace_sharing(trials=100, seed=3)
    a, b = build_family(path_graph(3), FamilySpec(((0.0, 1), (-0.5, 1)))).matrices
    p3 = float(np.linalg.norm(a @ b - b @ a))
    # by hand: A~ N - N A~ has entries +-1/6 at (0,1), (1,0), (1,2), (2,1), so the norm is sqrt(4/36) = 1/3
    hand = 1.0 / 3.0
    ok = res.passed and float(f"{p3:.3g}") == float(f"{hand:.3g}")
    assert record(5, "eigenspace sharing and P3 commutator", ok,
                  f"failures={res.failures}; P3 commutator {p3:.4f} vs hand value {hand:.4f} (3 s.f.)")


def test_06_gradient_oracle():
    t0 = time.perf_counter()
    graphs = feature_graphs(11, sizes=(5, 4, 6))
    targets = np.array([0.3, -1.2, 0.8])
    worst = 0.0
    for depth in ("Lin", "1L", "2L"):
        for variant in ("shd", "idp"):
            worst = max(worst, central_difference_check(grad_config(depth, variant), graphs, targets, n_probes=20))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 30.0
    assert record(6, "analytic vs central-difference gradients, 6 configs x 20 probes", ok,
                  f"worst rel err {worst:.2e} (<= 1e-4) time={elapsed:.2f}s (<30s)")


def test_07_determinism(tmp_path):
    cfg = {
        "dataset": {"synth": {"kind": "cycle_vs_path", "n_graphs": 16, "n_range": [4, 8], "seed": 0}},
        "model": {"hidden_dim": 8, "num_layers": 2, "dropout": 0.2, "family": FAMILY},
        "train": {"batch_size": 4, "max_epochs": 10, "seed": 5, **SCHEDULE},
        "output_dir": "run",
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["train", str(path)]) == 0
    first = (tmp_path / "run" / "history.csv").read_bytes()
    assert main(["train", str(path)]) == 0
    second = (tmp_path / "run" / "history.csv").read_bytes()
    ok = first == second
    assert record(7, "pdf train twice gives byte-identical history.csv", ok, f"{len(first)} bytes compared")


def test_08_learning_sanity():
    cfg = ModelConfig(hidden_dim=16, num_layers=2, mixer_depth="2L", variant="idp", family=FAMILY)
    reg = synth_dataset("degree_regression", 8, (3, 8), seed=0, fractions=(1.0, 0.0, 0.0))
    _, hist = train(reg, cfg, TrainConfig(batch_size=8, max_epochs=300, seed=0, **SCHEDULE))
    final_mae = hist.records[-1].train_metric
    wins = []
    for seed in range(5):
        ds = synth_dataset("cycle_vs_path", 40, (4, 10), seed=seed)
        params, h = train(ds, cfg, TrainConfig(batch_size=16, max_epochs=200, seed=seed, **SCHEDULE))
        bound = h.model_config
        held_out = ds.subset("val") + ds.subset("test")
        acc = evaluate(ds, held_out, build_families(ds.graphs, bound.family), bound, params)
        wins.append(h.records[-1].train_metric == 1.0 and acc >= 0.9)
    ok = final_mae < 0.05 and sum(wins) >= 4
    assert record(8, "desk-scale learning", ok,
                  f"degree_regression final train MAE {final_mae:.4f} (< 0.05); "
                  f"cycle_vs_path seeds passing {sum(wins)}/5 (>= 4)")


def test_09_variant_ordering(tmp_path):
    doc = {
        "dataset": {"synth": {"kind": "cycle_vs_path", "n_graphs": 40, "n_range": [4, 10], "seed": 0}},
        "model": {"hidden_dim": 16, "num_layers": 2, "family": FAMILY},
        "train": {"batch_size": 16, "max_epochs": 200, "seed": 0, **SCHEDULE},
        "ablation": {"families": ["eps_k"], "mixers": ["Lin", "2L"], "variants": ["shd", "idp"],
                     "seeds": [0, 1, 2, 3, 4]},
        "output_dir": str(tmp_path / "ablate"),
    }
    exp = parse_experiment(doc)
    rows = cmd_ablate(exp)
    checks = ordering_report(rows, exp.dataset.task)
    ok = len(checks) == 2 and all(c[4] for c in checks)
    detail = "; ".join(f"{b} {va:.3f} >= {w} {vb:.3f}" for b, w, va, vb, _ in checks)
    # soft criterion: the outcome is logged and never fails the build
    record(9, "variant ordering on median val accuracy", ok, detail, soft=True)


def test_10_bench_parity(tmp_path):
    doc = {
        "dataset": {"synth": {"kind": "degree_regression", "n_graphs": 64, "n_range": [10, 30], "seed": 0}},
        "model": {"hidden_dim": 32, "num_layers": 2, "family": FAMILY},
        "train": {"batch_size": 16},
        "bench": {"epochs": 5, "variants": ["shd", "idp"]},
        "output_dir": str(tmp_path / "bench"),
    }
    rows = {r["variant"]: r for r in cmd_bench(parse_experiment(doc))}
    ratios = {k: max(rows["idp"][k][0], rows["shd"][k][0]) / min(rows["idp"][k][0], rows["shd"][k][0])
              for k in ("train", "eval_train", "eval_val", "eval_test")}
    ok = all(r <= 3.0 for r in ratios.values())
    assert record(10, "shd vs idp per-epoch time at d=32", ok,
                  ", ".join(f"{k} x{v:.2f}" for k, v in ratios.items()) + " (each <= 3)")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted((n, f) for n, f in globals().items() if n.startswith("test_")):
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                fn(Path(tempfile.mkdtemp()))
            else:
                fn()
        except AssertionError:
            failed += 1
    print("\n".join(RESULTS))
    sys.exit(1 if failed else 0)
