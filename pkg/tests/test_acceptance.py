"""Acceptance suite: one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binomtest, chisquare

from graphveil.attack.knn import KNNClassifier
from graphveil.attack.mlp import MLPClassifier
from graphveil.attack.tree import DecisionTreeClassifier
from graphveil.cli import main
from graphveil.costmodel import WallClock
from graphveil.executor import execute_single, validate_schedule
from graphveil.experiments import (
    BASELINE, ExperimentSettings, attack, overheads, run_sweep, sweep_configs, timing_summary,
)
from graphveil.graph import DelayClass, compile_graph
from graphveil.hybrid import anonymize_hybrid
from graphveil.mixing import MixBatch, mix_parallel, mix_sequential, pick_next
from graphveil.remodel import MASKS, anonymize_remodel, strip_outputs
from graphveil.workloads import default_class_suite, generate_dataset

from conftest import random_graph, random_inputs
from test_attack import knn_oracle

SEED = 0
LEVELS = (1, 2, 3, 4, 5)
BATCHES = (2, 3, 4, 5)
MODELS = ("knn", "dt", "mlp")


@pytest.fixture(scope="module")
def desk():
    """Default suite, 100 samples per class, simulated clock, master seed 0."""
    s = ExperimentSettings()
    samples = generate_dataset(default_class_suite(), s.samples_per_class, SEED)
    runs = run_sweep(samples, s, SEED)
    res = attack({k: v.records for k, v in runs.items()}, sweep_configs(s), s, SEED)
    acc = {name: {m: 100.0 * a for m, a in accs.items()} for name, accs in res.accuracy.items()}
    adaptive = {name: {m: 100.0 * a for m, a in accs.items()} for name, accs in res.adaptive.items()}
    return {"runs": runs, "acc": acc, "adaptive": adaptive}


def fmt(values) -> str:
    return "/".join(f"{v:.1f}" for v in values)


def non_increasing(xs, tol: float) -> bool:
    return all(b <= a + tol for a, b in zip(xs, xs[1:]))


def test_c01_baseline_attacker_strength(desk, criterion):
    base = desk["acc"][BASELINE]
    ok = all(base[m] > 80.0 for m in MODELS) and max(base.values()) >= 90.0
    criterion(1, ok, "baseline knn/dt/mlp = " + fmt(base[m] for m in MODELS))
    assert ok


def test_c02_remodeling_effectiveness(desk, criterion):
    acc = desk["acc"]
    base = acc[BASELINE]["dt"]
    curve = [acc[f"remodel_L{lv}_all"]["dt"] for lv in LEVELS]
    ok = base - curve[-1] >= 25.0 and 45.0 <= curve[-1] <= 70.0 and non_increasing(curve, 3.0)
    criterion(2, ok, f"dt baseline {base:.1f}, L1..L5 all-features = {fmt(curve)}")
    assert ok


def test_c03_feature_ablation_ordering(desk, criterion):
    acc = desk["acc"]
    base = acc[BASELINE]["dt"]
    bad = []
    for lv in LEVELS:
        a = {m: acc[f"remodel_L{lv}_{m}"]["dt"] for m in ("input", "both", "time", "all")}
        if not (a["input"] >= a["both"] - 2 and a["both"] >= a["time"] - 2 and a["time"] >= a["all"] - 2):
            bad.append(f"L{lv} order")
        if abs(a["input"] - base) > 2.0:
            bad.append(f"L{lv} input drift")
    l5 = [acc[f"remodel_L5_{m}"]["dt"] for m in ("input", "both", "time", "all")]
    criterion(3, not bad, f"dt L5 input/both/time/all = {fmt(l5)}" + (f"; {bad}" if bad else ""))
    assert not bad


def test_c04_mixing_effectiveness(desk, criterion):
    acc = desk["acc"]
    bad, parts = [], []
    for m in MODELS:
        base = acc[BASELINE][m]
        for tag in ("seq", "par"):
            curve = [acc[f"mix_{tag}_B{b}"][m] for b in BATCHES]
            if not non_increasing(curve, 3.0) or base - curve[-1] < 20.0:
                bad.append(f"{m}/{tag}")
            if m == "dt":
                parts.append(f"{tag} B2..B5 = {fmt(curve)}")
    criterion(4, not bad, "dt " + "; ".join(parts) + (f"; failing {bad}" if bad else ""))
    assert not bad


def test_c05_overhead_trends(desk, criterion):
    ov = overheads(desk["runs"])
    remodel = [ov[f"remodel_L{lv}_all"] for lv in LEVELS]
    mono = all(non_increasing([-r[i] for r in remodel], 0.0) for i in range(3))
    capped = all(x <= 2.5 for x in remodel[-1])
    mem = all(ov[f"mix_{t}_B{b}"][2] == 1.0 for t in ("seq", "par") for b in BATCHES)
    seq = all(ov[f"mix_seq_B{b}"][0] > 1.0 for b in BATCHES)
    ok = mono and capped and mem and seq
    criterion(5, ok, f"remodel L5 time/cpu/mem = {fmt(remodel[-1])}; mixing mem ratio 1.0 = {mem}; "
                     f"seq time B2..B5 = {fmt(ov[f'mix_seq_B{b}'][0] for b in BATCHES)}")
    assert ok


def test_c06_anonymization_cost_ordering(desk, criterion):
    ts = timing_summary(desk["runs"])
    mix = float(np.mean([ts[f"mix_{t}_B{b}"] for t in ("seq", "par") for b in BATCHES]))
    remodel = [ts[f"remodel_L{lv}_all"] for lv in LEVELS]
    rmean = float(np.mean(remodel))
    increasing = all(b > a for a, b in zip(remodel, remodel[1:]))
    ok = mix <= rmean / 10.0 and increasing
    criterion(6, ok, f"mixing {mix * 1000:.1f} us vs remodeling {rmean * 1000:.1f} us per graph "
                     f"({rmean / mix:.1f}x); L1..L5 ms = {'/'.join(f'{x:.3f}' for x in remodel)}")
    assert ok


def test_c07_hybrid_dominance(desk, criterion):
    acc = desk["acc"]
    bad = []
    for m in MODELS:
        for b in BATCHES:
            h = acc[f"hybrid_L3_par_B{b}"][m]
            if h > acc["remodel_L3_all"][m] + 2.0 or h > acc[f"mix_par_B{b}"][m] + 2.0:
                bad.append(f"{m}/B{b}")
    knn = [acc[f"hybrid_L3_par_B{b}"]["knn"] for b in BATCHES]
    criterion(7, not bad, f"knn hybrid L3 B2..B5 = {fmt(knn)} vs remodel L3 {acc['remodel_L3_all']['knn']:.1f}"
                          + (f"; failing {bad}" if bad else ""))
    assert not bad


def test_c08_adaptive_attacker(desk, criterion):
    base = desk["acc"][BASELINE]
    ad = desk["adaptive"]["hybrid_L5_par_B5"]
    ok = all(base[m] - ad[m] >= 20.0 and 35.0 <= ad[m] <= 65.0 for m in MODELS)
    criterion(8, ok, "adaptive knn/dt/mlp at L5 B5 = " + fmt(ad[m] for m in MODELS))
    assert ok


# --- property suites ----------------------------------------------------------------

def _semantic_case(rng: np.random.Generator, case: int) -> bool:
    b = int(rng.integers(1, 6))
    graphs = [random_graph(rng) for _ in range(b)]
    inputs = [random_inputs(rng, g) for g in graphs]
    run_seeds = [int(rng.integers(0, 2**31)) for _ in range(b)]
    ref = [execute_single(g, x, seed=s).outputs for g, x, s in zip(graphs, inputs, run_seeds)]
    mode = ("remodel", "mix_seq", "mix_par", "hybrid")[case % 4]
    level = int(rng.integers(1, 6))
    mask = MASKS[sorted(MASKS)[int(rng.integers(len(MASKS)))]]
    workers = int(rng.integers(2, 5))
    seed = int(rng.integers(0, 2**31))
    clock = WallClock() if case % 25 == 7 else None  # cycles through all four modes
    if mode == "remodel":
        got = []
        for g, x, s in zip(graphs, inputs, run_seeds):
            a = anonymize_remodel(g, level, mask, seed)
            outs = execute_single(a.graph, x, clock, s).outputs
            got.append(strip_outputs(outs, a.strip_amounts(outs)))
    elif mode == "hybrid":
        got = anonymize_hybrid(graphs, inputs, level, mask, bool(case % 8 < 4), workers, seed, clock,
                               run_seeds=run_seeds).outputs
    else:
        batch = MixBatch(graphs, inputs, seed=seed, run_seeds=run_seeds)
        res = mix_sequential(batch, clock) if mode == "mix_seq" else mix_parallel(batch, workers, clock)
        got = res.outputs
    return got == ref


def test_c09_semantic_preservation(criterion):
    rng = np.random.default_rng(909)
    failures = [i for i in range(1000) if not _semantic_case(rng, i)]
    criterion(9, not failures, f"1000 randomized cases, {len(failures)} failures")
    assert not failures


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 4), st.booleans())
def _schedule_property(seed, b, workers, parallel):
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng) for _ in range(b)]
    batch = MixBatch(graphs, [random_inputs(rng, g) for g in graphs], seed=seed)
    res = mix_parallel(batch, workers) if parallel else mix_sequential(batch)
    validate_schedule(res.schedule, graphs)
    hres = anonymize_hybrid(graphs, batch.inputs, int(rng.integers(1, 6)), MASKS["all"], parallel, workers, seed)
    validate_schedule(hres.schedule, [a.graph for a in hres.anonymized])


def _pick_chi_square() -> float:
    weights = [1.0, 2.0, 3.0, 4.0]
    rng = np.random.default_rng(2024)
    counts = np.zeros(4)
    for _ in range(100_000):
        counts[pick_next([[0], [0], [0], [0]], weights, rng)[0]] += 1
    expected = np.array(weights) / sum(weights) * counts.sum()
    return float(chisquare(counts, expected).pvalue)


def _delay_sign_test() -> tuple[int, int, float]:
    rng = np.random.default_rng(77)
    wins = trials = 0
    for i in range(200):
        tol = random_graph(rng, int(rng.integers(4, 9)), delay=DelayClass.TOLERANT)
        g = tol.graph.copy()
        g.delay_class = DelayClass.SENSITIVE
        sens = compile_graph(g)
        x = random_inputs(rng, tol)
        res = mix_sequential(MixBatch([sens, tol], [x, x], seed=i))
        done = [max(e.end_ms for e in res.schedule.for_graph(g)) for g in (0, 1)]
        if done[0] != done[1]:
            trials += 1
            wins += done[0] < done[1]
    return wins, trials, float(binomtest(wins, trials, 0.5, alternative="greater").pvalue)


def test_c10_scheduler_correctness(criterion):
    _schedule_property()
    p_chi = _pick_chi_square()
    wins, trials, p_sign = _delay_sign_test()
    ok = p_chi > 0.01 and p_sign < 0.01
    criterion(10, ok, f"schedules valid; pick chi-square p = {p_chi:.3f}; "
                      f"sensitive first in {wins}/{trials} runs, sign test p = {p_sign:.2g}")
    assert ok


def test_c11_classifier_oracles(criterion):
    rng = np.random.default_rng(11)
    knn_ok = True
    for _ in range(3):
        X = rng.normal(size=(200, 4)).round(1)
        y = np.array([f"c{v}" for v in rng.integers(0, 5, 200)], dtype=object)
        Xte = rng.normal(size=(50, 4)).round(1)
        for k in (1, 3, 5):
            knn_ok &= list(KNNClassifier(k).fit(X, y).predict(Xte)) == knn_oracle(X, list(y), Xte, k)

    X = rng.normal(size=(10, 4))
    Y = np.eye(3)[rng.integers(0, 3, 10)]
    m = MLPClassifier(hidden_units=5, seed=1, init=0.5)
    theta = m.init_params(4, 3)
    _, grad = m.loss_and_grad(theta, X, Y)
    h = 1e-6
    num = np.array([(m.loss_and_grad(theta + h * e, X, Y)[0] - m.loss_and_grad(theta - h * e, X, Y)[0]) / (2 * h)
                    for e in np.eye(len(theta))])
    rel = float(np.linalg.norm(grad - num) / (np.linalg.norm(grad) + np.linalg.norm(num)))

    X = rng.integers(0, 5, size=(150, 3)).astype(float)
    y = np.array([f"c{int(r[0] * 3 + r[2]) % 4}" for r in X], dtype=object)
    leaves = DecisionTreeClassifier().fit(X, y).apply(X)
    pure = all(len(set(y[leaves == leaf].tolist())) == 1 for leaf in np.unique(leaves))

    ok = knn_ok and rel < 1e-4 and pure
    criterion(11, ok, f"knn exact = {knn_ok}; mlp gradient rel err = {rel:.1e}; tree leaves pure = {pure}")
    assert ok


def test_c12_determinism(tmp_path, criterion):
    files = ("report.json", "accuracy.csv", "overhead.csv", "report.txt")
    outs = []
    for name in ("a", "b"):
        assert main(["all", "--seed", str(SEED), "--out", str(tmp_path / name)]) == 0
        outs.append({f: (tmp_path / name / "run" / f).read_bytes() for f in files})
    same = [f for f in files if outs[0][f] == outs[1][f]]
    ok = len(same) == len(files)
    criterion(12, ok, f"two full runs under seed {SEED}: {len(same)}/{len(files)} report files byte-identical")
    assert ok
