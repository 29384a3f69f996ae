"""The experiment matrix: run every configuration, attack it, tabulate.

Seeds fan out from one master seed through :func:`graphveil.seeds.derive`
(a splitmix64 chain over string/int labels), so each stage and each
configuration gets an independent but reproducible stream:

* ``derive(seed, "data", class, sample)`` / ``("run", class, sample)``: payload bytes and
  cost-model jitter of a sample;
* ``derive(seed, "remodel", sample)``: remodeling draws of a sample, shared by
  every level and mask so overheads grow monotonically;
* ``derive(seed, "batches", B)``: how samples are grouped into batches of B,
  shared by the sequential, parallel and hybrid runs at that B;
* ``derive(seed, "mix", config, batch)``: the scheduler's picks;
* ``derive(seed, "split")`` and ``derive(seed, "model", kind)``: the attacker.
"""

from __future__ import annotations

import csv
import io
import json
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from graphveil import seeds
from graphveil.attack.dataset import Dataset, Normalization, stratified_indices
from graphveil.attack.models import adaptive_retrain, evaluate, fit, model_report
from graphveil.costmodel import ClockMode, Simulated
from graphveil.errors import ConfigError, InputError
from graphveil.executor import FeatureRecord, execute_single, normalized_overheads, read_records, write_records
from graphveil.hybrid import anonymize_hybrid
from graphveil.mixing import MixBatch, anonymization_cost, mix_parallel, mix_sequential
from graphveil.remodel import MASKS, anonymize_remodel
from graphveil.workloads import Sample

ABLATION_MASKS = ("input", "output", "both", "time", "all")
MODEL_KINDS = ("knn", "dt", "mlp")
BASELINE = "baseline"


@dataclass(frozen=True)
class ExperimentSettings:
    """Sweep and attacker knobs; every field can be set from a config file."""

    samples_per_class: int = 100
    train_fraction: float = 0.7
    levels: tuple[int, ...] = (1, 2, 3, 4, 5)
    masks: tuple[str, ...] = ABLATION_MASKS
    batch_sizes: tuple[int, ...] = (2, 3, 4, 5)
    workers: int = 2
    hybrid_level: int = 3
    adaptive_level: int = 5
    adaptive_batch: int = 5
    models: tuple[str, ...] = MODEL_KINDS
    knn_k: int = 5
    mlp_hidden: int = 32
    mlp_epochs: int = 2000
    mlp_learning_rate: float = 0.3
    reduced_features: bool = False
    timing_repeats: int = 5

    def __post_init__(self):
        for m in self.masks:
            if m not in MASKS:
                raise ConfigError(f"unknown mask {m!r}")
        for k in self.models:
            if k not in MODEL_KINDS:
                raise ConfigError(f"unknown model kind {k!r}")
        if self.workers < 1 or self.samples_per_class < 1 or self.timing_repeats < 1:
            raise ConfigError("workers and timing_repeats must be >= 1, samples_per_class >= 1")
        if any(not 1 <= lv <= 5 for lv in (*self.levels, self.hybrid_level, self.adaptive_level)):
            raise ConfigError("levels must lie in 1..5")
        if any(b < 1 for b in (*self.batch_sizes, self.adaptive_batch)):
            raise ConfigError("batch sizes must be >= 1")

    def model_params(self, kind: str) -> dict[str, Any]:
        if kind == "knn":
            return {"k": self.knn_k}
        if kind == "mlp":
            return {"hidden_units": self.mlp_hidden, "epochs": self.mlp_epochs,
                    "learning_rate": self.mlp_learning_rate}
        return {}


@dataclass(frozen=True)
class RunConfig:
    name: str
    mode: str
    level: int = 0
    mask: str = "none"
    batch_size: int = 1
    parallel: bool = False
    adaptive: bool = False

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run-config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def sweep_configs(settings: ExperimentSettings) -> list[RunConfig]:
    """Baseline, remodeling level x mask grid, mixing, hybrid, adaptive."""
    out = [RunConfig(BASELINE, "baseline")]
    for lv in settings.levels:
        for m in settings.masks:
            out.append(RunConfig(f"remodel_L{lv}_{m}", "remodeling", lv, m))
    for par in (False, True):
        tag = "par" if par else "seq"
        for b in settings.batch_sizes:
            out.append(RunConfig(f"mix_{tag}_B{b}", "mixing", batch_size=b, parallel=par))
    for b in settings.batch_sizes:
        out.append(RunConfig(f"hybrid_L{settings.hybrid_level}_par_B{b}", "hybrid",
                             settings.hybrid_level, "all", b, True))
    lv, b = settings.adaptive_level, settings.adaptive_batch
    name = f"hybrid_L{lv}_par_B{b}"
    existing = [c for c in out if c.name == name]
    if existing:
        out[out.index(existing[0])] = RunConfig(name, "hybrid", lv, "all", b, True, adaptive=True)
    else:
        out.append(RunConfig(name, "hybrid", lv, "all", b, True, adaptive=True))
    return out


@dataclass
class ConfigRun:
    config: RunConfig
    records: list[FeatureRecord]
    anonymize_ms: list[float]


def batches_for(n: int, batch_size: int, seed: int) -> list[list[int]]:
    """Seeded grouping of sample indices into batches of ``batch_size``."""
    order = np.random.default_rng(seeds.derive(seed, "batches", batch_size)).permutation(n)
    return [sorted(order[i:i + batch_size].tolist()) for i in range(0, n, batch_size)]


def run_config(cfg: RunConfig, samples: Sequence[Sample], settings: ExperimentSettings,
               seed: int = 0, clock: ClockMode | None = None) -> ConfigRun:
    """Execute every sample under ``cfg``; records come back in sample order."""
    clock = clock or Simulated()
    n = len(samples)
    records: list[FeatureRecord | None] = [None] * n
    timing = [0.0] * n
    if cfg.mode in ("baseline", "remodeling"):
        mask = MASKS[cfg.mask]
        for i, s in enumerate(samples):
            cg = s.graph
            if cfg.mode == "remodeling":
                t0 = time.perf_counter()
                cg = anonymize_remodel(s.graph, cfg.level, mask, seeds.derive(seed, "remodel", i)).graph
                timing[i] = (time.perf_counter() - t0) * 1000.0
            records[i] = execute_single(cg, s.inputs, clock, s.seed).record
    elif cfg.mode in ("mixing", "hybrid"):
        for k, idx in enumerate(batches_for(n, cfg.batch_size, seed)):
            graphs = [samples[i].graph for i in idx]
            inputs = [samples[i].inputs for i in idx]
            run_seeds = [samples[i].seed for i in idx]
            mix_seed = seeds.derive(seed, "mix", cfg.name, k)
            if cfg.mode == "mixing":
                batch = MixBatch(graphs, inputs, seed=mix_seed, run_seeds=run_seeds)
                if cfg.parallel:
                    res = mix_parallel(batch, settings.workers, clock)
                else:
                    res = mix_sequential(batch, clock)
                recs, cost = res.records, anonymization_cost(res)
            else:
                hres = anonymize_hybrid(graphs, inputs, cfg.level, MASKS[cfg.mask], cfg.parallel,
                                        settings.workers, mix_seed, clock, run_seeds=run_seeds)
                recs, cost = hres.records, hres.anonymize_ms
            for j, i in enumerate(idx):
                records[i] = recs[j]
                timing[i] = cost[j]
    else:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    return ConfigRun(cfg, records, timing)  # type: ignore[arg-type]


def run_sweep(samples: Sequence[Sample], settings: ExperimentSettings, seed: int = 0,
              clock: ClockMode | None = None,
              configs: Sequence[RunConfig] | None = None) -> dict[str, ConfigRun]:
    runs = {c.name: run_config(c, samples, settings, seed, clock)
            for c in (configs or sweep_configs(settings))}
    remodels = [r.config for r in runs.values() if r.config.mode == "remodeling"]
    for name, ms in remodel_timing(samples, remodels, settings.timing_repeats, seed).items():
        runs[name].anonymize_ms[:] = ms
    return runs


def remodel_timing(samples: Sequence[Sample], configs: Sequence[RunConfig], repeats: int,
                   seed: int = 0) -> dict[str, list[float]]:
    """Per-sample median transform time (ms) for each remodeling config.

    The transform takes a fraction of a millisecond, so configs are timed
    interleaved, sample by sample and repeat by repeat, with a rotating start.
    Slow drift of the machine then hits every level alike.
    """
    reps = {c.name: [[0.0] * repeats for _ in samples] for c in configs}
    m = len(configs)
    for i, s in enumerate(samples):
        rs = seeds.derive(seed, "remodel", i)
        for r in range(repeats):
            for k in range(m):
                c = configs[(k + i + r) % m]
                mask = MASKS[c.mask]
                t0 = time.perf_counter()
                anonymize_remodel(s.graph, c.level, mask, rs)
                reps[c.name][i][r] = time.perf_counter() - t0
    return {name: [float(np.median(x)) * 1000.0 for x in rows] for name, rows in reps.items()}


def overheads(runs: dict[str, ConfigRun]) -> dict[str, tuple[float, float, float]]:
    """Mean per-graph (time, cpu, mem) ratios against the baseline run."""
    base = runs[BASELINE].records
    out = {}
    for name, run in runs.items():
        ratios = np.array([normalized_overheads(a, b) for a, b in zip(run.records, base)])
        out[name] = tuple(float(x) for x in ratios.mean(axis=0))
    return out


# --- attack -------------------------------------------------------------------

@dataclass
class AttackResults:
    accuracy: dict[str, dict[str, float]] = field(default_factory=dict)
    adaptive: dict[str, dict[str, float]] = field(default_factory=dict)
    baseline_reports: dict[str, dict[str, Any]] = field(default_factory=dict)
    split: dict[str, int] = field(default_factory=dict)


def attack(records: dict[str, list[FeatureRecord]], configs: Sequence[RunConfig],
           settings: ExperimentSettings, seed: int = 0) -> AttackResults:
    """Train on the baseline train split, score every configuration's test rows.

    The adaptive attacker of a configuration flagged ``adaptive`` is refit on
    baseline train rows plus that configuration's train rows.

    Raises:
        ConfigError: no baseline records.
    """
    if BASELINE not in records:
        raise ConfigError("attack needs the baseline configuration")
    reduced = settings.reduced_features
    base = Dataset.from_records(records[BASELINE], reduced)
    tr, te = stratified_indices(base.y, settings.train_fraction, seeds.derive(seed, "split"))
    train = base.subset(tr)
    out = AttackResults(split={"train": len(tr), "test": len(te)})
    models = {}
    for kind in settings.models:
        m = fit(kind, train.with_normalization(Normalization.fit(train.X)),
                seeds.derive(seed, "model", kind), **settings.model_params(kind))
        models[kind] = m
        out.baseline_reports[kind] = model_report(m, base.subset(te))
    for cfg in configs:
        if cfg.name not in records:
            continue
        ds = Dataset.from_records(records[cfg.name], reduced)
        if len(ds) != len(base) or list(ds.y) != list(base.y):
            raise InputError(f"{cfg.name}: rows do not line up with the baseline")
        test = ds.subset(te)
        out.accuracy[cfg.name] = {k: evaluate(m, test) for k, m in models.items()}
        if cfg.adaptive:
            out.adaptive[cfg.name] = {
                k: evaluate(adaptive_retrain(k, train, ds.subset(tr), seeds.derive(seed, "adaptive", k),
                                             **settings.model_params(k)), test)
                for k in settings.models
            }
    return out


# --- files ----------------------------------------------------------------------

def write_run(out_dir: str | Path, runs: dict[str, ConfigRun]) -> None:
    """Per-config CSVs, configs.json, overhead.csv and the wall-clock timing.csv."""
    out = Path(out_dir)
    try:
        (out / "configs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc}") from exc
    for name, run in runs.items():
        write_records(out / "configs" / f"{name}.csv", run.records)
    (out / "configs.json").write_text(json.dumps([asdict(r.config) for r in runs.values()], indent=1) + "\n")
    rows = [["config", "time_ratio", "cpu_ratio", "mem_ratio"]]
    rows += [[name, *(f"{x:.6f}" for x in r)] for name, r in overheads(runs).items()]
    _write_csv(out / "overhead.csv", rows)
    rows = [["config", "sample", "anonymize_ms"]]
    for name, run in runs.items():
        rows += [[name, i, f"{ms:.6f}"] for i, ms in enumerate(run.anonymize_ms)]
    _write_csv(out / "timing.csv", rows)


def read_run(run_dir: str | Path) -> tuple[list[RunConfig], dict[str, list[FeatureRecord]]]:
    run_dir = Path(run_dir)
    path = run_dir / "configs.json"
    if not path.exists():
        raise ConfigError(f"no configs.json under {run_dir}")
    configs = [RunConfig.from_dict(d) for d in json.loads(path.read_text())]
    records = {}
    for c in configs:
        p = run_dir / "configs" / f"{c.name}.csv"
        if p.exists():
            records[c.name] = read_records(p)
    if BASELINE not in records:
        raise ConfigError(f"missing baseline CSV under {run_dir}")
    return configs, records


def write_attack(out_dir: str | Path, res: AttackResults) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"split": res.split, "baseline": res.baseline_reports,
           "accuracy": res.accuracy, "adaptive": res.adaptive}
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    rows = [["config", "model", "attacker", "accuracy"]]
    for name, accs in res.accuracy.items():
        rows += [[name, k, "static", f"{a:.6f}"] for k, a in accs.items()]
    for name, accs in res.adaptive.items():
        rows += [[name, k, "adaptive", f"{a:.6f}"] for k, a in accs.items()]
    _write_csv(out / "accuracy.csv", rows)


def _write_csv(path: Path, rows: list[list[Any]]) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    path.write_text(buf.getvalue())


def _read_csv(path: Path) -> list[list[str]]:
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.reader(fh))[1:]


# --- report ---------------------------------------------------------------------

def _table(title: str, header: list[str], rows: list[list[str]]) -> str:
    cells = [header] + rows
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    fmt = lambda r: "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
    lines = [title, "-" * len(title), fmt(header), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.1f}"


def render_report(out_dir: str | Path) -> str:
    """Aligned text tables from accuracy.csv and overhead.csv (simulated values only)."""
    out = Path(out_dir)
    acc: dict[tuple[str, str, str], float] = {}
    for name, model, who, a in _read_csv(out / "accuracy.csv"):
        acc[(name, model, who)] = float(a)
    ovh = {r[0]: tuple(float(x) for x in r[1:]) for r in _read_csv(out / "overhead.csv")}
    models = [m for m in MODEL_KINDS if any(k[1] == m for k in acc)]
    configs = sorted({k[0] for k in acc} | set(ovh))
    parts = ["Anonymization experiment report\n"]

    def get(name, model, who="static"):
        return acc.get((name, model, who))

    levels = sorted({int(c.split("_")[1][1:]) for c in configs if c.startswith("remodel_")})
    batches = sorted({int(c.rsplit("B", 1)[1]) for c in configs if c.startswith("mix_")})
    if models:
        parts.append(_table("Computation identification accuracy (%)", ["model", "baseline"],
                            [[m, _pct(get(BASELINE, m))] for m in models]))
    for m in models:
        rows = [[f"L{lv}"] + [_pct(get(f"remodel_L{lv}_{mask}", m)) for mask in ABLATION_MASKS]
                for lv in levels]
        if rows:
            parts.append(_table(f"Impact of anonymizing different features ({m}, %)",
                                ["level", *ABLATION_MASKS], rows))
    if batches and models:
        rows = [[f"B{b}"] + [_pct(get(f"mix_{t}_B{b}", m)) for t in ("seq", "par") for m in models]
                for b in batches]
        parts.append(_table("Mixing accuracy (%)",
                            ["batch"] + [f"{t}:{m}" for t in ("seq", "par") for m in models], rows))
    hybrids = sorted(c for c in configs if c.startswith("hybrid_"))
    if hybrids and models:
        rows = []
        for h in hybrids:
            _, lv, _, b = h.split("_")
            rows.append([h] + [f"{_pct(get(h, m))} / {_pct(get(f'remodel_{lv}_all', m))} / "
                               f"{_pct(get(f'mix_par_{b}', m))}" for m in models])
        parts.append(_table("Hybrid vs constituents: hybrid / remodel / parallel mixing (%)",
                            ["config", *models], rows))
    adaptive = sorted({k[0] for k in acc if k[2] == "adaptive"})
    if adaptive:
        rows = [[a] + [f"{_pct(get(a, m))} -> {_pct(get(a, m, 'adaptive'))}" for m in models]
                for a in adaptive]
        parts.append(_table("Adaptive attacker: static -> retrained (%)", ["config", *models], rows))
    if ovh:
        rows = [[c, *(f"{x:.3f}" for x in ovh[c])] for c in configs if c in ovh]
        parts.append(_table("Normalized overheads vs baseline", ["config", "time", "cpu", "mem"], rows))
    return "\n".join(parts)


def render_timing(out_dir: str | Path) -> str:
    """Mean anonymization time per graph by configuration (wall clock, not reproducible)."""
    sums: dict[str, list[float]] = {}
    for name, _, ms in _read_csv(Path(out_dir) / "timing.csv"):
        sums.setdefault(name, []).append(float(ms))
    rows = [[n, f"{np.mean(v):.4f}"] for n, v in sorted(sums.items()) if n != BASELINE]
    return _table("Required time to anonymize (ms per graph)", ["config", "mean_ms"], rows)


def timing_summary(runs: dict[str, ConfigRun]) -> dict[str, float]:
    return {name: float(np.mean(r.anonymize_ms)) for name, r in runs.items()}


def accuracy_frame(res: AttackResults, kind: str) -> dict[str, float]:
    return {name: accs[kind] for name, accs in res.accuracy.items() if kind in accs}


__all__ = [
    "ExperimentSettings", "RunConfig", "ConfigRun", "AttackResults", "sweep_configs", "batches_for",
    "run_config", "run_sweep", "remodel_timing", "overheads", "attack", "write_run", "read_run", "write_attack",
    "render_report", "render_timing", "timing_summary",
]
