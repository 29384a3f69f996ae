"""Workload classes and the labeled synthetic dataset.

Each :class:`WorkloadClass` is a graph template plus an input-size range.
Samples of a class share the topology and differ in input sizes (uniform
over the range) and contents (random bytes arranged in short runs so that
run-length compression has something to do).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from graphveil import seeds
from graphveil.errors import InputError, InvalidArgumentError
from graphveil.graph import (
    CompiledGraph, DelayClass, compile_graph, connect_nodes, create_graph, dumps_graph, loads_graph,
    node_degrees, parse_kind,
)
from graphveil.payload import Payload


@dataclass(frozen=True)
class Step:
    kind: str
    deps: tuple[int, ...] = ()
    params: dict[str, Any] = field(default_factory=dict)
    inputs: int = 1


@dataclass(frozen=True)
class WorkloadClass:
    name: str
    steps: tuple[Step, ...]
    input_size_range: tuple[int, int] = (1024, 8192)
    delay_class: DelayClass = DelayClass.TOLERANT
    max_run: int = 8

    def __post_init__(self):
        lo, hi = self.input_size_range
        if not self.name:
            raise InvalidArgumentError("workload class needs a name")
        if lo < 1 or lo > hi:
            raise InvalidArgumentError(f"bad input size range {self.input_size_range}")
        if not self.steps:
            raise InvalidArgumentError("workload class needs at least one step")

    def build(self) -> CompiledGraph:
        g = create_graph(self.name, self.delay_class)
        for st in self.steps:
            connect_nodes(g, parse_kind(st.kind), list(st.deps), dict(st.params), inputs=st.inputs)
        return compile_graph(g)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> WorkloadClass:
        steps = tuple(Step(s["kind"], tuple(s.get("deps", ())), dict(s.get("params", {})),
                           int(s.get("inputs", 1))) for s in d["steps"])
        return cls(d["name"], steps, tuple(d.get("input_size_range", (1024, 8192))),
                   DelayClass(d.get("delay_class", "tolerant")), int(d.get("max_run", 8)))


def load_class_suite(path: str | Path) -> list[WorkloadClass]:
    return [WorkloadClass.from_dict(c) for c in json.loads(Path(path).read_text())["classes"]]


def default_class_suite() -> list[WorkloadClass]:
    """The ten built-in classes (algorithmic and ML-style pipelines)."""
    text = resources.files("graphveil.data").joinpath("classes.json").read_text()
    return [WorkloadClass.from_dict(c) for c in json.loads(text)["classes"]]


def suite_statistics(suite: list[WorkloadClass]) -> dict[str, float]:
    graphs = [wc.build() for wc in suite]
    counts = [len(g.nodes) for g in graphs]
    degrees = [float(np.mean(node_degrees(g))) for g in graphs]
    return {"mean_nodes": float(np.mean(counts)), "std_nodes": float(np.std(counts)),
            "mean_degree": float(np.mean(degrees)), "std_degree": float(np.std(degrees))}


@dataclass
class Sample:
    graph: CompiledGraph
    inputs: list[Payload]
    seed: int

    @property
    def class_label(self) -> str:
        return self.graph.class_label


def _run_bytes(rng: np.random.Generator, n: int, max_run: int) -> bytes:
    runs = rng.integers(1, max_run + 1, size=n)
    values = rng.integers(0, 256, size=n, dtype=np.uint8)
    return np.repeat(values, runs)[:n].tobytes()


def generate_dataset(suite: list[WorkloadClass], samples_per_class: int, seed: int = 0) -> list[Sample]:
    """Emit ``samples_per_class`` samples per class, class by class."""
    if not suite:
        raise InvalidArgumentError("dataset spec is empty")
    if samples_per_class < 1:
        raise InvalidArgumentError("samples_per_class must be >= 1")
    if len({wc.name for wc in suite}) != len(suite):
        raise InvalidArgumentError("workload class names must be unique")
    out = []
    for ci, wc in enumerate(suite):
        cg = wc.build()
        lo, hi = wc.input_size_range
        for si in range(samples_per_class):
            rng = np.random.default_rng(seeds.derive(seed, "data", ci, si))
            inputs = [Payload.of(_run_bytes(rng, int(rng.integers(lo, hi + 1)), wc.max_run))
                      for _ in cg.input_slots]
            out.append(Sample(cg, inputs, seeds.derive(seed, "run", ci, si)))
    return out


# --- on-disk layout -----------------------------------------------------

def write_dataset(samples: list[Sample], out_dir: str | Path) -> Path:
    """Write graphs, payloads (raw ``.bin`` + ``.len`` sidecar) and manifest.json."""
    out = Path(out_dir)
    try:
        (out / "graphs").mkdir(parents=True, exist_ok=True)
        (out / "payloads").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot write dataset to {out}: {exc}") from exc
    written: dict[str, str] = {}
    manifest = []
    for i, s in enumerate(samples):
        label = s.class_label
        if label not in written:
            name = f"graphs/{label}.json"
            (out / name).write_text(dumps_graph(s.graph))
            written[label] = name
        files = []
        for j, p in enumerate(s.inputs):
            stem = f"payloads/{i:05d}_{j}"
            (out / f"{stem}.bin").write_bytes(p.data)
            (out / f"{stem}.len").write_text(f"{p.logical_len}\n")
            files.append(f"{stem}.bin")
        manifest.append({"class_label": label, "graph": written[label], "inputs": files, "seed": s.seed})
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path


def read_dataset(root: str | Path) -> list[Sample]:
    root = Path(root)
    path = root / "manifest.json"
    if not path.exists():
        raise InputError(f"no manifest.json under {root}")
    graphs: dict[str, CompiledGraph] = {}
    samples = []
    for entry in json.loads(path.read_text()):
        gfile = entry["graph"]
        if gfile not in graphs:
            graphs[gfile] = compile_graph(loads_graph((root / gfile).read_text()))
        inputs = []
        for f in entry["inputs"]:
            data = (root / f).read_bytes()
            n = int((root / f).with_suffix(".len").read_text())
            inputs.append(Payload(data, n))
        samples.append(Sample(graphs[gfile], inputs, int(entry.get("seed", 0))))
    return samples


def manifest_digest(root: str | Path) -> str:
    return hashlib.sha256((Path(root) / "manifest.json").read_bytes()).hexdigest()
