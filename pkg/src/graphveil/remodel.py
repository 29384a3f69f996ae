"""Remodeling: fake nodes and I/O padding driven by an anonymization level.

Given a level L in 1..5 and a feature mask:

* time: ``ceil(L * |V| / 3)`` Fake nodes are attached as leaves to uniformly
  chosen real nodes, each costing a uniform draw from ``(0, L * mu / 5]`` ms
  where ``mu`` is the mean nominal cost of the graph's nodes;
* inputs / outputs: each external input (sink output) is padded by a uniform
  draw from ``1..max(1, L * 20% of its logical length)`` bytes.

All random draws are counter-based on the seed, so for a fixed seed the fake
nodes of level L are a prefix of those of level L+1 and every padding draw is
shared across levels: overheads are non-decreasing in level graph by graph.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from graphveil import seeds
from graphveil.costmodel import CostModel
from graphveil.errors import CorruptionError, InvalidArgumentError
from graphveil.graph import (
    CompiledGraph, ComputationGraph, DelayClass, NodeSpec, OpKind, compile_graph, graph_from_dict, graph_to_dict,
)
from graphveil.payload import Payload, pad_amount

MIN_LEVEL, MAX_LEVEL = 1, 5
SENSITIVE_WEIGHT = 3.0
TOLERANT_WEIGHT = 1.0


@dataclass(frozen=True)
class FeatureMask:
    pad_inputs: bool = True
    pad_outputs: bool = True
    anonymize_time: bool = True

    @property
    def empty(self) -> bool:
        return not (self.pad_inputs or self.pad_outputs or self.anonymize_time)

    @property
    def name(self) -> str:
        for key, mask in MASKS.items():
            if mask == self:
                return key
        return "custom"

    @classmethod
    def named(cls, name: str) -> FeatureMask:
        try:
            return MASKS[name]
        except KeyError:
            raise InvalidArgumentError(f"unknown feature mask {name!r}; expected one of {sorted(MASKS)}") from None


MASKS = {
    "input": FeatureMask(True, False, False),
    "output": FeatureMask(False, True, False),
    "both": FeatureMask(True, True, False),
    "time": FeatureMask(False, False, True),
    "all": FeatureMask(True, True, True),
    "none": FeatureMask(False, False, False),
}


class Mode(Enum):
    REMODELING = "remodeling"
    MIXING = "mixing"
    HYBRID = "hybrid"


def default_weight(delay_class: DelayClass) -> float:
    return SENSITIVE_WEIGHT if delay_class is DelayClass.SENSITIVE else TOLERANT_WEIGHT


@dataclass(frozen=True)
class AnonymizationPlan:
    mode: Mode = Mode.REMODELING
    level: int = 1
    mask: FeatureMask = field(default_factory=FeatureMask)
    batch_size: int = 1
    parallel: bool = False
    workers: int = 4
    sensitive_weight: float = SENSITIVE_WEIGHT
    tolerant_weight: float = TOLERANT_WEIGHT
    seed: int = 0

    def __post_init__(self):
        if not MIN_LEVEL <= self.level <= MAX_LEVEL:
            raise InvalidArgumentError(f"level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {self.level}")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        if self.sensitive_weight <= 0 or self.tolerant_weight <= 0:
            raise InvalidArgumentError("weights must be positive")

    def weight_for(self, delay_class: DelayClass) -> float:
        return self.sensitive_weight if delay_class is DelayClass.SENSITIVE else self.tolerant_weight

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "level": self.level,
            "mask": {"pad_inputs": self.mask.pad_inputs, "pad_outputs": self.mask.pad_outputs,
                     "anonymize_time": self.mask.anonymize_time},
            "batch_size": self.batch_size,
            "parallel": self.parallel,
            "workers": self.workers,
            "weights": {"sensitive": self.sensitive_weight, "tolerant": self.tolerant_weight},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AnonymizationPlan:
        try:
            mask = d.get("mask", "all")
            mask = FeatureMask.named(mask) if isinstance(mask, str) else FeatureMask(**mask)
            weights = d.get("weights", {})
            return cls(
                mode=Mode(d.get("mode", "remodeling")),
                level=int(d.get("level", 1)),
                mask=mask,
                batch_size=int(d.get("batch_size", 1)),
                parallel=bool(d.get("parallel", False)),
                workers=int(d.get("workers", 4)),
                sensitive_weight=float(weights.get("sensitive", SENSITIVE_WEIGHT)),
                tolerant_weight=float(weights.get("tolerant", TOLERANT_WEIGHT)),
                seed=int(d.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"malformed plan: {exc}") from exc


@dataclass(frozen=True)
class AnonymizedGraph:
    """A remodeled graph plus what is needed to undo its output padding.

    ``strip_map`` holds ``(output index, draw)`` directives; the byte amounts
    depend on output sizes and are resolved by :meth:`strip_amounts`.
    """

    graph: CompiledGraph
    provenance: dict[str, Any]
    strip_map: tuple[tuple[int, float], ...] = ()
    level: int = 1

    @property
    def class_label(self) -> str:
        return self.graph.class_label

    @property
    def fake_count(self) -> int:
        return sum(1 for n in self.graph.nodes if n.is_fake)

    def strip_amounts(self, outputs: Sequence[Payload]) -> dict[int, int]:
        return {i: pad_amount(u, self.level, outputs[i].logical_len) for i, u in self.strip_map}

    def to_json(self) -> str:
        d = graph_to_dict(self.graph)
        d["provenance"] = self.provenance
        d["strip_map"] = [[i, u] for i, u in self.strip_map]
        d["level"] = self.level
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> AnonymizedGraph:
        d = json.loads(text)
        g = compile_graph(graph_from_dict(d))
        return cls(g, d.get("provenance", {}), tuple((int(i), float(u)) for i, u in d.get("strip_map", [])),
                   int(d.get("level", 1)))


def fake_node_count(level: int, num_nodes: int) -> int:
    return math.ceil(level * num_nodes / 3)


def anonymize_remodel(
    cg: CompiledGraph,
    level: int,
    mask: FeatureMask | None = None,
    seed: int = 0,
    cost_model: CostModel | None = None,
) -> AnonymizedGraph:
    """Remodel ``cg`` at ``level`` under ``mask``; the input graph is untouched.

    Raises:
        InvalidArgumentError: level outside 1..5.
    """
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise InvalidArgumentError(f"level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {level}")
    mask = FeatureMask() if mask is None else mask
    g = cg.graph.copy()
    provenance = {"class_label": cg.class_label, "level": level,
                  "mask": {"pad_inputs": mask.pad_inputs, "pad_outputs": mask.pad_outputs,
                           "anonymize_time": mask.anonymize_time},
                  "seed": seed}
    strip: list[tuple[int, float]] = []

    if mask.pad_inputs or mask.pad_outputs:
        for v in set(cg.sources) | set(cg.sinks):
            g.nodes[v].params["pad_level"] = level
    if mask.pad_inputs:
        s = seeds.derive(seed, "pad_in")
        for v, port in cg.input_slots:
            g.nodes[v].params[f"pad_in.{port}"] = seeds.uniform(s, v, port)
    if mask.pad_outputs:
        s = seeds.derive(seed, "pad_out")
        for i, (v, k) in enumerate(cg.output_slots):
            u = seeds.uniform(s, v, k)
            g.nodes[v].params[f"pad_out.{k}"] = u
            strip.append((i, u))

    if mask.anonymize_time:
        model = cost_model or CostModel.default()
        real = cg.real_nodes()
        mu = float(np.mean([model.nominal_ms(cg.nodes[v].kind) for v in real]))
        cap = level * mu / 5.0
        s = seeds.derive(seed, "fake")
        for i in range(fake_node_count(level, len(real))):
            target = real[min(len(real) - 1, int(seeds.uniform(s, i, "attach") * len(real)))]
            cost = (1.0 - seeds.uniform(s, i, "cost")) * cap
            f = g.add_node(OpKind.FAKE, {"cost_ms": cost, "rounds": 1})
            g.add_edge(target, f, 0)
        g = _number_fakes_after_targets(g)

    return AnonymizedGraph(compile_graph(g), provenance, tuple(strip), level)


def _number_fakes_after_targets(g: ComputationGraph) -> ComputationGraph:
    # Give each fake the id right after its target so lowest-id scheduling
    # runs it as soon as the target finishes instead of after the real work.
    after: dict[int, list[int]] = {}
    for p, c, _ in g.edges:
        if g.nodes[c].is_fake:
            after.setdefault(p, []).append(c)
    order: list[int] = []
    for n in g.nodes:
        if not n.is_fake:
            order.append(n.id)
            order.extend(sorted(after.get(n.id, ())))
    new_id = {old: new for new, old in enumerate(order)}
    out = ComputationGraph(g.class_label, g.delay_class)
    for old in order:
        n = g.nodes[old]
        params = n.params
        if not n.is_fake and new_id[old] != old:
            # op seeds and cost jitter stay keyed to the node's original id
            params = {**params, "origin": params.get("origin", old)}
        out.nodes.append(NodeSpec(new_id[old], n.kind, params, n.declared_inputs, n.declared_outputs))
    out.edges = [(new_id[p], new_id[c], port) for p, c, port in g.edges]
    return out


def strip_outputs(outputs: Sequence[Payload], strip_map: dict[int, int] | None) -> list[Payload]:
    """Remove ``strip_map[i]`` padding bytes from output ``i``.

    Raises:
        CorruptionError: an amount exceeds the output's padding, or an index
            has no output.
    """
    strip_map = strip_map or {}
    out = list(outputs)
    for i, amount in strip_map.items():
        if not 0 <= i < len(out):
            raise CorruptionError(f"strip map names missing output {i}")
        if amount > out[i].physical_len:
            raise CorruptionError(f"cannot strip {amount} bytes from a {out[i].physical_len}-byte payload")
        out[i] = out[i].stripped(amount)
    return out


def preanonymize_pool(cg: CompiledGraph, plan: AnonymizationPlan, n: int, seed: int = 0,
                      cost_model: CostModel | None = None) -> list[AnonymizedGraph]:
    """Build ``n`` independently seeded remodeled variants ahead of time."""
    if n < 1:
        raise InvalidArgumentError("pool size must be >= 1")
    return [anonymize_remodel(cg, plan.level, plan.mask, seeds.derive(seed, "pool", i), cost_model)
            for i in range(n)]


def select_from_pool(pool: Sequence[AnonymizedGraph], rng: np.random.Generator) -> AnonymizedGraph:
    return pool[int(rng.integers(len(pool)))]
