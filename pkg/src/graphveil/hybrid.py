"""Hybrid mode: remodel every graph of a batch, then mix the remodeled batch."""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass

from graphveil import seeds
from graphveil.costmodel import ClockMode, CostModel
from graphveil.executor import FeatureRecord, Schedule
from graphveil.graph import CompiledGraph
from graphveil.mixing import DEFAULT_WORKERS, MixBatch, anonymization_cost, mix_parallel, mix_sequential
from graphveil.payload import Payload
from graphveil.remodel import AnonymizedGraph, FeatureMask, anonymize_remodel, default_weight, strip_outputs


@dataclass
class HybridResult:
    outputs: list[list[Payload]]
    records: list[FeatureRecord]
    schedule: Schedule
    anonymized: list[AnonymizedGraph]
    remodel_ms: list[float]
    decision_ms: list[float]

    @property
    def anonymize_ms(self) -> list[float]:
        return [r + d for r, d in zip(self.remodel_ms, self.decision_ms)]


def anonymize_hybrid(
    graphs: Sequence[CompiledGraph],
    inputs: Sequence[Sequence[Payload]],
    level: int,
    mask: FeatureMask | None = None,
    parallel: bool = True,
    workers: int = DEFAULT_WORKERS,
    seed: int = 0,
    clock: ClockMode | None = None,
    weights: Sequence[float] | None = None,
    run_seeds: Sequence[int] | None = None,
    cost_model: CostModel | None = None,
) -> HybridResult:
    """Remodel each graph at ``level``, mix them as one batch, strip outputs."""
    anonymized, remodel_ms = [], []
    for i, cg in enumerate(graphs):
        t0 = time.perf_counter()
        anonymized.append(anonymize_remodel(cg, level, mask, seeds.derive(seed, "remodel", i), cost_model))
        remodel_ms.append((time.perf_counter() - t0) * 1000.0)
    batch = MixBatch(
        [a.graph for a in anonymized],
        [list(x) for x in inputs],
        list(weights) if weights is not None else [default_weight(g.delay_class) for g in graphs],
        seed=seeds.derive(seed, "mix"),
        run_seeds=list(run_seeds) if run_seeds is not None else None,
    )
    if parallel and workers > 1:
        mixed = mix_parallel(batch, workers, clock)
    else:
        mixed = mix_sequential(batch, clock)
    outputs = [strip_outputs(outs, a.strip_amounts(outs)) for a, outs in zip(anonymized, mixed.outputs)]
    return HybridResult(outputs, mixed.records, mixed.schedule, anonymized, remodel_ms,
                        anonymization_cost(mixed))
