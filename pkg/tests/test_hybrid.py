from __future__ import annotations

import pytest

from graphveil.costmodel import CostModel, KindCost, Simulated
from graphveil.executor import execute_single, validate_schedule
from graphveil.graph import OpKind
from graphveil.hybrid import anonymize_hybrid
from graphveil.remodel import MASKS

from conftest import random_graph, random_inputs


def unit_clock() -> Simulated:
    kinds = {k.value: KindCost(1.0, 0.0, 0.5, 10.0, 1.0) for k in OpKind}
    kinds["Fake"] = KindCost(0.0, 0.0, 1.0, 5.0, 0.0)
    return Simulated(CostModel(kinds))


def test_hybrid_outputs_and_busy_additivity(rng):
    graphs = [random_graph(rng) for _ in range(3)]
    inputs = [random_inputs(rng, g) for g in graphs]
    res = anonymize_hybrid(graphs, inputs, 3, MASKS["all"], True, 2, seed=4, clock=unit_clock())
    validate_schedule(res.schedule, [a.graph for a in res.anonymized])
    for g, ins, outs in zip(graphs, inputs, res.outputs):
        assert outs == execute_single(g, ins).outputs
    # busy time is each real node's busy plus its fakes' fixed cost
    for a, r in zip(res.anonymized, res.records):
        real = sum(0.5 for n in a.graph.nodes if not n.is_fake)
        fake = sum(n.params["cost_ms"] for n in a.graph.nodes if n.is_fake)
        assert r.cpu_busy_ms == pytest.approx(real + fake)
    assert len(res.anonymize_ms) == 3
    assert all(t >= d for t, d in zip(res.anonymize_ms, res.decision_ms))


def test_hybrid_sequential_path(rng):
    graphs = [random_graph(rng) for _ in range(2)]
    inputs = [random_inputs(rng, g) for g in graphs]
    res = anonymize_hybrid(graphs, inputs, 2, MASKS["both"], parallel=False, seed=1)
    assert all(e.worker == 0 for e in res.schedule.entries)
    for g, ins, outs in zip(graphs, inputs, res.outputs):
        assert outs == execute_single(g, ins).outputs
