from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphveil.costmodel import CostModel, KindCost, Simulated, WallClock
from graphveil.errors import ExhaustedError, InvalidArgumentError
from graphveil.executor import execute_single, validate_schedule
from graphveil.graph import DelayClass, OpKind, compile_graph, connect_nodes, create_graph
from graphveil.mixing import MixBatch, anonymization_cost, mix_parallel, mix_sequential, pick_next
from graphveil.payload import Payload

from conftest import random_graph, random_inputs


def unit_clock() -> Simulated:
    kinds = {k.value: KindCost(1.0, 0.0, 0.5, 10.0, 1.0) for k in OpKind}
    kinds["Fake"] = KindCost(0.0, 0.0, 1.0, 5.0, 0.0)
    return Simulated(CostModel(kinds))


def chain(n, label="c", delay=DelayClass.TOLERANT):
    g = create_graph(label, delay)
    prev = None
    for _ in range(n):
        prev = connect_nodes(g, OpKind.SORT, [] if prev is None else [prev])
    return compile_graph(g)


def batch_of(rng, b, **kw):
    graphs = [random_graph(rng) for _ in range(b)]
    return MixBatch(graphs, [random_inputs(rng, g) for g in graphs], **kw)


def test_pick_next_takes_lowest_ready_id():
    rng = np.random.default_rng(0)
    g, v = pick_next([[], [4, 7], []], [1.0, 1.0, 1.0], rng)
    assert (g, v) == (1, 4)
    with pytest.raises(ExhaustedError):
        pick_next([[], []], [1.0, 1.0], rng)


def test_sequential_two_chains_by_hand():
    # one worker, unit costs: every node adds 1 ms and the two spans overlap
    a, b = chain(2, "a"), chain(2, "b")
    batch = MixBatch([a, b], [[Payload.of(b"x")], [Payload.of(b"y")]], seed=3)
    res = mix_sequential(batch, unit_clock())
    validate_schedule(res.schedule, [a, b])
    assert res.schedule.makespan == pytest.approx(4.0)
    assert sum(r.completion_time_ms for r in res.records) >= 4.0
    assert all(r.cpu_busy_ms == pytest.approx(1.0) for r in res.records)
    assert res.picks == [2, 2]


def test_parallel_two_chains_by_hand():
    a, b = chain(3, "a"), chain(3, "b")
    batch = MixBatch([a, b], [[Payload.of(b"x")], [Payload.of(b"y")]], seed=3)
    res = mix_parallel(batch, 2, unit_clock())
    validate_schedule(res.schedule, [a, b])
    # two workers and two independent chains: no waiting at all
    assert res.schedule.makespan == pytest.approx(3.0)
    assert [r.completion_time_ms for r in res.records] == pytest.approx([3.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 4), st.booleans())
def test_mixing_preserves_outputs_and_schedules(seed, b, workers, parallel):
    rng = np.random.default_rng(seed)
    batch = batch_of(rng, b, seed=seed)
    res = mix_parallel(batch, workers) if parallel else mix_sequential(batch)
    validate_schedule(res.schedule, batch.graphs)
    for g, ins, outs in zip(batch.graphs, batch.inputs, res.outputs):
        assert outs == execute_single(g, ins).outputs
    assert sum(res.picks) == sum(len(g.nodes) for g in batch.graphs)


def test_mixing_memory_and_io_equal_single_runs(rng):
    batch = batch_of(rng, 4, seed=1, run_seeds=[5, 6, 7, 8])
    mixed = mix_sequential(batch)
    for g, ins, s, r in zip(batch.graphs, batch.inputs, batch.run_seeds, mixed.records):
        alone = execute_single(g, ins, seed=s).record
        assert r.peak_memory_bytes == alone.peak_memory_bytes
        assert r.cpu_busy_ms == pytest.approx(alone.cpu_busy_ms)
        assert r.total_output_bytes == alone.total_output_bytes
        assert r.completion_time_ms >= alone.completion_time_ms - 1e-9


def test_mixing_is_deterministic(rng):
    batch = batch_of(rng, 3, seed=9)
    a, b = mix_parallel(batch, 2), mix_parallel(batch, 2)
    assert a.records == b.records
    assert [(e.graph, e.node, e.worker) for e in a.schedule.entries] == \
        [(e.graph, e.node, e.worker) for e in b.schedule.entries]


def test_wall_clock_threads(rng):
    batch = batch_of(rng, 3, seed=2)
    res = mix_parallel(batch, 3, WallClock())
    validate_schedule(res.schedule, batch.graphs)
    for g, ins, outs in zip(batch.graphs, batch.inputs, res.outputs):
        assert outs == execute_single(g, ins).outputs


def test_batch_validation():
    g = chain(1)
    with pytest.raises(InvalidArgumentError):
        MixBatch([], [])
    with pytest.raises(InvalidArgumentError):
        MixBatch([g], [])
    with pytest.raises(InvalidArgumentError):
        MixBatch([g], [[Payload.of(b"")]], weights=[0.0])
    with pytest.raises(InvalidArgumentError):
        mix_parallel(MixBatch([g], [[Payload.of(b"")]]), 0)


def test_default_weights_favour_sensitive():
    s, t = chain(1, "s", DelayClass.SENSITIVE), chain(1, "t")
    batch = MixBatch([s, t], [[Payload.of(b"")], [Payload.of(b"")]])
    assert batch.weights[0] > batch.weights[1]


def test_decision_cost_is_reported(rng):
    res = mix_sequential(batch_of(rng, 3, seed=0))
    cost = anonymization_cost(res)
    assert len(cost) == 3 and all(c >= 0 for c in cost)
