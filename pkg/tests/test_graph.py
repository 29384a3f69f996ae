from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphveil.errors import CycleError, GraphStateError, InvalidArgumentError
from graphveil.graph import (
    Custom, DelayClass, OpKind, compile_graph, connect_nodes, create_graph, dumps_graph, graph_from_dict,
    graph_to_dict, loads_graph, node_degrees, parse_kind, ready_frontier,
)

from conftest import graphs


def chain(*kinds, label="c"):
    g = create_graph(label)
    prev = None
    for k in kinds:
        prev = connect_nodes(g, k, [] if prev is None else [prev])
    return g


def brute_topo(n, edges):
    """Smallest valid permutation in lexicographic order."""
    for perm in itertools.permutations(range(n)):
        pos = {v: i for i, v in enumerate(perm)}
        if all(pos[u] < pos[v] for u, v in edges):
            return list(perm)
    return None


def has_cycle(n, edges):
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
    color = [0] * n

    def dfs(v):
        color[v] = 1
        for s in adj[v]:
            if color[s] == 1 or (color[s] == 0 and dfs(s)):
                return True
        color[v] = 2
        return False

    return any(color[v] == 0 and dfs(v) for v in range(n))


def on_cycle(node, n, edges):
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
    stack, seen = list(adj[node]), set()
    while stack:
        v = stack.pop()
        if v == node:
            return True
        if v not in seen:
            seen.add(v)
            stack.extend(adj[v])
    return False


@st.composite
def edge_sets(draw):
    n = draw(st.integers(1, 6))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=min(len(pairs), 9))) if pairs else []
    return n, chosen


def build_raw(n, edges):
    g = create_graph("raw")
    incoming = {v: 0 for v in range(n)}
    for _, v in edges:
        incoming[v] += 1
    for v in range(n):
        g.add_node(OpKind.SORT, inputs=max(1, incoming[v]))
    port = {v: 0 for v in range(n)}
    for u, v in edges:
        g.add_edge(u, v, port[v])
        port[v] += 1
    return g


@settings(max_examples=200, deadline=None)
@given(edge_sets())
def test_topo_order_and_cycles_match_oracles(case):
    n, edges = case
    g = build_raw(n, edges)
    if has_cycle(n, edges):
        with pytest.raises(CycleError) as exc:
            compile_graph(g)
        assert on_cycle(exc.value.node, n, edges)
    else:
        cg = compile_graph(g)
        assert list(cg.topo_order) == brute_topo(n, edges)


def test_compiled_graph_is_immutable():
    g = chain(OpKind.SORT, OpKind.HASH)
    compile_graph(g)
    with pytest.raises(GraphStateError):
        connect_nodes(g, OpKind.SORT, [0])
    with pytest.raises(GraphStateError):
        g.add_edge(0, 1, 0)


def test_connect_rejects_fakes_and_unknown_deps():
    g = create_graph("x")
    with pytest.raises(InvalidArgumentError):
        connect_nodes(g, OpKind.FAKE, [])
    with pytest.raises(InvalidArgumentError):
        connect_nodes(g, OpKind.SORT, [3])


def test_duplicate_custom_name_rejected():
    g = create_graph("x")
    connect_nodes(g, Custom("mine"), [])
    with pytest.raises(InvalidArgumentError):
        connect_nodes(g, Custom("mine"), [0])


def test_empty_graph_and_label():
    with pytest.raises(InvalidArgumentError):
        create_graph("")
    with pytest.raises(InvalidArgumentError):
        compile_graph(create_graph("x"))


def test_self_edge_and_port_gaps():
    g = create_graph("x")
    g.add_node(OpKind.SORT)
    with pytest.raises(InvalidArgumentError):
        g.add_edge(0, 0, 0)
    g.add_node(OpKind.SORT, inputs=2)
    g.add_edge(0, 1, 1)
    with pytest.raises(InvalidArgumentError):
        compile_graph(g)


def test_two_node_cycle_names_a_member():
    g = create_graph("x")
    g.add_node(OpKind.SORT)
    g.add_node(OpKind.SORT)
    g.add_edge(0, 1, 0)
    g.add_edge(1, 0, 0)
    with pytest.raises(CycleError) as exc:
        compile_graph(g)
    assert exc.value.node in (0, 1)
    assert "cycle" in str(exc.value)


def test_sources_sinks_and_wiring():
    g = create_graph("x")
    s = connect_nodes(g, OpKind.SPLIT, [], {"parts": 2})
    a = connect_nodes(g, OpKind.SORT, [s])
    b = connect_nodes(g, OpKind.HASH, [s])
    c = connect_nodes(g, OpKind.ENCRYPT, [a, b])
    cg = compile_graph(g)
    assert cg.sources == [s]
    assert cg.sinks == [c]
    assert cg.wiring[a] == ((s, 0),)
    assert cg.wiring[b] == ((s, 1),)
    assert cg.wiring[c] == ((a, 0), (b, 0))
    assert cg.input_slots == [(s, 0)]
    assert cg.output_slots == [(c, 0)]


def test_extra_consumers_share_last_output():
    g = create_graph("x")
    s = connect_nodes(g, OpKind.SPLIT, [], {"parts": 2})
    kids = [connect_nodes(g, OpKind.SORT, [s]) for _ in range(3)]
    cg = compile_graph(g)
    assert [cg.wiring[k][0][1] for k in kids] == [0, 1, 1]


def test_ready_frontier_and_degrees():
    cg = compile_graph(chain(OpKind.SORT, OpKind.HASH, OpKind.SORT))
    assert ready_frontier(cg, []) == [0]
    assert ready_frontier(cg, [0]) == [1]
    assert ready_frontier(cg, [0, 1, 2]) == []
    # stubs count: source gets its external input, sink its external output
    assert node_degrees(cg) == [2, 2, 2]


@settings(max_examples=50, deadline=None)
@given(graphs())
def test_json_round_trip(case):
    cg, _ = case
    again = compile_graph(loads_graph(dumps_graph(cg)))
    assert graph_to_dict(again) == graph_to_dict(cg)
    assert again.topo_order == cg.topo_order


def test_from_dict_errors():
    with pytest.raises(InvalidArgumentError):
        graph_from_dict({"class_label": "x"})
    with pytest.raises(InvalidArgumentError):
        graph_from_dict({"class_label": "x", "nodes": [{"id": 1, "kind": "Sort"}], "edges": []})
    with pytest.raises(InvalidArgumentError):
        parse_kind("Nope")
    assert parse_kind("Custom:z") == Custom("z")


def test_delay_class_round_trips():
    g = create_graph("x", DelayClass.SENSITIVE)
    connect_nodes(g, OpKind.SORT, [])
    assert compile_graph(graph_from_dict(graph_to_dict(g))).delay_class is DelayClass.SENSITIVE


def test_random_graphs_compile(rng):
    from conftest import random_graph
    for _ in range(50):
        cg = random_graph(rng)
        assert sorted(cg.topo_order) == list(range(len(cg.nodes)))
        pos = {v: i for i, v in enumerate(cg.topo_order)}
        assert all(pos[u] < pos[v] for u, v, _ in cg.graph.edges)
        assert np.all(np.array(cg.in_degree) >= 0)
