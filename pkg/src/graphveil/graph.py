"""Computation graphs: construction, validation and dependency traversal.

A computation is a DAG of operation nodes. Users build a
:class:`ComputationGraph` with :func:`create_graph` and :func:`connect_nodes`,
then :func:`compile_graph` checks acyclicity and freezes it into a
:class:`CompiledGraph`, which every executor and anonymizer consumes.

Example:
    >>> g = create_graph("ml-train", DelayClass.TOLERANT)
    >>> a = connect_nodes(g, OpKind.DOWNSAMPLE, [])
    >>> b = connect_nodes(g, OpKind.NORMALIZE, [a])
    >>> compile_graph(g).topo_order
    (0, 1)
"""

from __future__ import annotations

import heapq
import json
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

from graphveil.errors import CycleError, GraphStateError, InvalidArgumentError


class OpKind(Enum):
    SORT = "Sort"
    SEARCH = "Search"
    HASH = "Hash"
    ENCRYPT = "Encrypt"
    DECRYPT = "Decrypt"
    COMPRESS = "Compress"
    DECOMPRESS = "Decompress"
    DOWNSAMPLE = "Downsample"
    NORMALIZE = "Normalize"
    SPLIT = "Split"
    TRAIN = "Train"
    EVALUATE = "Evaluate"
    FAKE = "Fake"


@dataclass(frozen=True)
class Custom:
    """A user-defined operation kind, resolved through the custom-op registry."""

    name: str

    def __post_init__(self):
        if not self.name:
            raise InvalidArgumentError("custom op name must be non-empty")


Kind = Union[OpKind, Custom]


def kind_name(kind: Kind) -> str:
    if isinstance(kind, Custom):
        return f"Custom:{kind.name}"
    return kind.value


def parse_kind(name: str) -> Kind:
    if name.startswith("Custom:"):
        return Custom(name[len("Custom:"):])
    try:
        return OpKind(name)
    except ValueError:
        raise InvalidArgumentError(f"unknown op kind {name!r}") from None


class DelayClass(Enum):
    SENSITIVE = "sensitive"
    TOLERANT = "tolerant"


@dataclass
class NodeSpec:
    id: int
    kind: Kind
    params: dict[str, Any] = field(default_factory=dict)
    declared_inputs: int = 1
    declared_outputs: int = 1

    @property
    def is_fake(self) -> bool:
        return self.kind is OpKind.FAKE


@dataclass
class ComputationGraph:
    """A mutable, not yet validated computation graph.

    Edges are ``(producer, consumer, port)`` triples where ``port`` is the
    consumer's input argument index.
    """

    class_label: str
    delay_class: DelayClass = DelayClass.TOLERANT
    nodes: list[NodeSpec] = field(default_factory=list)
    edges: list[tuple[int, int, int]] = field(default_factory=list)
    compiled: bool = False

    def _check_mutable(self):
        if self.compiled:
            raise GraphStateError("graph is compiled and immutable")

    def add_node(
        self,
        kind: Kind,
        params: dict[str, Any] | None = None,
        inputs: int = 1,
        outputs: int | None = None,
    ) -> int:
        """Append a node without wiring; low-level counterpart of connect_nodes."""
        self._check_mutable()
        if isinstance(kind, Custom) and any(n.kind == kind for n in self.nodes):
            raise InvalidArgumentError(f"custom name {kind.name!r} already used in graph")
        params = dict(params or {})
        if outputs is None:
            outputs = int(params.get("parts", 2)) if kind is OpKind.SPLIT else 1
        if inputs < 1 or outputs < 1:
            raise InvalidArgumentError("nodes need at least one input and one output")
        node_id = len(self.nodes)
        self.nodes.append(NodeSpec(node_id, kind, params, inputs, outputs))
        return node_id

    def add_edge(self, producer: int, consumer: int, port: int) -> None:
        self._check_mutable()
        n = len(self.nodes)
        if not (0 <= producer < n and 0 <= consumer < n):
            raise InvalidArgumentError(f"edge ({producer}, {consumer}) references a missing node")
        if producer == consumer:
            raise InvalidArgumentError(f"self-edge on node {producer}")
        self.edges.append((producer, consumer, port))

    def copy(self) -> ComputationGraph:
        """Uncompiled deep copy, used by transformations that append nodes."""
        return ComputationGraph(
            self.class_label,
            self.delay_class,
            [NodeSpec(n.id, n.kind, dict(n.params), n.declared_inputs, n.declared_outputs)
             for n in self.nodes],
            list(self.edges),
        )


def create_graph(class_label: str, delay_class: DelayClass = DelayClass.TOLERANT) -> ComputationGraph:
    if not class_label:
        raise InvalidArgumentError("class_label must be non-empty")
    return ComputationGraph(class_label, DelayClass(delay_class))


def connect_nodes(
    g: ComputationGraph,
    kind: Kind,
    deps: Iterable[int],
    params: dict[str, Any] | None = None,
    inputs: int = 1,
) -> int:
    """Append a node whose input ports are wired to ``deps`` in order.

    A node with no deps is a source and reads ``inputs`` external payloads.
    Fake nodes cannot be created here; only the remodeler emits them.
    """
    g._check_mutable()
    if kind is OpKind.FAKE:
        raise InvalidArgumentError("Fake nodes are reserved for anonymization")
    deps = list(deps)
    for d in deps:
        if not (isinstance(d, int) and 0 <= d < len(g.nodes)):
            raise InvalidArgumentError(f"unknown dependency {d!r}")
    node_id = g.add_node(kind, params, inputs=len(deps) if deps else inputs)
    for port, d in enumerate(deps):
        g.edges.append((d, node_id, port))
    return node_id


@dataclass(frozen=True)
class CompiledGraph:
    """An immutable, validated DAG with precomputed traversal tables.

    ``wiring[v]`` lists, per input port of ``v``, the ``(producer, output
    index)`` it reads. A producer's j-th outgoing edge reads output
    ``min(j, declared_outputs - 1)`` so extra consumers share the last port.
    """

    graph: ComputationGraph
    topo_order: tuple[int, ...]
    in_degree: tuple[int, ...]
    successors: tuple[tuple[int, ...], ...]
    predecessors: tuple[tuple[int, ...], ...]
    wiring: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def nodes(self) -> list[NodeSpec]:
        return self.graph.nodes

    @property
    def class_label(self) -> str:
        return self.graph.class_label

    @property
    def delay_class(self) -> DelayClass:
        return self.graph.delay_class

    def __len__(self):
        return len(self.graph.nodes)

    @property
    def sources(self) -> list[int]:
        return [v for v, d in enumerate(self.in_degree) if d == 0]

    @property
    def sinks(self) -> list[int]:
        """Real nodes whose outputs reach no other real node."""
        nodes = self.graph.nodes
        return [
            v for v, n in enumerate(nodes)
            if not n.is_fake and not any(not nodes[s].is_fake for s in self.successors[v])
        ]

    @property
    def input_slots(self) -> list[tuple[int, int]]:
        """External input ``(node, port)`` pairs in canonical order."""
        nodes = self.graph.nodes
        return [(v, p) for v in self.sources for p in range(nodes[v].declared_inputs)]

    @property
    def output_slots(self) -> list[tuple[int, int]]:
        nodes = self.graph.nodes
        return [(v, k) for v in self.sinks for k in range(nodes[v].declared_outputs)]

    def real_nodes(self) -> list[int]:
        return [n.id for n in self.graph.nodes if not n.is_fake]


def _find_cycle_node(n: int, remaining: set[int], preds: list[list[int]]) -> int:
    # Every remaining node has a remaining predecessor, so walking back must repeat.
    start = min(remaining)
    seen: set[int] = set()
    v = start
    while v not in seen:
        seen.add(v)
        v = min(p for p in preds[v] if p in remaining)
    return v


def compile_graph(g: ComputationGraph) -> CompiledGraph:
    """Validate ``g`` as a DAG and freeze it.

    Topological order comes from Kahn's algorithm with the smallest ready id
    taken first.

    Raises:
        InvalidArgumentError: the graph is empty or has a malformed edge.
        CycleError: the edges contain a cycle.
    """
    n = len(g.nodes)
    if n == 0:
        raise InvalidArgumentError("cannot compile an empty graph")
    succ: list[list[int]] = [[] for _ in range(n)]
    preds: list[list[int]] = [[] for _ in range(n)]
    in_ports: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    out_count = [0] * n
    for u, v, port in g.edges:
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise InvalidArgumentError(f"malformed edge ({u}, {v})")
        out_idx = min(out_count[u], g.nodes[u].declared_outputs - 1)
        out_count[u] += 1
        succ[u].append(v)
        preds[v].append(u)
        in_ports[v].append((port, u, out_idx))

    in_degree = [len(p) for p in preds]
    remaining_deg = list(in_degree)
    heap = [v for v in range(n) if remaining_deg[v] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for s in succ[v]:
            remaining_deg[s] -= 1
            if remaining_deg[s] == 0:
                heapq.heappush(heap, s)
    if len(order) < n:
        remaining = set(range(n)) - set(order)
        raise CycleError(_find_cycle_node(n, remaining, preds))

    wiring = []
    for v in range(n):
        ports = sorted(in_ports[v])
        if ports and [p for p, _, _ in ports] != list(range(len(ports))):
            raise InvalidArgumentError(f"node {v} has non-contiguous input ports")
        if ports and len(ports) != g.nodes[v].declared_inputs:
            raise InvalidArgumentError(f"node {v} declares {g.nodes[v].declared_inputs} inputs "
                                       f"but has {len(ports)} edges")
        wiring.append(tuple((u, k) for _, u, k in ports))

    g.compiled = True
    return CompiledGraph(
        graph=g,
        topo_order=tuple(order),
        in_degree=tuple(in_degree),
        successors=tuple(tuple(s) for s in succ),
        predecessors=tuple(tuple(p) for p in preds),
        wiring=tuple(wiring),
    )


def ready_frontier(cg: CompiledGraph, done: Iterable[int]) -> list[int]:
    """Nodes not in ``done`` whose predecessors are all in ``done``, by id."""
    done = set(done)
    return [
        v for v in range(len(cg.nodes))
        if v not in done and all(p in done for p in cg.predecessors[v])
    ]


def node_degrees(cg: CompiledGraph) -> list[int]:
    """Per-node degree counting external input and output stubs as edges."""
    degs = [cg.in_degree[v] + len(cg.successors[v]) for v in range(len(cg.nodes))]
    for v, _ in cg.input_slots:
        degs[v] += 1
    for v, _ in cg.output_slots:
        degs[v] += 1
    return degs


# --- JSON ---------------------------------------------------------------

def graph_to_dict(g: ComputationGraph | CompiledGraph) -> dict[str, Any]:
    if isinstance(g, CompiledGraph):
        g = g.graph
    return {
        "class_label": g.class_label,
        "delay_class": g.delay_class.value,
        "nodes": [
            {
                "id": n.id,
                "kind": kind_name(n.kind),
                "params": {k: n.params[k] for k in sorted(n.params)},
                "inputs": n.declared_inputs,
                "outputs": n.declared_outputs,
            }
            for n in g.nodes
        ],
        "edges": [[u, v, p] for u, v, p in g.edges],
    }


def graph_from_dict(d: dict[str, Any]) -> ComputationGraph:
    try:
        g = create_graph(d["class_label"], DelayClass(d.get("delay_class", "tolerant")))
        for i, nd in enumerate(d["nodes"]):
            if nd["id"] != i:
                raise InvalidArgumentError("node ids must be dense and ordered")
            g.add_node(parse_kind(nd["kind"]), nd.get("params", {}),
                       inputs=int(nd.get("inputs", 1)), outputs=int(nd.get("outputs", 1)))
        for u, v, p in d["edges"]:
            g.add_edge(int(u), int(v), int(p))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"malformed graph document: {exc}") from exc
    return g


def dumps_graph(g: ComputationGraph | CompiledGraph, **extra: Any) -> str:
    d = graph_to_dict(g)
    d.update(extra)
    return json.dumps(d, separators=(",", ":"))


def loads_graph(text: str) -> ComputationGraph:
    return graph_from_dict(json.loads(text))
