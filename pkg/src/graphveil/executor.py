"""Graph execution, schedules and attacker-visible feature records.

The attacker observes one :class:`FeatureRecord` per computation: I/O counts
and physical (padded) byte sizes, the completion span from the graph's first
node start to its last node end, the summed busy time of its nodes, and the
peak modeled memory of any one node.
"""

from __future__ import annotations

import csv
import io as _io
import time
from collections.abc import Iterable, Sequence
from dataclasses import astuple, dataclass, field
from pathlib import Path

from graphveil import kernels, seeds
from graphveil.costmodel import ClockMode, NodeCost, Simulated, WallClock
from graphveil.errors import DivisionError, InputError, ScheduleError
from graphveil.graph import CompiledGraph, OpKind
from graphveil.ops import run_op
from graphveil.payload import Payload, pad_amount

RECORD_HEADER = ["label", "num_in", "num_out", "in_bytes", "out_bytes", "time_ms", "cpu_ms", "mem_bytes"]
SCHEDULE_HEADER = ["graph", "node", "worker", "start_ms", "end_ms"]


@dataclass(frozen=True)
class FeatureRecord:
    class_label: str
    num_inputs: int
    num_outputs: int
    total_input_bytes: int
    total_output_bytes: int
    completion_time_ms: float
    cpu_busy_ms: float
    peak_memory_bytes: float

    def to_row(self) -> list:
        return list(astuple(self))

    @classmethod
    def from_row(cls, row: Sequence[str]) -> FeatureRecord:
        return cls(row[0], int(row[1]), int(row[2]), int(row[3]), int(row[4]),
                   float(row[5]), float(row[6]), float(row[7]))


@dataclass(frozen=True)
class ScheduleEntry:
    graph: int
    node: int
    start_ms: float
    end_ms: float
    worker: int = 0


@dataclass
class Schedule:
    entries: list[ScheduleEntry] = field(default_factory=list)

    def for_graph(self, g: int) -> list[ScheduleEntry]:
        return [e for e in self.entries if e.graph == g]

    @property
    def makespan(self) -> float:
        if not self.entries:
            return 0.0
        return max(e.end_ms for e in self.entries) - min(e.start_ms for e in self.entries)

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCHEDULE_HEADER)
        for e in sorted(self.entries, key=lambda e: (e.start_ms, e.worker)):
            w.writerow([e.graph, e.node, e.worker, repr(e.start_ms), repr(e.end_ms)])
        return buf.getvalue()


@dataclass
class GraphIO:
    """Per-graph accounting gathered during execution."""

    num_inputs: int = 0
    num_outputs: int = 0
    in_bytes: int = 0
    out_bytes: int = 0
    busy_ms: dict[int, float] = field(default_factory=dict)
    mem_bytes: dict[int, float] = field(default_factory=dict)


@dataclass
class ExecutionResult:
    outputs: list[Payload]
    record: FeatureRecord
    schedule: Schedule


class GraphRun:
    """Execution state of one graph: produced payloads and I/O accounting.

    Padding directives are read from node params: a source node with
    ``pad_in.<port>`` pads that external input, a node with ``pad_out.<k>``
    pads its k-th output, both at level ``pad_level``. A node renumbered by
    the remodeler carries ``origin``, its id before renumbering, which keys
    its op seed and cost jitter.
    """

    def __init__(self, cg: CompiledGraph, inputs: Sequence[Payload], seed: int = 0):
        slots = cg.input_slots
        if len(inputs) != len(slots):
            raise InputError(f"graph needs {len(slots)} external inputs, got {len(inputs)}")
        self.cg = cg
        self.seed = seed
        self.values: dict[int, list[Payload]] = {}
        self.external: dict[int, list[Payload]] = {}
        self.io = GraphIO()
        for (v, port), p in zip(slots, inputs):
            p = self._maybe_pad(p, cg.nodes[v].params, f"pad_in.{port}", v, port)
            self.external.setdefault(v, []).append(p)
            self.io.num_inputs += 1
            self.io.in_bytes += p.physical_len

    def _maybe_pad(self, p: Payload, params: dict, key: str, node: int, idx: int) -> Payload:
        u = params.get(key)
        if u is None:
            return p
        amount = pad_amount(float(u), int(params.get("pad_level", 1)), p.logical_len)
        filler = kernels.xor_stream(bytes(amount), seeds.derive(self.seed, key, node, idx))
        return p.padded(filler)

    def node_inputs(self, v: int) -> list[Payload]:
        if v in self.external:
            return self.external[v]
        return [self.values[u][k] for u, k in self.cg.wiring[v]]

    def execute(self, v: int, clock: ClockMode) -> NodeCost:
        """Run node ``v``; its predecessors must already have run."""
        node = self.cg.nodes[v]
        ins = self.node_inputs(v)
        fake = node.kind is OpKind.FAKE
        origin = int(node.params.get("origin", v))
        if isinstance(clock, WallClock):
            t0, c0 = time.perf_counter(), time.thread_time()
            outs = run_op(node.kind, ins, node.params, rng_seed=origin, arity=node.declared_inputs)
            if fake:
                deadline = t0 + float(node.params.get("cost_ms", 0.0)) / 1000.0
                while time.perf_counter() < deadline:
                    pass
            duration = (time.perf_counter() - t0) * 1000.0
            busy = min(duration, (time.thread_time() - c0) * 1000.0)
            mem = float(sum(p.physical_len for p in ins) + sum(p.physical_len for p in outs))
            cost = NodeCost(duration, busy, mem)
        else:
            outs = run_op(node.kind, ins, node.params, rng_seed=origin, arity=node.declared_inputs)
            cost = clock.model.node_cost(
                node.kind,
                sum(p.logical_len for p in ins),
                sum(p.physical_len for p in ins),
                self.seed, origin,
                fixed_ms=float(node.params.get("cost_ms", 0.0)) if fake else None,
            )
        outs = [self._maybe_pad(p, node.params, f"pad_out.{k}", v, k) for k, p in enumerate(outs)]
        self.values[v] = outs
        self.io.busy_ms[v] = cost.busy_ms
        self.io.mem_bytes[v] = cost.mem_bytes
        return cost

    def outputs(self) -> list[Payload]:
        return [self.values[v][k] for v, k in self.cg.output_slots]

    def finish(self) -> list[Payload]:
        outs = self.outputs()
        self.io.num_outputs = len(outs)
        self.io.out_bytes = sum(p.physical_len for p in outs)
        return outs


def default_clock() -> Simulated:
    global _DEFAULT_CLOCK
    if _DEFAULT_CLOCK is None:
        _DEFAULT_CLOCK = Simulated()
    return _DEFAULT_CLOCK


_DEFAULT_CLOCK: Simulated | None = None


def execute_single(
    cg: CompiledGraph,
    inputs: Sequence[Payload],
    clock: ClockMode | None = None,
    seed: int = 0,
) -> ExecutionResult:
    """Run ``cg`` in topological order on one worker.

    Raises:
        InputError: ``inputs`` does not match the graph's external input slots.
    """
    clock = clock or default_clock()
    run = GraphRun(cg, inputs, seed)
    schedule = Schedule()
    wall = isinstance(clock, WallClock)
    epoch = time.perf_counter()
    now = 0.0
    for v in cg.topo_order:
        if wall:
            start = (time.perf_counter() - epoch) * 1000.0
            run.execute(v, clock)
            end = (time.perf_counter() - epoch) * 1000.0
        else:
            start = now
            end = now + run.execute(v, clock).duration_ms
        now = end
        schedule.entries.append(ScheduleEntry(0, v, start, end, 0))
    outputs = run.finish()
    record = collect_features(schedule, [cg], [run.io])[0]
    return ExecutionResult(outputs, record, schedule)


def collect_features(
    schedule: Schedule,
    batch: Sequence[CompiledGraph],
    io: Sequence[GraphIO],
) -> list[FeatureRecord]:
    """One record per graph of ``batch``.

    The completion span runs from the graph's first node start to its last
    node end, so foreign nodes interleaved between them count toward it.
    """
    first = [float("inf")] * len(batch)
    last = [float("-inf")] * len(batch)
    for e in schedule.entries:
        first[e.graph] = min(first[e.graph], e.start_ms)
        last[e.graph] = max(last[e.graph], e.end_ms)
    records = []
    for g, (cg, acc) in enumerate(zip(batch, io)):
        span = last[g] - first[g] if last[g] >= first[g] else 0.0
        busy = sum(acc.busy_ms[v] for v in sorted(acc.busy_ms))
        mem = max(acc.mem_bytes.values(), default=0.0)
        records.append(FeatureRecord(cg.class_label, acc.num_inputs, acc.num_outputs,
                                     acc.in_bytes, acc.out_bytes, span, busy, mem))
    return records


def normalized_overheads(anon: FeatureRecord, base: FeatureRecord) -> tuple[float, float, float]:
    """(time, cpu, memory) of ``anon`` relative to the unanonymized ``base``."""
    pairs = [(anon.completion_time_ms, base.completion_time_ms),
             (anon.cpu_busy_ms, base.cpu_busy_ms),
             (anon.peak_memory_bytes, base.peak_memory_bytes)]
    if any(b <= 0 for _, b in pairs):
        raise DivisionError("baseline record has a zero field")
    return tuple(a / b for a, b in pairs)  # type: ignore[return-value]


def validate_schedule(schedule: Schedule, batch: Sequence[CompiledGraph], tol: float = 1e-9) -> None:
    """Check exactly-once execution, dependency order and per-worker exclusivity.

    Raises:
        ScheduleError: describing the first violation found.
    """
    seen: dict[tuple[int, int], ScheduleEntry] = {}
    for e in schedule.entries:
        if not 0 <= e.graph < len(batch) or not 0 <= e.node < len(batch[e.graph].nodes):
            raise ScheduleError(f"entry {e} references an unknown node")
        if e.end_ms < e.start_ms:
            raise ScheduleError(f"entry {e} ends before it starts")
        key = (e.graph, e.node)
        if key in seen:
            raise ScheduleError(f"node {key} executed twice")
        seen[key] = e
    for g, cg in enumerate(batch):
        for v in range(len(cg.nodes)):
            if (g, v) not in seen:
                raise ScheduleError(f"node {(g, v)} never executed")
        for u, v, _ in cg.graph.edges:
            if seen[(g, v)].start_ms < seen[(g, u)].end_ms - tol:
                raise ScheduleError(f"graph {g}: node {v} starts before predecessor {u} ends")
    by_worker: dict[int, list[ScheduleEntry]] = {}
    for e in schedule.entries:
        by_worker.setdefault(e.worker, []).append(e)
    for w, entries in by_worker.items():
        entries.sort(key=lambda e: (e.start_ms, e.end_ms))
        for a, b in zip(entries, entries[1:]):
            if b.start_ms < a.end_ms - tol:
                raise ScheduleError(f"worker {w}: entries {a} and {b} overlap")


def records_to_csv(records: Iterable[FeatureRecord]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        row = r.to_row()
        w.writerow(row[:5] + [repr(float(x)) for x in row[5:]])
    return buf.getvalue()


def write_records(path: str | Path, records: Iterable[FeatureRecord]) -> None:
    Path(path).write_text(records_to_csv(records))


def read_records(path: str | Path) -> list[FeatureRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RECORD_HEADER:
        raise InputError(f"{path}: not a feature-record CSV")
    return [FeatureRecord.from_row(r) for r in rows[1:]]
