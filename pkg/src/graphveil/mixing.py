"""Mixing: interleaved execution of a batch of independent graphs.

Every scheduling decision picks a graph with probability proportional to its
weight among graphs that have a ready node, then runs that graph's lowest-id
ready node. Delay-sensitive graphs get larger weights and so tend to finish
earlier.
"""

from __future__ import annotations

import bisect
import heapq
import threading
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from graphveil import kernels
from graphveil.costmodel import ClockMode, WallClock
from graphveil.errors import ExhaustedError, InvalidArgumentError
from graphveil.executor import (
    FeatureRecord, GraphRun, Schedule, ScheduleEntry, collect_features, default_clock,
)
from graphveil.graph import CompiledGraph
from graphveil.payload import Payload
from graphveil.remodel import default_weight

DEFAULT_WORKERS = 4


@dataclass
class MixBatch:
    graphs: list[CompiledGraph]
    inputs: list[list[Payload]]
    weights: list[float] | None = None
    seed: int = 0
    run_seeds: list[int] | None = None

    def __post_init__(self):
        if not self.graphs:
            raise InvalidArgumentError("a mix batch needs at least one graph")
        if len(self.inputs) != len(self.graphs):
            raise InvalidArgumentError("one input set per graph is required")
        if self.weights is None:
            self.weights = [default_weight(g.delay_class) for g in self.graphs]
        if len(self.weights) != len(self.graphs) or any(w <= 0 for w in self.weights):
            raise InvalidArgumentError("weights must be positive, one per graph")
        if self.run_seeds is None:
            self.run_seeds = [0] * len(self.graphs)

    def __len__(self):
        return len(self.graphs)


@dataclass
class MixResult:
    outputs: list[list[Payload]]
    records: list[FeatureRecord]
    schedule: Schedule
    decision_ns: list[int] = field(default_factory=list)
    picks: list[int] = field(default_factory=list)


def pick_next(frontiers: Sequence[Sequence[int]], weights: Sequence[float],
              rng: np.random.Generator) -> tuple[int, int]:
    """Weighted-random graph choice, then that graph's lowest-id ready node.

    Raises:
        ExhaustedError: every frontier is empty.
    """
    return _pick(frontiers, weights, rng.random())


def _pick(frontiers: Sequence[Sequence[int]], weights: Sequence[float], u: float) -> tuple[int, int]:
    # pick_next with the uniform draw supplied by the caller
    i = kernels.pick_index(frontiers, weights, u)
    if i < 0:
        raise ExhaustedError("no ready node in any graph")
    return i, frontiers[i][0]


def _draws(rng: np.random.Generator, n: int) -> tuple[list[float], int]:
    # One block of uniforms per batch: the same stream as n rng.random()
    # calls, at a fraction of the per-call overhead.
    t0 = time.perf_counter_ns()
    us = rng.random(n).tolist()
    return us, time.perf_counter_ns() - t0


def _charge(decision_ns: list[int], picks: list[int], overhead_ns: int) -> None:
    total = sum(picks)
    for g, k in enumerate(picks):
        decision_ns[g] += overhead_ns * k // total if total else 0


class _Tracker:
    """Ready-set bookkeeping for one graph."""

    __slots__ = ("cg", "waiting", "ready", "remaining")

    def __init__(self, cg: CompiledGraph):
        self.cg = cg
        self.waiting = list(cg.in_degree)
        self.ready = [v for v, d in enumerate(self.waiting) if d == 0]
        self.remaining = len(cg.nodes)

    def take(self, v: int) -> None:
        self.ready.remove(v)

    def complete(self, v: int) -> None:
        self.remaining -= 1
        for s in self.cg.successors[v]:
            self.waiting[s] -= 1
            if self.waiting[s] == 0:
                bisect.insort(self.ready, s)


def _start(batch: MixBatch):
    runs = [GraphRun(cg, ins, s) for cg, ins, s in zip(batch.graphs, batch.inputs, batch.run_seeds)]
    trackers = [_Tracker(cg) for cg in batch.graphs]
    return runs, trackers


def _finish(batch: MixBatch, runs, schedule, decision_ns, picks) -> MixResult:
    outputs = [r.finish() for r in runs]
    records = collect_features(schedule, batch.graphs, [r.io for r in runs])
    return MixResult(outputs, records, schedule, decision_ns, picks)


def mix_sequential(batch: MixBatch, clock: ClockMode | None = None) -> MixResult:
    """Run the whole batch on one worker, one weighted pick per node."""
    clock = clock or default_clock()
    wall = isinstance(clock, WallClock)
    rng = np.random.default_rng(batch.seed)
    runs, trackers = _start(batch)
    frontiers = [t.ready for t in trackers]
    weights = batch.weights
    schedule = Schedule()
    decision_ns = [0] * len(batch)
    picks = [0] * len(batch)
    left = sum(len(cg.nodes) for cg in batch.graphs)
    us, draw_ns = _draws(rng, left)
    epoch = time.perf_counter()
    now = 0.0
    while left:
        t0 = time.perf_counter_ns()
        g, v = _pick(frontiers, weights, us[len(us) - left])
        decision_ns[g] += time.perf_counter_ns() - t0
        picks[g] += 1
        trackers[g].take(v)
        if wall:
            start = (time.perf_counter() - epoch) * 1000.0
            runs[g].execute(v, clock)
            end = (time.perf_counter() - epoch) * 1000.0
        else:
            start = now
            end = now + runs[g].execute(v, clock).duration_ms
        now = end
        schedule.entries.append(ScheduleEntry(g, v, start, end, 0))
        trackers[g].complete(v)
        left -= 1
    _charge(decision_ns, picks, draw_ns)
    return _finish(batch, runs, schedule, decision_ns, picks)


def mix_parallel(batch: MixBatch, workers: int = DEFAULT_WORKERS,
                 clock: ClockMode | None = None) -> MixResult:
    """Run the batch on ``workers`` workers sharing one guarded frontier.

    With a simulated clock this is a deterministic discrete-event run: the
    worker with the earliest free time picks next among nodes whose
    predecessors have finished by then, and idles until the next completion
    if none is ready. With the wall clock, real threads do the same under a
    lock.
    """
    if workers < 1:
        raise InvalidArgumentError("workers must be >= 1")
    clock = clock or default_clock()
    if isinstance(clock, WallClock):
        return _mix_threads(batch, workers, clock)

    rng = np.random.default_rng(batch.seed)
    runs, trackers = _start(batch)
    frontiers = [t.ready for t in trackers]
    weights = batch.weights
    schedule = Schedule()
    decision_ns = [0] * len(batch)
    picks = [0] * len(batch)
    to_start = sum(len(cg.nodes) for cg in batch.graphs)
    us, draw_ns = _draws(rng, to_start)
    avail = [0.0] * workers
    pending: list[tuple[float, int, int, int]] = []
    seq = 0
    while to_start:
        w = min(range(workers), key=avail.__getitem__)
        t = avail[w]
        while pending and pending[0][0] <= t:
            _, _, g, v = heapq.heappop(pending)
            trackers[g].complete(v)
        if not any(frontiers):
            avail[w] = pending[0][0]
            continue
        t0 = time.perf_counter_ns()
        g, v = _pick(frontiers, weights, us[len(us) - to_start])
        decision_ns[g] += time.perf_counter_ns() - t0
        picks[g] += 1
        trackers[g].take(v)
        end = t + runs[g].execute(v, clock).duration_ms
        schedule.entries.append(ScheduleEntry(g, v, t, end, w))
        heapq.heappush(pending, (end, seq, g, v))
        seq += 1
        avail[w] = end
        to_start -= 1
    _charge(decision_ns, picks, draw_ns)
    return _finish(batch, runs, schedule, decision_ns, picks)


def _mix_threads(batch: MixBatch, workers: int, clock: WallClock) -> MixResult:
    rng = np.random.default_rng(batch.seed)
    runs, trackers = _start(batch)
    frontiers = [t.ready for t in trackers]
    schedule = Schedule()
    decision_ns = [0] * len(batch)
    picks = [0] * len(batch)
    state = {"to_start": sum(len(cg.nodes) for cg in batch.graphs)}
    cond = threading.Condition()
    errors: list[BaseException] = []
    epoch = time.perf_counter()

    def loop(w: int):
        while True:
            with cond:
                while state["to_start"] and not any(frontiers) and not errors:
                    cond.wait()
                if not state["to_start"] or errors:
                    return
                t0 = time.perf_counter_ns()
                g, v = pick_next(frontiers, batch.weights, rng)
                decision_ns[g] += time.perf_counter_ns() - t0
                picks[g] += 1
                trackers[g].take(v)
                state["to_start"] -= 1
            try:
                start = (time.perf_counter() - epoch) * 1000.0
                runs[g].execute(v, clock)
                end = (time.perf_counter() - epoch) * 1000.0
            except BaseException as exc:  # surfaced after join
                with cond:
                    errors.append(exc)
                    cond.notify_all()
                return
            with cond:
                schedule.entries.append(ScheduleEntry(g, v, start, end, w))
                trackers[g].complete(v)
                cond.notify_all()

    threads = [threading.Thread(target=loop, args=(w,), daemon=True) for w in range(workers)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]
    schedule.entries.sort(key=lambda e: (e.start_ms, e.worker))
    return _finish(batch, runs, schedule, decision_ns, picks)


def anonymization_cost(result: MixResult) -> list[float]:
    """Wall-clock ms of scheduling decisions attributed to each graph."""
    return [ns / 1e6 for ns in result.decision_ns]
