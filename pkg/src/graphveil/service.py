"""A small TCP engine: receive a graph, anonymize and run it, return the outputs.

Wire format: every message is one frame, a 4-byte big-endian length followed
by that many bytes of UTF-8 JSON. A connection carries exactly one request
frame and one response frame.

Request::

    {"graph": <graph JSON object>,
     "inputs": [{"data": <base64>, "logical_len": <int>}, ...],
     "plan": <AnonymizationPlan JSON object>}

Response::

    {"status": "ok" | "error", "message": <str>,
     "outputs": [{"data": <base64>, "logical_len": <int>}, ...],
     "timing": {"anonymize_ms": ..., "execute_ms": ..., "batch_size": ...}}

Mixing and hybrid requests wait in a shared queue until ``batch_size``
compatible requests have arrived or the batch timeout expires; whatever has
accumulated by then runs as one batch. A request left alone runs with B=1,
which is flagged as ``"fallback": true`` in its timing.
"""

from __future__ import annotations

import base64
import json
import logging
import socket
import socketserver
import struct
import threading
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from graphveil import seeds
from graphveil.costmodel import ClockMode, Simulated, WallClock
from graphveil.errors import ConfigError, FormatError, GraphVeilError
from graphveil.executor import execute_single
from graphveil.graph import CompiledGraph, compile_graph, graph_from_dict, graph_to_dict
from graphveil.hybrid import anonymize_hybrid
from graphveil.mixing import MixBatch, mix_parallel, mix_sequential
from graphveil.payload import Payload
from graphveil.remodel import AnonymizationPlan, Mode, anonymize_remodel, strip_outputs

log = logging.getLogger(__name__)

HEADER = struct.Struct(">I")
DEFAULT_MAX_FRAME = 64 * 1024 * 1024
DEFAULT_BIND = "127.0.0.1:7878"


@dataclass(frozen=True)
class ServiceConfig:
    bind: str = DEFAULT_BIND
    max_frame: int = DEFAULT_MAX_FRAME
    batch_timeout_ms: float = 100.0
    clock: str = "sim"
    socket_timeout_s: float = 30.0

    def __post_init__(self):
        if self.max_frame < 1:
            raise ConfigError("max_frame must be positive")
        if self.batch_timeout_ms < 0:
            raise ConfigError("batch_timeout_ms must be >= 0")
        if self.clock not in ("sim", "wall"):
            raise ConfigError(f"clock must be 'sim' or 'wall', got {self.clock!r}")
        parse_bind(self.bind)

    def clock_mode(self) -> ClockMode:
        return WallClock() if self.clock == "wall" else Simulated()


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"bind address must look like host:port, got {bind!r}")
    return host or "0.0.0.0", int(port)


# --- framing ------------------------------------------------------------

class FrameTooLarge(FormatError):
    def __init__(self, size: int, limit: int):
        self.size = size
        super().__init__(f"frame of {size} bytes exceeds the {limit}-byte limit")


def encode_frame(obj: Any) -> bytes:
    body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(len(body)) + body


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise FormatError(f"connection closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket, max_frame: int = DEFAULT_MAX_FRAME) -> Any:
    """Read one frame and decode its JSON body.

    Raises:
        FrameTooLarge: the announced length is over ``max_frame``; the body
            is left unread.
        FormatError: short read, bad UTF-8 or bad JSON.
    """
    (size,) = HEADER.unpack(_recv_exact(sock, HEADER.size))
    if size > max_frame:
        raise FrameTooLarge(size, max_frame)
    body = _recv_exact(sock, size)
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"frame is not UTF-8 JSON: {exc}") from exc


def write_frame(sock: socket.socket, obj: Any) -> None:
    sock.sendall(encode_frame(obj))


# --- messages -----------------------------------------------------------

def encode_payload(p: Payload) -> dict[str, Any]:
    return {"data": base64.b64encode(p.data).decode("ascii"), "logical_len": p.logical_len}


def decode_payload(d: Any) -> Payload:
    if not isinstance(d, dict) or "data" not in d:
        raise FormatError("payload must be an object with 'data'")
    try:
        data = base64.b64decode(d["data"], validate=True)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"payload data is not base64: {exc}") from exc
    return Payload(data, int(d.get("logical_len", len(data))))


@dataclass
class Request:
    graph: CompiledGraph
    inputs: list[Payload]
    plan: AnonymizationPlan

    @classmethod
    def from_json(cls, obj: Any) -> Request:
        """Validate a decoded request frame.

        Raises:
            FormatError: missing or mistyped fields.
            CycleError: the graph is not a DAG.
        """
        if not isinstance(obj, dict):
            raise FormatError("request must be a JSON object")
        for key in ("graph", "inputs"):
            if key not in obj:
                raise FormatError(f"request lacks {key!r}")
        if not isinstance(obj["inputs"], list):
            raise FormatError("'inputs' must be a list")
        try:
            g = graph_from_dict(obj["graph"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed graph: {exc}") from exc
        plan = obj.get("plan") or {}
        if not isinstance(plan, dict):
            raise FormatError("'plan' must be an object")
        return cls(compile_graph(g), [decode_payload(p) for p in obj["inputs"]],
                   AnonymizationPlan.from_dict(plan))


def ok_response(outputs: Sequence[Payload], timing: dict[str, Any]) -> dict[str, Any]:
    return {"status": "ok", "message": "", "outputs": [encode_payload(p) for p in outputs], "timing": timing}


def error_response(message: str) -> dict[str, Any]:
    return {"status": "error", "message": message, "outputs": [], "timing": {}}


# --- batching -----------------------------------------------------------

@dataclass
class _Pending:
    request: Request
    arrived: float
    done: threading.Event = field(default_factory=threading.Event)
    response: dict[str, Any] | None = None


def _batch_key(plan: AnonymizationPlan) -> tuple:
    hybrid = plan.mode is Mode.HYBRID
    return (plan.mode, plan.batch_size, plan.parallel, plan.workers,
            plan.level if hybrid else 0, plan.mask if hybrid else None)


class BatchQueue:
    """Collects compatible mixing/hybrid requests into batches.

    The handler whose arrival completes a batch runs it. Otherwise the
    oldest waiter runs whatever has gathered once the timeout elapses.
    """

    def __init__(self, timeout_ms: float, clock: ClockMode):
        self.timeout_s = timeout_ms / 1000.0
        self.clock = clock
        self._lock = threading.Lock()
        self._groups: dict[tuple, list[_Pending]] = {}
        self._counter = 0

    def submit(self, req: Request) -> dict[str, Any]:
        me = _Pending(req, time.monotonic())
        key = _batch_key(req.plan)
        with self._lock:
            group = self._groups.setdefault(key, [])
            group.append(me)
            full = len(group) >= req.plan.batch_size
            if full:
                del self._groups[key]
        if full:
            self._run(group)
            return me.response  # type: ignore[return-value]
        if not me.done.wait(max(0.0, group[0].arrived + self.timeout_s - time.monotonic())):
            with self._lock:
                taken = self._groups.get(key) is group and group[0] is me
                if taken:
                    del self._groups[key]
            if taken:
                self._run(group)
            else:
                me.done.wait()  # the oldest waiter or a completer runs it
        return me.response  # type: ignore[return-value]

    def _run(self, group: list[_Pending]) -> None:
        with self._lock:
            self._counter += 1
            batch_id = self._counter
        try:
            responses = run_batch([p.request for p in group], self.clock, batch_id)
        except GraphVeilError as exc:
            responses = [error_response(str(exc))] * len(group)
        except Exception as exc:  # never leave waiters hanging
            log.exception("batch %d failed", batch_id)
            responses = [error_response(f"internal error: {exc}")] * len(group)
        for p, r in zip(group, responses):
            p.response = r
            p.done.set()


def run_batch(requests: Sequence[Request], clock: ClockMode, batch_id: int = 0) -> list[dict[str, Any]]:
    """Mix (or hybrid-anonymize) ``requests`` together and build their responses."""
    plan = requests[0].plan
    graphs = [r.graph for r in requests]
    inputs = [r.inputs for r in requests]
    weights = [r.plan.weight_for(g.delay_class) for r, g in zip(requests, graphs)]
    seed = seeds.derive(plan.seed, "service", batch_id)
    n = len(requests)
    t0 = time.perf_counter()
    if plan.mode is Mode.HYBRID:
        res = anonymize_hybrid(graphs, inputs, plan.level, plan.mask, plan.parallel, plan.workers,
                               seed, clock, weights)
        outputs, anon_ms = res.outputs, res.anonymize_ms
    else:
        batch = MixBatch(graphs, [list(x) for x in inputs], weights, seed)
        mixed = mix_parallel(batch, plan.workers, clock) if plan.parallel and plan.workers > 1 \
            else mix_sequential(batch, clock)
        outputs, anon_ms = mixed.outputs, [ns / 1e6 for ns in mixed.decision_ns]
    exec_ms = (time.perf_counter() - t0) * 1000.0 - sum(anon_ms)
    return [ok_response(out, {"anonymize_ms": a, "execute_ms": max(0.0, exec_ms), "batch_size": n,
                              "fallback": n < plan.batch_size})
            for out, a in zip(outputs, anon_ms)]


def run_single(req: Request, clock: ClockMode) -> dict[str, Any]:
    plan = req.plan
    t0 = time.perf_counter()
    anon = anonymize_remodel(req.graph, plan.level, plan.mask, plan.seed)
    t1 = time.perf_counter()
    res = execute_single(anon.graph, req.inputs, clock, plan.seed)
    outputs = strip_outputs(res.outputs, anon.strip_amounts(res.outputs))
    t2 = time.perf_counter()
    return ok_response(outputs, {"anonymize_ms": (t1 - t0) * 1000.0, "execute_ms": (t2 - t1) * 1000.0,
                                 "batch_size": 1, "fallback": False})


class Engine:
    """Request processing, independent of the transport."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.clock = self.config.clock_mode()
        self.queue = BatchQueue(self.config.batch_timeout_ms, self.clock)

    def handle(self, obj: Any) -> dict[str, Any]:
        try:
            req = Request.from_json(obj)
            if req.plan.mode is Mode.REMODELING:
                return run_single(req, self.clock)
            return self.queue.submit(req)
        except GraphVeilError as exc:
            return error_response(str(exc))


# --- transport ----------------------------------------------------------

class _Handler(socketserver.BaseRequestHandler):
    server: EngineServer

    def handle(self) -> None:
        sock: socket.socket = self.request
        sock.settimeout(self.server.engine.config.socket_timeout_s)
        try:
            try:
                obj = read_frame(sock, self.server.engine.config.max_frame)
            except FormatError as exc:
                write_frame(sock, error_response(str(exc)))
                return
            write_frame(sock, self.server.engine.handle(obj))
        except OSError as exc:
            log.warning("connection from %s dropped: %s", self.client_address, exc)


class EngineServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, config: ServiceConfig):
        self.engine = Engine(config)
        super().__init__(parse_bind(config.bind), _Handler)

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def make_server(config: ServiceConfig | None = None) -> EngineServer:
    """Bind without serving; use port 0 in ``config.bind`` for an ephemeral port."""
    return EngineServer(config or ServiceConfig())


def serve(bind: str | None = None, config: ServiceConfig | None = None) -> None:
    """Serve until interrupted."""
    config = config or ServiceConfig()
    if bind is not None:
        config = ServiceConfig(bind, config.max_frame, config.batch_timeout_ms, config.clock,
                               config.socket_timeout_s)
    with make_server(config) as server:
        log.info("listening on %s", server.address)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


# --- client -------------------------------------------------------------

def call(address: str, message: Any, timeout: float = 30.0) -> dict[str, Any]:
    """Send one request object and return the decoded response."""
    host, port = parse_bind(address)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        write_frame(sock, message)
        return read_frame(sock, DEFAULT_MAX_FRAME)


def make_request(graph: CompiledGraph | dict[str, Any], inputs: Sequence[Payload],
                 plan: AnonymizationPlan | None = None) -> dict[str, Any]:
    g = graph if isinstance(graph, dict) else graph_to_dict(graph)
    return {"graph": g, "inputs": [encode_payload(p) for p in inputs],
            "plan": (plan or AnonymizationPlan()).to_dict()}


def decode_outputs(response: dict[str, Any]) -> list[Payload]:
    return [decode_payload(p) for p in response.get("outputs", [])]
