from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from graphveil.graph import CompiledGraph, OpKind, compile_graph, connect_nodes, create_graph, DelayClass
from graphveil.payload import Payload

# kinds that accept arbitrary bytes; Decompress is only placed after Compress
SAFE_KINDS = (
    OpKind.SORT, OpKind.SEARCH, OpKind.HASH, OpKind.ENCRYPT, OpKind.DECRYPT, OpKind.COMPRESS,
    OpKind.DOWNSAMPLE, OpKind.NORMALIZE, OpKind.SPLIT, OpKind.TRAIN, OpKind.EVALUATE,
)

_ACCEPTANCE = pytest.StashKey[list]()


def random_graph(rng: np.random.Generator, n_nodes: int | None = None, label: str = "rand",
                 delay: DelayClass = DelayClass.TOLERANT) -> CompiledGraph:
    """A random valid DAG built through the public constructors."""
    n = int(rng.integers(1, 9)) if n_nodes is None else n_nodes
    g = create_graph(label, delay)
    for i in range(n):
        if i == 0 or rng.random() < 0.25:
            deps: list[int] = []
        else:
            k = 1 if rng.random() < 0.75 else 2
            deps = sorted(set(rng.choice(i, size=min(k, i), replace=False).tolist()))
        kind = SAFE_KINDS[int(rng.integers(len(SAFE_KINDS)))]
        params: dict = {}
        if kind is OpKind.SPLIT:
            params["parts"] = int(rng.integers(1, 4))
        elif kind in (OpKind.ENCRYPT, OpKind.DECRYPT):
            params["key"] = int(rng.integers(1, 1 << 32))
        elif kind is OpKind.DOWNSAMPLE:
            params["k"] = int(rng.integers(1, 4))
        elif kind is OpKind.SEARCH:
            params["needle"] = int(rng.integers(0, 256))
        v = connect_nodes(g, kind, deps, params, inputs=int(rng.integers(1, 3)) if not deps else 1)
        if kind is OpKind.COMPRESS and rng.random() < 0.5 and i + 1 < n:
            connect_nodes(g, OpKind.DECOMPRESS, [v])
    return compile_graph(g)


def random_inputs(rng: np.random.Generator, cg: CompiledGraph, lo: int = 0, hi: int = 600) -> list[Payload]:
    out = []
    for _ in cg.input_slots:
        n = int(rng.integers(lo, hi + 1))
        runs = rng.integers(1, 6, size=max(n, 1))
        vals = rng.integers(0, 256, size=max(n, 1), dtype=np.uint8)
        out.append(Payload.of(np.repeat(vals, runs)[:n].tobytes()))
    return out


@st.composite
def graphs(draw, max_nodes: int = 8):
    """Hypothesis wrapper: a seed and size drive the numpy generator."""
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_nodes))
    rng = np.random.default_rng(seed)
    cg = random_graph(rng, n)
    return cg, random_inputs(rng, cg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """Print one acceptance line and keep it for the end-of-run summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
