"""Time sources: a seeded per-kind cost model, or the wall clock."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from graphveil import seeds
from graphveil.errors import ConfigError
from graphveil.graph import Custom, Kind

_DEFAULT_FILE = "cost_model.json"


@dataclass(frozen=True)
class KindCost:
    """Linear cost of one operation kind.

    time_ms = a + b * logical input bytes; peak memory = c + d * physical
    input bytes; busy time = cpu * time.
    """

    a: float
    b: float
    cpu: float
    c: float
    d: float

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ConfigError("cost coefficients must be non-negative")
        if not 0 < self.cpu <= 1:
            raise ConfigError("cpu fraction must lie in (0, 1]")


@dataclass(frozen=True)
class NodeCost:
    duration_ms: float
    busy_ms: float
    mem_bytes: float


@dataclass(frozen=True)
class CostModel:
    kinds: dict[str, KindCost]
    time_jitter: float = 0.0
    cpu_jitter: float = 0.0
    reference_bytes: int = 4096

    def entry(self, kind: Kind) -> KindCost:
        name = "Custom" if isinstance(kind, Custom) else kind.value
        try:
            return self.kinds[name]
        except KeyError:
            raise ConfigError(f"cost model has no entry for {name}") from None

    def nominal_ms(self, kind: Kind, logical_bytes: int | None = None) -> float:
        """Jitter-free modeled duration, at ``reference_bytes`` by default."""
        k = self.entry(kind)
        n = self.reference_bytes if logical_bytes is None else logical_bytes
        return k.a + k.b * n

    def node_cost(self, kind: Kind, logical_in: int, physical_in: int,
                  seed: int, node: int, fixed_ms: float | None = None) -> NodeCost:
        """Cost of one node run; jitter depends only on ``(seed, node)``.

        ``fixed_ms`` overrides the modeled duration (used by Fake nodes,
        which carry their own cost and no jitter).
        """
        k = self.entry(kind)
        if fixed_ms is not None:
            duration = fixed_ms
            cpu = k.cpu
        else:
            duration = (k.a + k.b * logical_in)
            if self.time_jitter:
                duration *= math.exp(self.time_jitter * seeds.normal(seed, node, "t"))
            cpu = k.cpu
            if self.cpu_jitter:
                cpu = min(1.0, cpu * math.exp(self.cpu_jitter * seeds.normal(seed, node, "c")))
        return NodeCost(duration, duration * cpu, k.c + k.d * physical_in)

    @classmethod
    def from_dict(cls, d: dict) -> CostModel:
        try:
            kinds = {name: KindCost(**v) for name, v in d["kinds"].items()}
            return cls(kinds, float(d.get("time_jitter", 0.0)), float(d.get("cpu_jitter", 0.0)),
                       int(d.get("reference_bytes", 4096)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed cost model: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> CostModel:
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> CostModel:
        """The packaged model; loaded once and shared."""
        return _packaged_model()


@functools.lru_cache(maxsize=1)
def _packaged_model() -> CostModel:
    text = resources.files("graphveil.data").joinpath(_DEFAULT_FILE).read_text()
    return CostModel.from_dict(json.loads(text))


@dataclass(frozen=True)
class Simulated:
    """Virtual time from a cost model; deterministic given the run seed."""

    model: CostModel = field(default_factory=CostModel.default)


@dataclass(frozen=True)
class WallClock:
    """Measured time. Fake nodes spin for their ``cost_ms``."""


ClockMode = Simulated | WallClock
