"""Instrumentation counters shared by the engines."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class CounterVector:
    """Nonnegative work counters; additive across steps and hypotheses."""

    chart_symbol_nodes: int = 0
    chart_packed_nodes: int = 0
    engine_edges_touched: int = 0
    saturation_iterations: int = 0
    speculative_token_steps: int = 0
    bitset_slots_scanned: int = 0

    def __add__(self, other: CounterVector) -> CounterVector:
        return CounterVector(
            *(getattr(self, f.name) + getattr(other, f.name) for f in fields(self))
        )

    def as_dict(self) -> dict[str, int]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, int]) -> CounterVector:
        return cls(**{name: int(data.get(name, 0)) for name in COUNTER_NAMES})

    @classmethod
    def total(cls, vectors: list[CounterVector]) -> CounterVector:
        out = cls()
        for v in vectors:
            out = out + v
        return out


COUNTER_NAMES: tuple[str, ...] = tuple(f.name for f in fields(CounterVector))
