"""Cost measurement and minimal-cost representative selection over a rewrite family."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..grammar import Cfg, kappa
from ..models import CostComponent
from ..perf import ProxyWeights, proxy, record_run
from ..tokens import Vocab
from .family import FamilyMember, RewriteFamily

logger = logging.getLogger(__name__)

DEFAULT_PRIORITY: tuple[CostComponent, ...] = (
    CostComponent.SAC,
    CostComponent.KAPPA,
    CostComponent.TOKENIZER,
)
DEFAULT_WEIGHTS = ProxyWeights.unit(
    "chart_packed_nodes", "chart_symbol_nodes", "engine_edges_touched"
)


@dataclass(frozen=True)
class CostVector:
    """Measured SAC proxy mean, static state count, and mean speculative steps per mask."""

    sac: float
    kappa: int
    tokenizer: float

    def component(self, c: CostComponent) -> float:
        return float(getattr(self, c.value))

    def key(self, priority: Sequence[CostComponent]) -> tuple[float, ...]:
        return tuple(self.component(c) for c in priority)

    def dominates(self, other: CostVector) -> bool:
        """Strictly smaller in every component."""
        return (
            self.sac < other.sac
            and self.kappa < other.kappa
            and self.tokenizer < other.tokenizer
        )


@dataclass(frozen=True)
class CostRow:
    member: FamilyMember
    cost: CostVector


@dataclass(frozen=True)
class Selection:
    winner: CostRow
    table: tuple[CostRow, ...]
    priority: tuple[CostComponent, ...]

    @property
    def grammar(self) -> Cfg:
        return self.winner.member.grammar


def measure_cost(
    g: Cfg,
    workload: Sequence[Sequence[str]],
    *,
    weights: ProxyWeights = DEFAULT_WEIGHTS,
    vocab: Vocab | None = None,
) -> CostVector:
    """Cost vector of ``g`` on a workload of terminal-name strings.

    SAC is the mean per-step proxy over all workload steps; the tokenizer
    overhead is the mean number of speculative terminal steps per mask.
    """
    vocab = vocab or Vocab.singleton(g)
    s_values: list[float] = []
    spec_steps: list[int] = []
    for names in workload:
        run = record_run(g, g.encode(names), vocab=vocab)
        s_values.extend(proxy(run.series, weights))
        spec_steps.extend(c.speculative_token_steps for c in run.series)
    return CostVector(
        sac=float(np.mean(s_values)) if s_values else 0.0,
        kappa=kappa(g),
        tokenizer=float(np.mean(spec_steps)) if spec_steps else 0.0,
    )


def is_pointwise_minimal(selection: Selection) -> bool:
    """No other member is strictly cheaper than the winner in every component."""
    return not any(row.cost.dominates(selection.winner.cost) for row in selection.table)


def select_min(
    family: RewriteFamily,
    workload: Sequence[Sequence[str]],
    priority: Sequence[CostComponent] = DEFAULT_PRIORITY,
    *,
    weights: ProxyWeights = DEFAULT_WEIGHTS,
    vocab: Vocab | None = None,
    max_workers: int | None = None,
) -> Selection:
    """Lexicographic minimum of the family under ``priority``.

    Ties are broken by grammar size, then canonical-form hash.
    """
    priority = tuple(priority)
    members = list(family.members)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        costs = list(
            pool.map(
                lambda m: measure_cost(m.grammar, workload, weights=weights, vocab=vocab), members
            )
        )
    table = tuple(CostRow(m, c) for m, c in zip(members, costs))
    winner = min(table, key=lambda r: (r.cost.key(priority), r.member.size, r.member.digest))
    logger.info(
        "selected %s with cost %s over %d members",
        winner.member.digest[:12],
        winner.cost,
        len(table),
    )
    return Selection(winner, table, priority)
