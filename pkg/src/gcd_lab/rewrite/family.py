"""Bounded rewrite families."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

from ..errors import RewriteError
from ..grammar import Cfg, grammar_size, kappa, reduce_grammar
from .steps import RewriteStep, grammar_hash, successors

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FamilyMember:
    """A grammar reached from the seed, tagged with the rewrites that produced it."""

    grammar: Cfg
    digest: str
    path: tuple[RewriteStep, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def kappa(self) -> int:
        return kappa(self.grammar)

    @property
    def size(self) -> int:
        return grammar_size(self.grammar)

    def describe(self) -> str:
        if not self.path:
            return "seed"
        return "; ".join(step.description for step in self.path)


@dataclass(frozen=True)
class RewriteFamily:
    """Grammars reachable from ``seed`` by at most ``budget`` rewrites, deduplicated.

    ``partial`` is set when the member cap stopped the enumeration early.
    """

    seed: Cfg
    budget: int
    members: tuple[FamilyMember, ...]
    partial: bool = False

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.members)

    @classmethod
    def of(cls, grammars: Iterable[Cfg]) -> RewriteFamily:
        """An explicit family of candidate grammars, each a zero-length path."""
        members: dict[str, FamilyMember] = {}
        for g in grammars:
            g = reduce_grammar(g)
            digest = grammar_hash(g)
            members.setdefault(digest, FamilyMember(g, digest))
        if not members:
            raise RewriteError("empty family")
        first = next(iter(members.values()))
        return cls(first.grammar, 0, tuple(members.values()))


def enumerate_family(
    g: Cfg, k: int, *, member_cap: int = 10_000, max_budget: int = 3
) -> RewriteFamily:
    """Breadth-first closure of ``g`` under at most ``k`` rewrites.

    Members are deduplicated by canonical form; the first path found to each
    canonical form is kept.

    Raises:
        RewriteError: ``k`` is negative or exceeds ``max_budget``.
    """
    if k < 0 or k > max_budget:
        raise RewriteError(f"budget {k} outside [0, {max_budget}]")
    seed = reduce_grammar(g)
    root = FamilyMember(seed, grammar_hash(seed))
    members: dict[str, FamilyMember] = {root.digest: root}
    frontier = [root]
    partial = False

    for depth in range(1, k + 1):
        next_frontier: list[FamilyMember] = []
        for member in frontier:
            for step in successors(member.grammar):
                digest = grammar_hash(step.result)
                if digest in members:
                    continue
                if len(members) >= member_cap:
                    partial = True
                    break
                child = FamilyMember(step.result, digest, member.path + (step,))
                members[digest] = child
                next_frontier.append(child)
            if partial:
                break
        logger.info("rewrite depth %d: %d new members", depth, len(next_frontier))
        if partial:
            logger.warning("member cap %d reached; family is partial", member_cap)
            break
        frontier = next_frontier

    return RewriteFamily(seed, k, tuple(members.values()), partial)
