"""Language-preserving rewrite steps and canonical grammar forms."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

from ..errors import GrammarError, RewriteError
from ..grammar import Cfg, Production, SymbolId, build_cfg, nonterminal, reduce_grammar


class RewriteKind(str, Enum):
    INLINE = "inline"
    DELEGATION = "delegation"


@dataclass(frozen=True)
class RewriteStep:
    """Record of one applied rewrite."""

    kind: RewriteKind
    description: str
    source_hash: str
    result: Cfg


def canonical_form(g: Cfg) -> str:
    """Text that is identical for grammars equal up to nonterminal names and rule order.

    Nonterminals are renamed ``N0, N1, ...`` in first-use order from the start
    symbol, visiting each nonterminal's rules in a name-independent order.
    Distinct canonical forms do not imply distinct languages.
    """
    ids: dict[int, int] = {g.start.index: 0}
    order = [g.start.index]
    unknown = len(g.nonterminals)

    def key(rhs: tuple[SymbolId, ...]) -> tuple[tuple[str, object], ...]:
        return tuple(
            ("t", g.terminals[s.index]) if s.is_terminal else ("n", ids.get(s.index, unknown))
            for s in rhs
        )

    i = 0
    while i < len(order):
        a = order[i]
        i += 1
        for rhs in sorted((g.productions[p].rhs for p in g.productions_by_lhs[a]), key=key):
            for s in rhs:
                if s.is_nonterminal and s.index not in ids:
                    ids[s.index] = len(order)
                    order.append(s.index)
    for a in range(len(g.nonterminals)):
        if a not in ids:
            ids[a] = len(order)
            order.append(a)

    def render(s: SymbolId) -> str:
        return repr(g.terminals[s.index]) if s.is_terminal else f"N{ids[s.index]}"

    lines = ["%terminals " + " ".join(repr(t) for t in sorted(g.terminals))]
    for a in order:
        rules = (g.productions[p].rhs for p in g.productions_by_lhs[a])
        bodies = {" ".join(render(s) for s in rhs) for rhs in rules}
        lines.extend(f"N{ids[a]} -> {body or 'eps'}" for body in sorted(bodies))
    return "\n".join(lines)


def grammar_hash(g: Cfg) -> str:
    return hashlib.sha256(canonical_form(g).encode("utf-8")).hexdigest()


def _rebuild(g: Cfg, productions: list[Production]) -> Cfg:
    unique = list(dict.fromkeys(productions))
    return reduce_grammar(build_cfg(g.nonterminals, g.terminals, unique, start=g.start.index))


def _lookup(g: Cfg, name: str) -> int:
    try:
        return g.nonterminal_id(name)
    except GrammarError as e:
        raise RewriteError(str(e)) from e


def inline(g: Cfg, production: int, name: str, occurrence: int = 0) -> Cfg:
    """Replace the ``occurrence``-th use of ``name`` in a production by each of its alternatives.

    All other productions are kept; the result is reduced.

    Raises:
        RewriteError: ``name`` is the start symbol or does not occur there.
    """
    a = _lookup(g, name)
    if a == g.start.index:
        raise RewriteError(f"cannot inline the start symbol '{name}'")
    if not 0 <= production < len(g.productions):
        raise RewriteError(f"production index {production} out of range")
    target = g.productions[production]
    positions = [i for i, s in enumerate(target.rhs) if s == nonterminal(a)]
    if occurrence >= len(positions):
        raise RewriteError(
            f"'{g.format_production(production)}' has no occurrence {occurrence} of '{name}'"
        )
    pos = positions[occurrence]
    alternatives = [g.productions[q].rhs for q in g.productions_by_lhs[a]]

    rewritten: list[Production] = []
    for i, prod in enumerate(g.productions):
        if i != production:
            rewritten.append(prod)
            continue
        for alt in alternatives:
            rewritten.append(Production(prod.lhs, prod.rhs[:pos] + alt + prod.rhs[pos + 1 :]))
    return _rebuild(g, rewritten)


def _substitute(prod: Production, a: int, b: int) -> Production:
    def sub(s: SymbolId) -> SymbolId:
        return nonterminal(b) if s == nonterminal(a) else s

    return Production(sub(prod.lhs), tuple(sub(s) for s in prod.rhs))


def can_eliminate_delegation(g: Cfg, a: int, b: int) -> bool:
    """Whether ``a`` may be merged into ``b``.

    Holds when ``a`` is a plain delegation ``a -> b``, or when ``a`` and ``b``
    have the same rules once ``a`` is renamed to ``b``.
    """
    if a == b or a == g.start.index:
        return False
    a_rules = [g.productions[p] for p in g.productions_by_lhs[a]]
    if len(a_rules) == 1 and a_rules[0].rhs == (nonterminal(b),):
        return True
    a_set = {_substitute(p, a, b).rhs for p in a_rules}
    b_set = {_substitute(g.productions[p], a, b).rhs for p in g.productions_by_lhs[b]}
    return a_set == b_set


def eliminate_delegation(g: Cfg, source: str, target: str) -> Cfg:
    """Merge nonterminal ``source`` into ``target``.

    Raises:
        RewriteError: the merge precondition does not hold.
    """
    a, b = _lookup(g, source), _lookup(g, target)
    if not can_eliminate_delegation(g, a, b):
        raise RewriteError(f"'{source}' does not delegate to '{target}'")
    merged = [
        _substitute(prod, a, b) for prod in g.productions if prod.lhs != nonterminal(a)
    ]
    merged = [p for p in merged if p.rhs != (p.lhs,)]
    return _rebuild(g, merged)


def successors(g: Cfg) -> list[RewriteStep]:
    """Every single rewrite applicable to ``g``, in a deterministic order."""
    source = grammar_hash(g)
    steps: list[RewriteStep] = []
    for p, prod in enumerate(g.productions):
        seen: dict[int, int] = {}
        for s in prod.rhs:
            if not s.is_nonterminal or s.index == g.start.index:
                continue
            occurrence = seen.get(s.index, 0)
            seen[s.index] = occurrence + 1
            name = g.nonterminals[s.index]
            result = inline(g, p, name, occurrence)
            steps.append(
                RewriteStep(
                    RewriteKind.INLINE,
                    f"inline {name}#{occurrence} into '{g.format_production(p)}'",
                    source,
                    result,
                )
            )
    for a in range(len(g.nonterminals)):
        for b in range(len(g.nonterminals)):
            if can_eliminate_delegation(g, a, b):
                src, dst = g.nonterminals[a], g.nonterminals[b]
                steps.append(
                    RewriteStep(
                        RewriteKind.DELEGATION,
                        f"merge {src} into {dst}",
                        source,
                        eliminate_delegation(g, src, dst),
                    )
                )
    return steps
