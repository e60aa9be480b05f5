"""Context-free grammars: parsing, printing, analysis and reduction."""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .errors import EmptyLanguageError, GrammarError, GrammarSyntaxError, UndeclaredSymbolError

logger = logging.getLogger(__name__)

EPSILON_KEYWORD = "eps"
TERMINALS_DIRECTIVE = "%terminals"


class SymbolKind(str, Enum):
    """Kind of a grammar symbol."""

    TERMINAL = "terminal"
    NONTERMINAL = "nonterminal"


@dataclass(frozen=True, order=True)
class SymbolId:
    """A terminal or nonterminal, indexed densely within its kind."""

    kind: SymbolKind
    index: int

    @property
    def is_terminal(self) -> bool:
        return self.kind is SymbolKind.TERMINAL

    @property
    def is_nonterminal(self) -> bool:
        return self.kind is SymbolKind.NONTERMINAL


def terminal(index: int) -> SymbolId:
    return SymbolId(SymbolKind.TERMINAL, index)


def nonterminal(index: int) -> SymbolId:
    return SymbolId(SymbolKind.NONTERMINAL, index)


@dataclass(frozen=True)
class Production:
    """A rule ``lhs -> rhs``; an empty rhs encodes an epsilon rule."""

    lhs: SymbolId
    rhs: tuple[SymbolId, ...] = ()

    def __len__(self) -> int:
        return len(self.rhs)


@dataclass(frozen=True)
class Cfg:
    """An immutable context-free grammar.

    Layout invariants (enforced by :func:`build_cfg`, relied on by the printer):
    the start symbol is nonterminal 0 and productions are grouped by lhs in
    nonterminal order, keeping the relative order of alternatives.
    """

    nonterminals: tuple[str, ...]
    terminals: tuple[str, ...]
    productions: tuple[Production, ...]
    start: SymbolId
    reduced: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.nonterminals)) != len(self.nonterminals):
            raise GrammarError("duplicate nonterminal names")
        if len(set(self.terminals)) != len(self.terminals):
            raise GrammarError("duplicate terminal names")
        if not self.start.is_nonterminal or not 0 <= self.start.index < len(self.nonterminals):
            raise GrammarError("start symbol must be a declared nonterminal")
        for prod in self.productions:
            for sym in (prod.lhs, *prod.rhs):
                bound = len(self.terminals) if sym.is_terminal else len(self.nonterminals)
                if not 0 <= sym.index < bound:
                    raise GrammarError(f"production refers to unknown symbol {sym}")
            if not prod.lhs.is_nonterminal:
                raise GrammarError("production lhs must be a nonterminal")

    @cached_property
    def productions_by_lhs(self) -> tuple[tuple[int, ...], ...]:
        """Production indices grouped per nonterminal index."""
        groups: list[list[int]] = [[] for _ in self.nonterminals]
        for i, prod in enumerate(self.productions):
            groups[prod.lhs.index].append(i)
        return tuple(tuple(g) for g in groups)

    @cached_property
    def _terminal_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.terminals)}

    @cached_property
    def _nonterminal_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.nonterminals)}

    def terminal_id(self, name: str) -> int:
        try:
            return self._terminal_index[name]
        except KeyError:
            raise GrammarError(f"unknown terminal '{name}'") from None

    def nonterminal_id(self, name: str) -> int:
        try:
            return self._nonterminal_index[name]
        except KeyError:
            raise GrammarError(f"unknown nonterminal '{name}'") from None

    def symbol_name(self, sym: SymbolId) -> str:
        if sym.is_terminal:
            return self.terminals[sym.index]
        return self.nonterminals[sym.index]

    def format_production(self, index: int) -> str:
        prod = self.productions[index]
        body = " ".join(_format_symbol(self, s) for s in prod.rhs) or EPSILON_KEYWORD
        return f"{self.nonterminals[prod.lhs.index]} -> {body}"

    def encode(self, names: Iterable[str]) -> tuple[int, ...]:
        """Map terminal names to terminal indices."""
        return tuple(self.terminal_id(n) for n in names)

    def decode(self, word: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.terminals[a] for a in word)


def build_cfg(
    nonterminals: Sequence[str],
    terminals: Sequence[str],
    productions: Iterable[Production],
    start: int,
    reduced: bool = False,
) -> Cfg:
    """Build a Cfg in canonical layout (start first, productions grouped by lhs)."""
    order = [start] + [i for i in range(len(nonterminals)) if i != start]
    remap = {old: new for new, old in enumerate(order)}

    def move(sym: SymbolId) -> SymbolId:
        return nonterminal(remap[sym.index]) if sym.is_nonterminal else sym

    moved = [Production(move(p.lhs), tuple(move(s) for s in p.rhs)) for p in productions]
    moved.sort(key=lambda p: p.lhs.index)  # stable: alternatives keep their order
    return Cfg(
        nonterminals=tuple(nonterminals[i] for i in order),
        terminals=tuple(terminals),
        productions=tuple(moved),
        start=nonterminal(0),
        reduced=reduced,
    )


# --------------------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
    |(?P<comment>\#[^\n]*)
    |(?P<newline>\n)
    |(?P<arrow>->)
    |(?P<bar>\|)
    |(?P<semi>;)
    |(?P<terminal>'(?:[^'\\\n]|\\.)*')
    |(?P<directive>%[A-Za-z_]+)
    |(?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, column)
        kind = match.lastgroup or ""
        if kind == "newline":
            tokens.append(_Token("end", "\n", line, column))
            line += 1
            line_start = match.end()
        elif kind == "semi":
            tokens.append(_Token("end", ";", line, column))
        elif kind not in ("ws", "comment"):
            tokens.append(_Token(kind, match.group(), line, column))
        pos = match.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


def _unquote(raw: str) -> str:
    return re.sub(r"\\(.)", r"\1", raw[1:-1])


def _quote(name: str) -> str:
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _format_symbol(g: Cfg, sym: SymbolId) -> str:
    return _quote(g.terminals[sym.index]) if sym.is_terminal else g.nonterminals[sym.index]


def _split_statements(tokens: list[_Token]) -> list[list[_Token]]:
    statements: list[list[_Token]] = []
    current: list[_Token] = []
    for tok in tokens:
        if tok.kind == "end":
            if current:
                statements.append(current)
            current = []
        else:
            current.append(tok)
    return statements


def parse_grammar(text: str) -> Cfg:
    """Parse grammar source text.

    One rule per line (or separated by ``;``): ``NT -> alt1 | alt2``. Terminals are
    single-quoted, ``eps`` denotes the empty alternative, ``#`` starts a comment and
    the first lhs is the start symbol. Repeated definitions of a nonterminal are
    merged as alternation. An optional leading ``%terminals 'a' 'b'`` line fixes the
    terminal order.

    Raises:
        GrammarSyntaxError: malformed source (with line and column).
        UndeclaredSymbolError: a bare name on a right-hand side never defined as lhs.
    """
    declared_terminals: list[str] = []
    # (lhs name, alternatives as lists of tokens)
    rules: list[tuple[str, list[list[_Token]]]] = []
    lhs_order: list[str] = []

    for stmt in _split_statements(_tokenize(text)):
        head = stmt[0]
        if head.kind == "directive":
            if head.text != TERMINALS_DIRECTIVE:
                raise GrammarSyntaxError(f"unknown directive {head.text}", head.line, head.column)
            if rules:
                raise GrammarSyntaxError(
                    f"{TERMINALS_DIRECTIVE} must precede all rules", head.line, head.column
                )
            for tok in stmt[1:]:
                if tok.kind != "terminal":
                    raise GrammarSyntaxError(
                        "expected quoted terminal in directive", tok.line, tok.column
                    )
                name = _unquote(tok.text)
                if name in declared_terminals:
                    raise GrammarSyntaxError(
                        f"terminal {tok.text} declared twice", tok.line, tok.column
                    )
                declared_terminals.append(name)
            continue

        if head.kind != "ident":
            raise GrammarSyntaxError("expected nonterminal name", head.line, head.column)
        if head.text == EPSILON_KEYWORD:
            raise GrammarSyntaxError("'eps' is reserved", head.line, head.column)
        if len(stmt) < 2 or stmt[1].kind != "arrow":
            tok = stmt[1] if len(stmt) > 1 else head
            raise GrammarSyntaxError("expected '->'", tok.line, tok.column + len(head.text))

        alternatives: list[list[_Token]] = [[]]
        for tok in stmt[2:]:
            if tok.kind == "bar":
                if not alternatives[-1]:
                    raise GrammarSyntaxError("empty alternative (write eps)", tok.line, tok.column)
                alternatives.append([])
            elif tok.kind in ("ident", "terminal"):
                alternatives[-1].append(tok)
            else:
                raise GrammarSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)
        if not alternatives[-1]:
            last = stmt[-1]
            raise GrammarSyntaxError(
                "empty alternative (write eps)", last.line, last.column + len(last.text)
            )
        for alt in alternatives:
            eps = [t for t in alt if t.kind == "ident" and t.text == EPSILON_KEYWORD]
            if eps and len(alt) > 1:
                raise GrammarSyntaxError("'eps' must stand alone", eps[0].line, eps[0].column)

        if head.text not in lhs_order:
            lhs_order.append(head.text)
        rules.append((head.text, alternatives))

    if not rules:
        raise GrammarSyntaxError("grammar has no rules", 1, 1)

    nt_index = {name: i for i, name in enumerate(lhs_order)}
    terminals = list(declared_terminals)
    t_index = {name: i for i, name in enumerate(terminals)}
    grouped: list[list[Production]] = [[] for _ in lhs_order]
    for lhs, alternatives in rules:
        for alt in alternatives:
            rhs: list[SymbolId] = []
            for tok in alt:
                if tok.kind == "terminal":
                    name = _unquote(tok.text)
                    if name not in t_index:
                        t_index[name] = len(terminals)
                        terminals.append(name)
                    rhs.append(terminal(t_index[name]))
                elif tok.text != EPSILON_KEYWORD:
                    if tok.text not in nt_index:
                        raise UndeclaredSymbolError(tok.text, tok.line, tok.column)
                    rhs.append(nonterminal(nt_index[tok.text]))
            grouped[nt_index[lhs]].append(Production(nonterminal(nt_index[lhs]), tuple(rhs)))

    productions = [p for group in grouped for p in group]
    g = Cfg(
        nonterminals=tuple(lhs_order),
        terminals=tuple(terminals),
        productions=tuple(productions),
        start=nonterminal(0),
    )
    if _is_reduced(g):
        g = Cfg(g.nonterminals, g.terminals, g.productions, g.start, reduced=True)
    return g


def print_grammar(g: Cfg) -> str:
    """Serialize ``g`` so that ``parse_grammar(print_grammar(g)) == g``."""
    lines: list[str] = []
    appearance: list[int] = []
    for prod in g.productions:
        for sym in prod.rhs:
            if sym.is_terminal and sym.index not in appearance:
                appearance.append(sym.index)
    if appearance != list(range(len(g.terminals))):
        lines.append(" ".join([TERMINALS_DIRECTIVE, *(_quote(t) for t in g.terminals)]))
    for nt, group in enumerate(g.productions_by_lhs):
        if not group:
            continue
        bodies = []
        for i in group:
            rhs = g.productions[i].rhs
            bodies.append(" ".join(_format_symbol(g, s) for s in rhs) or EPSILON_KEYWORD)
        lines.append(f"{g.nonterminals[nt]} -> {' | '.join(bodies)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- analysis


def kappa(g: Cfg) -> int:
    """Compiled control-state count: ``1 + 2|N| + sum(|rhs| + 1)``."""
    return 1 + 2 * len(g.nonterminals) + sum(len(p) + 1 for p in g.productions)


def grammar_size(g: Cfg) -> int:
    """Total symbol count, each production counting its lhs."""
    return sum(len(p) + 1 for p in g.productions)


def productive_set(g: Cfg) -> frozenset[int]:
    """Nonterminals deriving at least one terminal string."""
    productive: set[int] = set()
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            if prod.lhs.index in productive:
                continue
            if all(s.is_terminal or s.index in productive for s in prod.rhs):
                productive.add(prod.lhs.index)
                changed = True
    return frozenset(productive)


def reachable_set(g: Cfg, productions: Iterable[Production] | None = None) -> frozenset[int]:
    """Nonterminals reachable from the start symbol."""
    prods = list(g.productions if productions is None else productions)
    by_lhs: dict[int, list[Production]] = {}
    for prod in prods:
        by_lhs.setdefault(prod.lhs.index, []).append(prod)
    seen = {g.start.index}
    stack = [g.start.index]
    while stack:
        nt = stack.pop()
        for prod in by_lhs.get(nt, ()):
            for sym in prod.rhs:
                if sym.is_nonterminal and sym.index not in seen:
                    seen.add(sym.index)
                    stack.append(sym.index)
    return frozenset(seen)


def nullable_set(g: Cfg) -> frozenset[int]:
    """Nonterminals deriving the empty string."""
    nullable: set[int] = set()
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            if prod.lhs.index in nullable:
                continue
            if all(s.is_nonterminal and s.index in nullable for s in prod.rhs):
                nullable.add(prod.lhs.index)
                changed = True
    return frozenset(nullable)


def min_yield_lengths(g: Cfg) -> tuple[float, ...]:
    """Shortest derivable terminal string length per nonterminal (inf if unproductive)."""
    best = [math.inf] * len(g.nonterminals)
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            total = sum(1 if s.is_terminal else best[s.index] for s in prod.rhs)
            if total < best[prod.lhs.index]:
                best[prod.lhs.index] = total
                changed = True
    return tuple(best)


def is_right_linear(g: Cfg) -> bool:
    """Every rhs is terminals followed by at most one trailing nonterminal."""
    for prod in g.productions:
        for sym in prod.rhs[:-1]:
            if sym.is_nonterminal:
                return False
    return True


def _is_reduced(g: Cfg) -> bool:
    productive = productive_set(g)
    if len(productive) != len(g.nonterminals):
        return False
    return len(reachable_set(g)) == len(g.nonterminals)


def reduce_grammar(g: Cfg) -> Cfg:
    """Remove unproductive, then unreachable, nonterminals.

    The terminal alphabet is kept intact. The result is flagged ``reduced``;
    reducing a reduced grammar returns it unchanged.

    Raises:
        EmptyLanguageError: the start symbol is unproductive.
    """
    if g.reduced:
        return g
    productive = productive_set(g)
    if g.start.index not in productive:
        raise EmptyLanguageError(
            f"start symbol '{g.nonterminals[g.start.index]}' derives no terminal string"
        )
    kept = [
        p
        for p in g.productions
        if p.lhs.index in productive
        and all(s.is_terminal or s.index in productive for s in p.rhs)
    ]
    reachable = reachable_set(g, kept)
    kept = [p for p in kept if p.lhs.index in reachable]

    survivors = [i for i in range(len(g.nonterminals)) if i in reachable]
    dropped = [g.nonterminals[i] for i in range(len(g.nonterminals)) if i not in reachable]
    if dropped:
        logger.debug("reduce_grammar removed nonterminals: %s", ", ".join(dropped))
    remap = {old: new for new, old in enumerate(survivors)}

    def move(sym: SymbolId) -> SymbolId:
        return nonterminal(remap[sym.index]) if sym.is_nonterminal else sym

    return build_cfg(
        [g.nonterminals[i] for i in survivors],
        g.terminals,
        [Production(move(p.lhs), tuple(move(s) for s in p.rhs)) for p in kept],
        start=remap[g.start.index],
        reduced=True,
    )
