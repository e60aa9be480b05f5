"""Earley recognition, incremental packed charts and exact parse-tree counting."""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

from .errors import FastPathError, InfiniteAmbiguityError
from .grammar import Cfg, nullable_set, reduce_grammar
from .reachability import NextTerminals

logger = logging.getLogger(__name__)

Item = tuple[int, int, int]  # (production, dot, origin)


# --------------------------------------------------------------------------- Earley


class EarleyRecognizer:
    """Incremental Earley recognizer; :meth:`feed` returns a new recognizer.

    Nullable nonterminals are also advanced over at prediction time, which covers
    empty completions of items predicted later in the same set.
    """

    def __init__(self, g: Cfg) -> None:
        self.grammar = reduce_grammar(g)
        self._nullable = nullable_set(self.grammar)
        start = self.grammar.start.index
        seed = {(p, 0, 0) for p in self.grammar.productions_by_lhs[start]}
        self.sets: tuple[frozenset[Item], ...] = (self._close(seed, 0, ()),)

    @property
    def position(self) -> int:
        return len(self.sets) - 1

    def _with_sets(self, sets: tuple[frozenset[Item], ...]) -> EarleyRecognizer:
        rec = EarleyRecognizer.__new__(EarleyRecognizer)
        rec.grammar = self.grammar
        rec._nullable = self._nullable
        rec.sets = sets
        return rec

    def _close(
        self, items: set[Item], j: int, earlier: tuple[frozenset[Item], ...]
    ) -> frozenset[Item]:
        g = self.grammar
        current = set(items)
        agenda = list(items)
        while agenda:
            p, d, o = agenda.pop()
            rhs = g.productions[p].rhs
            new: list[Item] = []
            if d < len(rhs):
                sym = rhs[d]
                if sym.is_nonterminal:
                    new.extend((q, 0, j) for q in g.productions_by_lhs[sym.index])
                    if sym.index in self._nullable:
                        new.append((p, d + 1, o))
            else:
                lhs = g.productions[p].lhs
                waiting = earlier[o] if o < j else frozenset(current)
                for q, e, o2 in waiting:
                    q_rhs = g.productions[q].rhs
                    if e < len(q_rhs) and q_rhs[e] == lhs:
                        new.append((q, e + 1, o2))
            for item in new:
                if item not in current:
                    current.add(item)
                    agenda.append(item)
        return frozenset(current)

    def feed(self, a: int) -> EarleyRecognizer:
        g = self.grammar
        last = self.sets[-1]
        scanned = set()
        for p, d, o in last:
            rhs = g.productions[p].rhs
            if d < len(rhs) and rhs[d].is_terminal and rhs[d].index == a:
                scanned.add((p, d + 1, o))
        j = len(self.sets)
        nxt = self._close(scanned, j, self.sets)
        return self._with_sets(self.sets + (nxt,))

    def feed_many(self, word: Iterable[int]) -> EarleyRecognizer:
        rec = self
        for a in word:
            rec = rec.feed(a)
        return rec

    def next_terminals(self) -> frozenset[int]:
        g = self.grammar
        out = set()
        for p, d, _ in self.sets[-1]:
            rhs = g.productions[p].rhs
            if d < len(rhs) and rhs[d].is_terminal:
                out.add(rhs[d].index)
        return frozenset(out)

    def accepts(self) -> bool:
        g = self.grammar
        start = g.start.index
        return any(
            o == 0 and d == len(g.productions[p]) and g.productions[p].lhs.index == start
            for p, d, o in self.sets[-1]
        )


def earley_next_terminals(g: Cfg, u: Sequence[int]) -> NextTerminals:
    """``{a : ua in Pref(L)}`` and whether ``u`` itself is a member."""
    rec = EarleyRecognizer(g).feed_many(u)
    return NextTerminals(rec.next_terminals(), rec.accepts())


def earley_recognize(g: Cfg, word: Sequence[int]) -> bool:
    return EarleyRecognizer(g).feed_many(word).accepts()


# --------------------------------------------------------------------------- packed chart


def _term(a: int) -> int:
    # terminals share the symbol space with nonterminals as negative codes
    return -(a + 1)


@dataclass(frozen=True)
class BinaryRule:
    lhs: int
    left: int
    right: int
    label: str


@dataclass(frozen=True)
class ChartGrammar:
    """Epsilon-free grammar with right-hand sides of length one or two."""

    names: tuple[str, ...]
    binary: tuple[BinaryRule, ...]
    unary: tuple[tuple[int, int], ...]
    start: int
    nullable_start: bool
    fresh: int


def prepare_chart_grammar(g: Cfg) -> ChartGrammar:
    """Remove nullable occurrences, then binarize long rules left to right.

    Binarization introduces fresh nonterminals ``A#n`` and changes the forest
    shape (not the language).
    """
    g = reduce_grammar(g)
    nullable = nullable_set(g)
    names = list(g.nonterminals)

    def show(sym: int) -> str:
        return f"'{g.terminals[-sym - 1]}'" if sym < 0 else names[sym]

    variants: dict[tuple[int, tuple[int, ...]], int] = {}
    for p, prod in enumerate(g.productions):
        coded = [_term(s.index) if s.is_terminal else s.index for s in prod.rhs]
        optional = [i for i, s in enumerate(prod.rhs) if s.is_nonterminal and s.index in nullable]
        for drop_count in range(len(optional) + 1):
            for dropped in itertools.combinations(optional, drop_count):
                rhs = tuple(c for i, c in enumerate(coded) if i not in dropped)
                if not rhs or rhs == (prod.lhs.index,):
                    continue
                variants.setdefault((prod.lhs.index, rhs), p)

    binary: list[BinaryRule] = []
    unary: list[tuple[int, int]] = []
    for (lhs, rhs), p in variants.items():
        if len(rhs) == 1:
            unary.append((lhs, rhs[0]))
            continue
        left = rhs[0]
        for i in range(1, len(rhs) - 1):
            names.append(f"{names[lhs]}#{len(names)}")
            fresh = len(names) - 1
            binary.append(
                BinaryRule(fresh, left, rhs[i], f"{names[fresh]} -> {show(left)} {show(rhs[i])}")
            )
            left = fresh
        binary.append(
            BinaryRule(lhs, left, rhs[-1], f"{names[lhs]} -> {show(left)} {show(rhs[-1])}")
        )

    start = g.start.index
    return ChartGrammar(
        names=tuple(names),
        binary=tuple(binary),
        unary=tuple(unary),
        start=start,
        nullable_start=start in nullable,
        fresh=len(names) - len(g.nonterminals),
    )


@dataclass(frozen=True)
class ChartStep:
    """Nodes created while closing all spans that end at position ``t``.

    ``new_symbol`` counts every nonterminal node, including those added by unary
    rules: on ``S0 -> S`` each ``S`` span also yields an ``S0`` node, so the
    headline is twice the ``S`` count. Per-nonterminal counts are in
    ``symbols_by_nonterminal`` and per-production packed counts in ``packed_by_rule``.
    """

    t: int
    new_symbol: int
    new_packed: int
    packed_by_rule: dict[str, int] = field(default_factory=dict, compare=False)
    symbols_by_nonterminal: dict[str, int] = field(default_factory=dict, compare=False)


class PackedChart:
    """Split-complete incremental chart over half-open spans.

    ``spans[j][i]`` holds the symbols deriving ``w[i:j]``. Each binary split
    ``(rule, i, k, j)`` whose child spans exist is recorded exactly once, as a
    packed node.
    """

    def __init__(self, g: Cfg, retain_packed: bool = False) -> None:
        self.chart_grammar = prepare_chart_grammar(g)
        cg = self.chart_grammar
        self._by_pair: dict[int, dict[int, list[BinaryRule]]] = {}
        for rule in cg.binary:
            self._by_pair.setdefault(rule.left, {}).setdefault(rule.right, []).append(rule)
        self._unary_parents: dict[int, list[int]] = {}
        for lhs, child in cg.unary:
            self._unary_parents.setdefault(child, []).append(lhs)
        self.retain_packed = retain_packed
        self.packed_nodes: set[tuple[int, int, int, int, str]] = set()
        self.spans: list[dict[int, set[int]]] = [{}]
        self.word: list[int] = []
        self.symbol_total = 0
        self.packed_total = 0

    def step(self, a: int) -> ChartStep:
        """Extend the input by terminal ``a`` and close every span ending at the new position."""
        self.word.append(a)
        t = len(self.word)
        column: dict[int, set[int]] = {}
        self.spans.append(column)
        packed: Counter[str] = Counter()
        symbols: Counter[str] = Counter()
        names = self.chart_grammar.names

        for i in range(t - 1, -1, -1):
            cell: set[int] = set()
            if i == t - 1:
                cell.add(_term(a))
            else:
                for k in range(i + 1, t):
                    left_cell = self.spans[k].get(i)
                    right_cell = column.get(k)
                    if not left_cell or not right_cell:
                        continue
                    for x in left_cell:
                        by_right = self._by_pair.get(x)
                        if not by_right:
                            continue
                        for y in right_cell:
                            for rule in by_right.get(y, ()):
                                cell.add(rule.lhs)
                                packed[rule.label] += 1
                                if self.retain_packed:
                                    self.packed_nodes.add((rule.lhs, i, k, t, rule.label))
            agenda = list(cell)
            while agenda:
                sym = agenda.pop()
                for parent in self._unary_parents.get(sym, ()):
                    if parent not in cell:
                        cell.add(parent)
                        agenda.append(parent)
            if cell:
                column[i] = cell
                for sym in cell:
                    if sym >= 0:
                        symbols[names[sym]] += 1

        new_symbol = sum(symbols.values())
        new_packed = sum(packed.values())
        self.symbol_total += new_symbol
        self.packed_total += new_packed
        return ChartStep(t, new_symbol, new_packed, dict(packed), dict(symbols))

    def accepts(self) -> bool:
        cg = self.chart_grammar
        if not self.word:
            return cg.nullable_start
        return cg.start in self.spans[len(self.word)].get(0, ())

    def has_symbol(self, name: str, i: int, j: int) -> bool:
        sym = self.chart_grammar.names.index(name)
        return sym in self.spans[j].get(i, ())


def incremental_chart_step(chart: PackedChart, a: int) -> tuple[PackedChart, int, int]:
    """Advance ``chart`` by one terminal; returns it with the new symbol and packed counts."""
    step = chart.step(a)
    return chart, step.new_symbol, step.new_packed


class RegularRecognizer:
    """Constant-state online recognizer for deterministic right-linear grammars.

    Accepted shapes per production: ``A -> eps``, ``A -> 't'`` and ``A -> 't' B``,
    with pairwise distinct leading terminals per nonterminal.
    """

    FINAL = -1

    def __init__(self, g: Cfg) -> None:
        g = reduce_grammar(g)
        self.grammar = g
        self._delta: dict[tuple[int, int], int] = {}
        self._accepting = {self.FINAL}
        for prod in g.productions:
            rhs = prod.rhs
            shape_ok = (
                len(rhs) == 0
                or (len(rhs) == 1 and rhs[0].is_terminal)
                or (len(rhs) == 2 and rhs[0].is_terminal and rhs[1].is_nonterminal)
            )
            if not shape_ok:
                raise FastPathError(
                    f"production '{g.format_production(g.productions.index(prod))}' "
                    "is not of the form eps, 't' or 't' B"
                )
            if not rhs:
                self._accepting.add(prod.lhs.index)
                continue
            key = (prod.lhs.index, rhs[0].index)
            if key in self._delta:
                raise FastPathError(
                    f"nonterminal '{g.nonterminals[prod.lhs.index]}' has two rules starting "
                    f"with '{g.terminals[rhs[0].index]}'"
                )
            self._delta[key] = rhs[1].index if len(rhs) == 2 else self.FINAL
        self.state: int | None = g.start.index
        self.t = 0

    def step(self, a: int) -> ChartStep:
        self.t += 1
        if self.state is not None:
            self.state = self._delta.get((self.state, a))
        return ChartStep(self.t, 0, 1)

    def accepts(self) -> bool:
        return self.state in self._accepting


class SacEngine(str, Enum):
    CHART = "chart"
    FAST = "fast"


@dataclass(frozen=True)
class SacSeries:
    """Per-step structural growth; the headline increment is the packed component.

    For the constant-state engine each step records one recognizer-state update
    in the packed column.
    """

    engine: SacEngine
    steps: tuple[ChartStep, ...]

    @property
    def deltas(self) -> list[int]:
        return [s.new_packed for s in self.steps]

    @property
    def new_symbol(self) -> list[int]:
        return [s.new_symbol for s in self.steps]

    @property
    def cumulative_packed(self) -> list[int]:
        return list(itertools.accumulate(self.deltas))

    @property
    def cumulative_symbol(self) -> list[int]:
        return list(itertools.accumulate(self.new_symbol))

    def rule_series(self, label: str) -> list[int]:
        return [s.packed_by_rule.get(label, 0) for s in self.steps]

    def nonterminal_series(self, name: str) -> list[int]:
        return [s.symbols_by_nonterminal.get(name, 0) for s in self.steps]


def sac_measure(g: Cfg, word: Sequence[int], engine: SacEngine = SacEngine.CHART) -> SacSeries:
    """Measure per-step structural growth of ``g`` on ``word``.

    Raises:
        FastPathError: the fast engine was requested for an unsupported grammar.
    """
    recognizer: PackedChart | RegularRecognizer
    if engine is SacEngine.FAST:
        recognizer = RegularRecognizer(g)
    else:
        recognizer = PackedChart(g)
    steps = tuple(recognizer.step(a) for a in word)
    return SacSeries(engine, steps)


# --------------------------------------------------------------------------- tree counting


def count_parse_trees(g: Cfg, word: Sequence[int]) -> int:
    """Exact number of parse trees of ``word`` rooted at the start symbol.

    Raises:
        InfiniteAmbiguityError: a derivable cycle makes the count infinite.
    """
    n = len(word)
    prods = g.productions
    by_lhs = g.productions_by_lhs
    nullable = nullable_set(g)

    derivable: set[tuple[int, int, int]] = {
        (a, i, i) for a in nullable for i in range(n + 1)
    }

    def seq_ok(p: int, pos: int, i: int, j: int) -> bool:
        rhs = prods[p].rhs
        if pos == len(rhs):
            return i == j
        sym = rhs[pos]
        if sym.is_terminal:
            return i < j and word[i] == sym.index and seq_ok(p, pos + 1, i + 1, j)
        return any(
            (sym.index, i, k) in derivable and seq_ok(p, pos + 1, k, j) for k in range(i, j + 1)
        )

    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            changed = True
            while changed:
                changed = False
                for a in range(len(g.nonterminals)):
                    if (a, i, j) in derivable:
                        continue
                    if any(seq_ok(p, 0, i, j) for p in by_lhs[a]):
                        derivable.add((a, i, j))
                        changed = True

    start = g.start.index
    if (start, 0, n) not in derivable:
        return 0

    seq_memo: dict[tuple[int, int, int, int], bool] = {}

    def rest_ok(p: int, pos: int, i: int, j: int) -> bool:
        key = (p, pos, i, j)
        if key not in seq_memo:
            seq_memo[key] = seq_ok(p, pos, i, j)
        return seq_memo[key]

    counts: dict[tuple[int, int, int], int] = {}
    active: set[tuple[int, int, int]] = set()

    def count_nt(a: int, i: int, j: int) -> int:
        key = (a, i, j)
        if key in counts:
            return counts[key]
        if key in active:
            raise InfiniteAmbiguityError(g.nonterminals[a])
        active.add(key)
        total = sum(count_seq(p, 0, i, j) for p in by_lhs[a])
        active.discard(key)
        counts[key] = total
        return total

    def count_seq(p: int, pos: int, i: int, j: int) -> int:
        rhs = prods[p].rhs
        if pos == len(rhs):
            return 1 if i == j else 0
        sym = rhs[pos]
        if sym.is_terminal:
            if i < j and word[i] == sym.index:
                return count_seq(p, pos + 1, i + 1, j)
            return 0
        total = 0
        for k in range(i, j + 1):
            if (sym.index, i, k) in derivable and rest_ok(p, pos + 1, k, j):
                total += count_nt(sym.index, i, k) * count_seq(p, pos + 1, k, j)
        return total

    return count_nt(start, 0, n)
