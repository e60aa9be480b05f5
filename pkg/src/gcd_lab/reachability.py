"""Reachable configuration sets of compiled automata, advanced one terminal at a time.

A configuration set is stored as a finite automaton over stack symbols (a
P-automaton): configuration ``(q, stack)`` belongs to the set iff the stack,
read top to bottom, labels a path from the node of control state ``q`` to the
base node. After each terminal the set is closed under all epsilon moves by
post* saturation, so infinite sets (unbounded call chains) stay finite.
"""

from __future__ import annotations

import hashlib
import logging
from collections import defaultdict, deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .counters import CounterVector
from .grammar import Cfg
from .models import Worklist
from .pda import BOTTOM, Clause, Npda, StackAction, compile_rtn

logger = logging.getLogger(__name__)

EPSILON = -1

Edge = tuple[int, int, int]


@dataclass(frozen=True)
class ConfigSet:
    """P-automaton over stack symbols.

    Nodes below ``control_count`` are control states and node ``control_count`` is
    the base; the remaining nodes are auxiliary.
    """

    control_count: int
    node_count: int
    edges: tuple[Edge, ...]

    @property
    def base(self) -> int:
        return self.control_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def _out(self) -> dict[int, dict[int, tuple[int, ...]]]:
        out: dict[int, dict[int, list[int]]] = {}
        for src, label, dst in self.edges:
            out.setdefault(src, {}).setdefault(label, []).append(dst)
        return {n: {lb: tuple(d) for lb, d in m.items()} for n, m in out.items()}

    @cached_property
    def occupied_states(self) -> frozenset[int]:
        """Control states with at least one configuration."""
        return frozenset(src for src, _, _ in self.edges if src < self.control_count)

    @property
    def is_empty(self) -> bool:
        return not self.occupied_states

    def contains(self, state: int, stack: Sequence[int]) -> bool:
        """Membership of ``(state, stack)``; ``stack`` is read top first and ends at the bottom."""
        current = {state}
        for symbol in stack:
            current = {
                dst for node in current for dst in self._out.get(node, {}).get(symbol, ())
            }
            if not current:
                return False
        return self.base in current

    def configurations(self, max_height: int) -> Iterator[tuple[int, tuple[int, ...]]]:
        """Enumerate members whose stack holds at most ``max_height`` symbols above the bottom."""
        for state in sorted(self.occupied_states):
            seen: set[tuple[int, ...]] = set()
            frontier: list[tuple[tuple[int, ...], frozenset[int]]] = [((), frozenset({state}))]
            while frontier:
                stack, nodes = frontier.pop()
                labels: dict[int, set[int]] = defaultdict(set)
                for node in nodes:
                    for label, dsts in self._out.get(node, {}).items():
                        labels[label].update(dsts)
                for label in sorted(labels):
                    nxt = stack + (label,)
                    if label == BOTTOM:
                        if self.base in labels[label] and nxt not in seen:
                            seen.add(nxt)
                            yield state, nxt
                    elif len(nxt) <= max_height:
                        frontier.append((nxt, frozenset(labels[label])))

    def digest(self) -> str:
        payload = repr((self.control_count, self.node_count, self.edges)).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class EngineState:
    """Configurations reachable after ``consumed`` terminals.

    ``work`` holds the counters spent producing this state.
    """

    configs: ConfigSet
    consumed: int
    work: CounterVector = field(default_factory=CounterVector, compare=False)

    @property
    def live(self) -> bool:
        return not self.configs.is_empty


@dataclass(frozen=True)
class NextTerminals:
    terminals: frozenset[int]
    eos: bool
    work: CounterVector = field(default_factory=CounterVector, compare=False)


class ReachabilityEngine:
    """Persistent stepping over the configuration sets of one compiled automaton.

    Example:
        >>> engine = ReachabilityEngine(compile_rtn(g))
        >>> s = engine.step_terminal(engine.init(), g.terminal_id("a"))
        >>> engine.next_terminals(s).eos
    """

    def __init__(self, npda: Npda, worklist: Worklist = Worklist.FIFO) -> None:
        self.npda = npda
        self.worklist = worklist
        self.control_count = len(npda.states)
        self.return_count = len(npda.stack_alphabet) - 1

        self._free: list[list[int]] = [[] for _ in npda.states]
        self._start: list[list[int]] = [[] for _ in npda.states]
        self._push: list[list[tuple[int, int]]] = [[] for _ in npda.states]
        self._pop: list[dict[int, int]] = [{} for _ in npda.states]
        for tr in npda.transitions:
            if tr.symbol is not None:
                continue
            if tr.action is StackAction.NONE:
                if tr.clause is Clause.START:
                    self._start[tr.source].append(tr.target)
                else:
                    self._free[tr.source].append(tr.target)
            elif tr.action is StackAction.PUSH:
                self._push[tr.source].append((tr.target, tr.stack or 0))
            else:
                self._pop[tr.source][tr.stack or 0] = tr.target

    @property
    def grammar(self) -> Cfg:
        return self.npda.grammar

    def init(self) -> EngineState:
        """Closure of the initial configuration ``(start, bottom)``."""
        seed = [(self.npda.initial, BOTTOM, self.control_count)]
        configs, work = self._saturate(seed, self.control_count + 1)
        return EngineState(configs, 0, work)

    def step_terminal(self, s: EngineState, a: int) -> EngineState:
        """Consume terminal ``a``; a non-admissible terminal yields a dead state."""
        q_count = self.control_count
        moves = self.npda.terminal_moves
        image: list[Edge] = []
        for src, label, dst in s.configs.edges:
            if src < q_count:
                for target in moves[src].get(a, ()):
                    image.append((target, label, dst))
            else:
                image.append((src, label, dst))
        configs, work = self._saturate(image, s.configs.node_count)
        return EngineState(configs, s.consumed + 1, work)

    def step_many(self, s: EngineState, word: Iterable[int]) -> EngineState:
        for a in word:
            if not s.live:
                break
            s = self.step_terminal(s, a)
        return s

    def next_terminals(self, s: EngineState) -> NextTerminals:
        moves = self.npda.terminal_moves
        terminals = {a for q in s.configs.occupied_states for a in moves[q]}
        eos = s.configs.contains(self.npda.accepting, (BOTTOM,))
        return NextTerminals(frozenset(terminals), eos)

    def _saturate(
        self, initial: Iterable[Edge], node_count: int
    ) -> tuple[ConfigSet, CounterVector]:
        q_count = self.control_count
        # one fresh auxiliary node per return symbol for this saturation round
        aux_base = node_count - 1

        rel: set[Edge] = set()
        out_of: dict[int, list[tuple[int, int]]] = defaultdict(list)
        eps_into: dict[int, list[int]] = defaultdict(list)

        def add(edge: Edge) -> None:
            rel.add(edge)
            src, label, dst = edge
            if label == EPSILON:
                eps_into[dst].append(src)
            else:
                out_of[src].append((label, dst))

        trans: deque[Edge] = deque()
        for edge in initial:
            if edge[0] < q_count:
                trans.append(edge)
            elif edge not in rel:
                add(edge)
        take = trans.popleft if self.worklist is Worklist.FIFO else trans.pop

        touched = 0
        iterations = 0
        while trans:
            edge = take()
            iterations += 1
            if edge in rel:
                continue
            add(edge)
            touched += 1
            p, gamma, q = edge
            if gamma == EPSILON:
                for label, dst in list(out_of[q]):
                    trans.append((p, label, dst))
                touched += len(out_of[q])
                continue
            for nxt in self._free[p]:
                trans.append((nxt, gamma, q))
            if gamma == BOTTOM:
                for nxt in self._start[p]:
                    trans.append((nxt, gamma, q))
            ret_target = self._pop[p].get(gamma)
            if ret_target is not None:
                trans.append((ret_target, EPSILON, q))
            for callee, ret in self._push[p]:
                aux = aux_base + ret
                trans.append((callee, ret, aux))
                tail = (aux, gamma, q)
                if tail not in rel:
                    add(tail)
                    touched += 1
                    for src in eps_into[aux]:
                        trans.append((src, gamma, q))

        configs = self._normalize(rel, q_count)
        work = CounterVector(engine_edges_touched=touched, saturation_iterations=iterations)
        return configs, work

    @staticmethod
    def _normalize(rel: set[Edge], q_count: int) -> ConfigSet:
        """Drop epsilon edges and useless nodes, then renumber preserving node order."""
        base = q_count
        edges = [e for e in rel if e[1] != EPSILON]

        into: dict[int, list[int]] = defaultdict(list)
        for src, _, dst in edges:
            into[dst].append(src)
        coreach = {base}
        stack = [base]
        while stack:
            node = stack.pop()
            for src in into[node]:
                if src not in coreach:
                    coreach.add(src)
                    stack.append(src)
        edges = [e for e in edges if e[0] in coreach and e[2] in coreach]

        out: dict[int, list[int]] = defaultdict(list)
        for src, _, dst in edges:
            out[src].append(dst)
        reach = set(range(q_count + 1))
        stack = list(range(q_count))
        while stack:
            node = stack.pop()
            for dst in out[node]:
                if dst not in reach:
                    reach.add(dst)
                    stack.append(dst)

        extra = sorted(n for n in reach if n > base)
        renumber = {old: base + 1 + i for i, old in enumerate(extra)}
        for n in range(base + 1):
            renumber[n] = n
        kept = sorted(
            (renumber[s], label, renumber[d]) for s, label, d in edges if s in reach
        )
        return ConfigSet(q_count, base + 1 + len(extra), tuple(kept))


class BitsetScanEngine(ReachabilityEngine):
    """Engine variant whose next-terminal query scans one bitset slot per control state."""

    def next_terminals(self, s: EngineState) -> NextTerminals:
        slots = np.zeros(self.control_count, dtype=bool)
        for q in s.configs.occupied_states:
            slots[q] = True
        moves = self.npda.terminal_moves
        terminals: set[int] = set()
        scanned = 0
        for q in range(self.control_count):
            scanned += 1
            if slots[q]:
                terminals.update(moves[q])
        eos = bool(slots[self.npda.accepting]) and s.configs.contains(
            self.npda.accepting, (BOTTOM,)
        )
        return NextTerminals(frozenset(terminals), eos, CounterVector(bitset_slots_scanned=scanned))


def build_engine(
    g: Cfg, worklist: Worklist = Worklist.FIFO, bitset: bool = False
) -> ReachabilityEngine:
    """Compile ``g`` (which must be reduced) and wrap it in an engine."""
    cls = BitsetScanEngine if bitset else ReachabilityEngine
    return cls(compile_rtn(g), worklist)
