"""Compilation of grammars to recursive-transition-network pushdown automata."""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any

from .grammar import Cfg, min_yield_lengths

logger = logging.getLogger(__name__)


class StateRole(str, Enum):
    START = "start"
    ENTER = "enter"
    EXIT = "exit"
    DOT = "dot"


@dataclass(frozen=True)
class ControlState:
    """A control state; enter/exit carry a nonterminal, dot states a production and position."""

    role: StateRole
    nonterminal: int | None = None
    production: int | None = None
    position: int | None = None

    def label(self, g: Cfg) -> str:
        if self.role is StateRole.START:
            return "start"
        if self.role is StateRole.ENTER:
            return f"{g.nonterminals[self.nonterminal or 0]}.in"
        if self.role is StateRole.EXIT:
            return f"{g.nonterminals[self.nonterminal or 0]}.out"
        return f"p{self.production}.{self.position}"


BOTTOM = 0


@dataclass(frozen=True)
class StackSymbol:
    """The stack bottom, or a return address naming a dot state."""

    state: int | None = None

    @property
    def is_bottom(self) -> bool:
        return self.state is None


class StackAction(str, Enum):
    NONE = "none"
    PUSH = "push"
    POP = "pop"


class Clause(str, Enum):
    """The compilation rule a transition stems from."""

    START = "start"
    CHOICE = "choice"
    EXIT = "exit"
    TERMINAL = "terminal"
    CALL = "call"
    RETURN = "return"


@dataclass(frozen=True)
class Transition:
    """``source --symbol/action--> target``.

    ``symbol`` is a terminal index, or ``None`` for an epsilon move. ``stack`` is
    the pushed or popped stack symbol; for the start clause it is the required
    stack top (bottom) and the stack is left unchanged.
    """

    source: int
    symbol: int | None
    action: StackAction
    stack: int | None
    target: int
    clause: Clause


@dataclass(frozen=True)
class Npda:
    """Compiled automaton; acceptance by the start symbol's exit state with the bare bottom."""

    grammar: Cfg
    states: tuple[ControlState, ...]
    stack_alphabet: tuple[StackSymbol, ...]
    transitions: tuple[Transition, ...]
    initial: int
    accepting: int

    @cached_property
    def enter_states(self) -> tuple[int, ...]:
        return tuple(1 + 2 * a for a in range(len(self.grammar.nonterminals)))

    @cached_property
    def exit_states(self) -> tuple[int, ...]:
        return tuple(2 + 2 * a for a in range(len(self.grammar.nonterminals)))

    @cached_property
    def dot_offsets(self) -> tuple[int, ...]:
        """State id of ``dot(p, 0)`` per production."""
        offsets = []
        nxt = 1 + 2 * len(self.grammar.nonterminals)
        for prod in self.grammar.productions:
            offsets.append(nxt)
            nxt += len(prod) + 1
        return tuple(offsets)

    def dot_state(self, production: int, position: int) -> int:
        return self.dot_offsets[production] + position

    @cached_property
    def return_symbol(self) -> dict[int, int]:
        """Dot state id to its return stack symbol id."""
        return {sym.state: i for i, sym in enumerate(self.stack_alphabet) if sym.state is not None}

    @cached_property
    def epsilon_moves(self) -> tuple[tuple[Transition, ...], ...]:
        """Epsilon transitions adjacency-listed per source state."""
        out: list[list[Transition]] = [[] for _ in self.states]
        for tr in self.transitions:
            if tr.symbol is None:
                out[tr.source].append(tr)
        return tuple(tuple(x) for x in out)

    @cached_property
    def terminal_moves(self) -> tuple[dict[int, tuple[int, ...]], ...]:
        """Per source state: terminal index to target states."""
        out: list[dict[int, list[int]]] = [{} for _ in self.states]
        for tr in self.transitions:
            if tr.symbol is not None:
                out[tr.source].setdefault(tr.symbol, []).append(tr.target)
        return tuple({a: tuple(t) for a, t in d.items()} for d in out)

    @cached_property
    def terminal_sources(self) -> dict[int, tuple[int, ...]]:
        """Terminal index to the states that can read it."""
        out: dict[int, list[int]] = {}
        for tr in self.transitions:
            if tr.symbol is not None:
                out.setdefault(tr.symbol, []).append(tr.source)
        return {a: tuple(s) for a, s in out.items()}

    def state_label(self, state: int) -> str:
        return self.states[state].label(self.grammar)

    def stack_label(self, symbol: int) -> str:
        sym = self.stack_alphabet[symbol]
        return "bottom" if sym.is_bottom else f"ret({self.state_label(sym.state or 0)})"


def compile_rtn(g: Cfg) -> Npda:
    """Compile ``g`` to its RTN automaton.

    State ids: 0 is ``start``; nonterminal ``A`` owns ``1 + 2A`` (enter) and
    ``2 + 2A`` (exit); dot states follow in production order. The stack alphabet
    is the bottom symbol followed by one return symbol per dot state.
    """
    states: list[ControlState] = [ControlState(StateRole.START)]
    for a in range(len(g.nonterminals)):
        states.append(ControlState(StateRole.ENTER, nonterminal=a))
        states.append(ControlState(StateRole.EXIT, nonterminal=a))
    dot_offsets: list[int] = []
    for p, prod in enumerate(g.productions):
        dot_offsets.append(len(states))
        for i in range(len(prod) + 1):
            states.append(ControlState(StateRole.DOT, production=p, position=i))

    stack_alphabet = [StackSymbol()] + [
        StackSymbol(state=s) for s, cs in enumerate(states) if cs.role is StateRole.DOT
    ]
    return_symbol = {sym.state: i for i, sym in enumerate(stack_alphabet) if sym.state is not None}

    def enter(a: int) -> int:
        return 1 + 2 * a

    def exit_(a: int) -> int:
        return 2 + 2 * a

    transitions: list[Transition] = [
        Transition(0, None, StackAction.NONE, BOTTOM, enter(g.start.index), Clause.START)
    ]
    for p, prod in enumerate(g.productions):
        base = dot_offsets[p]
        end = base + len(prod)
        transitions.append(
            Transition(enter(prod.lhs.index), None, StackAction.NONE, None, base, Clause.CHOICE)
        )
        transitions.append(
            Transition(end, None, StackAction.NONE, None, exit_(prod.lhs.index), Clause.EXIT)
        )
    for p, prod in enumerate(g.productions):
        base = dot_offsets[p]
        for i, sym in enumerate(prod.rhs):
            here, after = base + i, base + i + 1
            if sym.is_terminal:
                transitions.append(
                    Transition(here, sym.index, StackAction.NONE, None, after, Clause.TERMINAL)
                )
            else:
                ret = return_symbol[after]
                callee = sym.index
                transitions.append(
                    Transition(here, None, StackAction.PUSH, ret, enter(callee), Clause.CALL)
                )
                transitions.append(
                    Transition(exit_(callee), None, StackAction.POP, ret, after, Clause.RETURN)
                )

    npda = Npda(
        grammar=g,
        states=tuple(states),
        stack_alphabet=tuple(stack_alphabet),
        transitions=tuple(transitions),
        initial=0,
        accepting=exit_(g.start.index),
    )
    logger.debug(
        "compiled %d states, %d stack symbols, %d transitions",
        len(states),
        len(stack_alphabet),
        len(transitions),
    )
    return npda


def npda_to_json(a: Npda) -> dict[str, Any]:
    """JSON-ready dump with stable ids, role tags and clause tags."""
    g = a.grammar
    states = []
    for i, cs in enumerate(a.states):
        entry: dict[str, Any] = {"id": i, "role": cs.role.value, "label": cs.label(g)}
        if cs.nonterminal is not None:
            entry["nonterminal"] = g.nonterminals[cs.nonterminal]
        if cs.production is not None:
            entry["production"] = cs.production
            entry["position"] = cs.position
        states.append(entry)
    transitions = []
    for tr in a.transitions:
        transitions.append(
            {
                "source": tr.source,
                "input": None if tr.symbol is None else g.terminals[tr.symbol],
                "action": tr.action.value,
                "stack": None if tr.stack is None else a.stack_label(tr.stack),
                "target": tr.target,
                "clause": tr.clause.value,
            }
        )
    return {
        "kappa": len(a.states),
        "initial": a.initial,
        "accepting": [a.accepting],
        "states": states,
        "stack_alphabet": [a.stack_label(i) for i in range(len(a.stack_alphabet))],
        "productions": [g.format_production(p) for p in range(len(g.productions))],
        "transitions": transitions,
    }


# --------------------------------------------------------------------------- simulation


class SimulationResult(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    BOUND_EXCEEDED = "bound-exceeded"


def simulate_accepts(
    a: Npda,
    word: Sequence[int],
    depth_bound: int,
    max_configurations: int = 200_000,
) -> SimulationResult:
    """Exhaustive breadth-first search over configurations (test oracle).

    A configuration is ``(state, position, stack)``; the stack holds return
    symbols above the implicit bottom. Branches whose pending obligations need
    more input than remains are pruned (every pending suffix must still derive
    its shortest yield). Exceeding ``depth_bound`` stack height or
    ``max_configurations`` visited configurations makes a non-accepting search
    inconclusive.

    Raises:
        ValueError: ``depth_bound`` is shorter than the word.
    """
    if depth_bound < len(word):
        raise ValueError("depth bound must be at least the word length")
    g = a.grammar
    n = len(word)
    min_yield = min_yield_lengths(g)

    # pending[s]: shortest input the rest of the production at dot state s consumes
    pending: dict[int, float] = {}
    for p, prod in enumerate(g.productions):
        for i in range(len(prod) + 1):
            pending[a.dot_state(p, i)] = sum(
                1 if s.is_terminal else min_yield[s.index] for s in prod.rhs[i:]
            )
    own_need = [0.0] * len(a.states)
    for s, cs in enumerate(a.states):
        if cs.role is StateRole.DOT:
            own_need[s] = pending[s]
        elif cs.role is StateRole.ENTER:
            own_need[s] = min_yield[cs.nonterminal or 0]
        elif cs.role is StateRole.START:
            own_need[s] = min_yield[g.start.index]
    stack_state = {sym: a.stack_alphabet[sym].state for sym in range(1, len(a.stack_alphabet))}

    Config = tuple[int, int, tuple[int, ...], float]
    start: Config = (a.initial, 0, (), 0.0)
    seen = {start[:3]}
    queue: deque[Config] = deque([start])
    truncated = False

    while queue:
        state, pos, stack, stack_need = queue.popleft()
        if state == a.accepting and pos == n and not stack:
            return SimulationResult.ACCEPT

        successors: list[tuple[int, int, tuple[int, ...]]] = []
        if pos < n:
            for target in a.terminal_moves[state].get(word[pos], ()):
                successors.append((target, pos + 1, stack))
        for tr in a.epsilon_moves[state]:
            if tr.action is StackAction.NONE:
                if tr.clause is Clause.START and stack:
                    continue
                successors.append((tr.target, pos, stack))
            elif tr.action is StackAction.PUSH:
                successors.append((tr.target, pos, (tr.stack or 0,) + stack))
            elif stack and stack[0] == tr.stack:
                successors.append((tr.target, pos, stack[1:]))

        for nxt_state, nxt_pos, nxt_stack in successors:
            key = (nxt_state, nxt_pos, nxt_stack)
            if key in seen:
                continue
            if len(nxt_stack) > depth_bound:
                truncated = True
                continue
            if nxt_stack is stack:
                need = stack_need
            elif len(nxt_stack) > len(stack):
                need = stack_need + pending[stack_state[nxt_stack[0]] or 0]
            else:
                need = sum(pending[stack_state[s] or 0] for s in nxt_stack)
            if nxt_pos + own_need[nxt_state] + need > n:
                continue
            if len(seen) >= max_configurations:
                truncated = True
                break
            seen.add(key)
            queue.append((nxt_state, nxt_pos, nxt_stack, need))

    if truncated:
        logger.debug("simulation inconclusive after %d configurations", len(seen))
        return SimulationResult.BOUND_EXCEEDED
    return SimulationResult.REJECT
