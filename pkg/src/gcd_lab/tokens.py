"""Vocabularies, the tokenizer homomorphism and vocabulary-level admissibility."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from pydantic import TypeAdapter, ValidationError

from .counters import CounterVector
from .errors import VocabError
from .grammar import Cfg
from .models import VocabEntry
from .reachability import EngineState, ReachabilityEngine

logger = logging.getLogger(__name__)

EOS_NAME = "<eos>"

_ENTRIES = TypeAdapter(list[VocabEntry])


@dataclass(frozen=True)
class Token:
    id: int
    name: str
    terminals: tuple[str, ...]
    is_eos: bool = False


@dataclass(frozen=True)
class Vocab:
    """Tokens with dense ids and exactly one eos token (realizing the empty string)."""

    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        for i, tok in enumerate(self.tokens):
            if tok.id != i:
                raise VocabError(f"token ids must be dense from 0; found {tok.id} at slot {i}")
        eos = [t for t in self.tokens if t.is_eos]
        if len(eos) != 1:
            raise VocabError(f"vocabulary needs exactly one eos token, found {len(eos)}")
        for tok in self.tokens:
            if not tok.is_eos and not tok.terminals:
                raise VocabError(f"token '{tok.name}' realizes no terminals")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def eos_id(self) -> int:
        return next(t.id for t in self.tokens if t.is_eos)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tokens)

    def token_id(self, name: str) -> int:
        for tok in self.tokens:
            if tok.name == name:
                return tok.id
        raise VocabError(f"unknown token '{name}'")

    def mean_terminals_per_token(self) -> float:
        """Mean realization length over non-eos tokens."""
        lengths = [len(t.terminals) for t in self.tokens if not t.is_eos]
        return float(np.mean(lengths)) if lengths else 0.0

    @classmethod
    def singleton(cls, g: Cfg) -> Vocab:
        """One token per terminal (named after it), followed by eos."""
        tokens = [Token(i, name, (name,)) for i, name in enumerate(g.terminals)]
        tokens.append(Token(len(tokens), EOS_NAME, (), is_eos=True))
        return cls(tuple(tokens))

    @classmethod
    def from_entries(cls, entries: Sequence[VocabEntry]) -> Vocab:
        ordered = sorted(entries, key=lambda e: e.id)
        tokens = []
        for entry in ordered:
            is_eos = entry.name == EOS_NAME or entry.terminals is None
            if is_eos and entry.terminals:
                raise VocabError("eos token must realize the empty string")
            tokens.append(Token(entry.id, entry.name, tuple(entry.terminals or ()), is_eos))
        return cls(tuple(tokens))


def load_vocab(path: Path) -> Vocab:
    """Read a vocabulary JSON file.

    Raises:
        VocabError: unreadable file or invalid entries.
    """
    try:
        entries = _ENTRIES.validate_json(path.read_bytes())
    except (OSError, ValidationError) as e:
        raise VocabError(f"cannot load vocabulary {path}: {e}") from e
    return Vocab.from_entries(entries)


def vocab_to_json(v: Vocab) -> str:
    entries = [
        {"id": t.id, "name": t.name}
        if t.is_eos
        else {"id": t.id, "name": t.name, "terminals": list(t.terminals)}
        for t in v.tokens
    ]
    return json.dumps(entries, indent=2) + "\n"


@lru_cache(maxsize=64)
def bind_vocab(v: Vocab, g: Cfg) -> tuple[tuple[int, ...], ...]:
    """Per token, its realization as terminal indices of ``g``.

    Raises:
        VocabError: a token names a terminal that ``g`` does not declare.
    """
    bound = []
    for tok in v.tokens:
        ids = []
        for name in tok.terminals:
            if name not in g.terminals:
                raise VocabError(f"token '{tok.name}' uses terminal '{name}' unknown to grammar")
            ids.append(g.terminal_id(name))
        bound.append(tuple(ids))
    return tuple(bound)


def realize(v: Vocab, ys: Iterable[int]) -> tuple[str, ...]:
    """Concatenate token realizations; eos contributes nothing."""
    out: list[str] = []
    for y in ys:
        if not 0 <= y < v.size:
            raise VocabError(f"unknown token id {y}")
        out.extend(v.tokens[y].terminals)
    return tuple(out)


@dataclass(frozen=True)
class TokenMask:
    """Admissibility bits over the vocabulary, the eos slot included."""

    bits: tuple[bool, ...]
    eos_id: int
    work: CounterVector = field(default_factory=CounterVector, compare=False)

    @property
    def eos(self) -> bool:
        return self.bits[self.eos_id]

    @property
    def admissible(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    @property
    def count(self) -> int:
        return sum(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)


def admissible_tokens(engine: ReachabilityEngine, s: EngineState, v: Vocab) -> TokenMask:
    """Mask of tokens whose realization keeps the prefix completable.

    Each token is stepped speculatively through its terminals, stopping at the
    first dead state. ``s`` is left untouched.
    """
    realizations = bind_vocab(v, engine.grammar)
    nxt = engine.next_terminals(s)
    work = nxt.work
    steps = 0
    bits = [False] * v.size
    for tok in v.tokens:
        if tok.is_eos:
            bits[tok.id] = nxt.eos
            continue
        word = realizations[tok.id]
        if word[0] not in nxt.terminals:
            continue
        state = s
        for a in word:
            state = engine.step_terminal(state, a)
            steps += 1
            work = work + state.work
            if not state.live:
                break
        bits[tok.id] = state.live
    return TokenMask(tuple(bits), v.eos_id, work + CounterVector(speculative_token_steps=steps))


@dataclass
class _TrieNode:
    tokens: list[int] = field(default_factory=list)
    children: dict[int, _TrieNode] = field(default_factory=dict)


@lru_cache(maxsize=64)
def _token_trie(v: Vocab, g: Cfg) -> _TrieNode:
    root = _TrieNode()
    for tok_id, word in enumerate(bind_vocab(v, g)):
        if v.tokens[tok_id].is_eos:
            continue
        node = root
        for a in word:
            node = node.children.setdefault(a, _TrieNode())
        node.tokens.append(tok_id)
    return root


def admissible_tokens_trie(engine: ReachabilityEngine, s: EngineState, v: Vocab) -> TokenMask:
    """Same mask as :func:`admissible_tokens`, sharing steps across common realization prefixes."""
    root = _token_trie(v, engine.grammar)
    nxt = engine.next_terminals(s)
    work = nxt.work
    steps = 0
    bits = [False] * v.size
    bits[v.eos_id] = nxt.eos
    stack: list[tuple[_TrieNode, EngineState]] = [(root, s)]
    while stack:
        node, state = stack.pop()
        allowed = engine.next_terminals(state).terminals
        for a, child in sorted(node.children.items()):
            if a not in allowed:
                continue
            stepped = engine.step_terminal(state, a)
            steps += 1
            work = work + stepped.work
            if not stepped.live:
                continue
            for tok_id in child.tokens:
                bits[tok_id] = True
            if child.children:
                stack.append((child, stepped))
    return TokenMask(tuple(bits), v.eos_id, work + CounterVector(speculative_token_steps=steps))


class MaskOracle:
    """Memoized engine states and masks keyed by realized terminal prefix."""

    def __init__(self, engine: ReachabilityEngine, vocab: Vocab) -> None:
        self.engine = engine
        self.vocab = vocab
        self._realizations = bind_vocab(vocab, engine.grammar)
        self._states: dict[tuple[int, ...], EngineState] = {(): engine.init()}
        self._masks: dict[tuple[int, ...], TokenMask] = {}

    def state(self, terminals: tuple[int, ...]) -> EngineState:
        """Engine state after ``terminals``; dead prefixes yield dead states."""
        cached = self._states.get(terminals)
        if cached is not None:
            return cached
        parent = self.state(terminals[:-1])
        s = parent if not parent.live else self.engine.step_terminal(parent, terminals[-1])
        self._states[terminals] = s
        return s

    def realized(self, ys: Sequence[int]) -> tuple[int, ...]:
        return tuple(a for y in ys for a in self._realizations[y])

    def mask(self, terminals: tuple[int, ...]) -> TokenMask:
        cached = self._masks.get(terminals)
        if cached is None:
            s = self.state(terminals)
            if s.live:
                cached = admissible_tokens(self.engine, s, self.vocab)
            else:
                cached = TokenMask((False,) * self.vocab.size, self.vocab.eos_id)
            self._masks[terminals] = cached
        return cached

    def mask_for_tokens(self, ys: Sequence[int]) -> TokenMask:
        return self.mask(self.realized(ys))
