"""Toy language models, hard masking, constrained sampling and beam search."""

from __future__ import annotations

import json
import logging
import math
from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .counters import CounterVector
from .errors import DeadEndError, LmFileError, VocabError
from .grammar import Cfg, reduce_grammar
from .models import ExpansionRecord, LmFile, StepTraceRecord
from .reachability import EngineState, build_engine
from .tokens import MaskOracle, TokenMask, Vocab, admissible_tokens, bind_vocab, realize

logger = logging.getLogger(__name__)

Prefix = tuple[int, ...]


# --------------------------------------------------------------------------- toy models


class ToyLm(ABC):
    """Autoregressive next-token model over a fixed vocabulary size."""

    exact = False

    def __init__(self, vocab_size: int) -> None:
        self.vocab_size = vocab_size

    @abstractmethod
    def probs(self, prefix: Prefix) -> Sequence[Fraction] | np.ndarray:
        """Next-token distribution after ``prefix``."""

    def float_probs(self, prefix: Prefix) -> np.ndarray:
        return np.asarray([float(p) for p in self.probs(prefix)], dtype=float)

    def logits(self, prefix: Prefix) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.float_probs(prefix))


class TableLm(ToyLm):
    """Table-driven model with exact rational probabilities.

    Rows are normalized on load; prefixes absent from the table use ``default``.
    """

    exact = True

    def __init__(
        self,
        vocab_size: int,
        table: dict[Prefix, Sequence[Fraction]],
        default: Sequence[Fraction],
    ) -> None:
        super().__init__(vocab_size)
        self.table = {k: _normalize(v, vocab_size) for k, v in table.items()}
        self.default = _normalize(default, vocab_size)

    def probs(self, prefix: Prefix) -> tuple[Fraction, ...]:
        return self.table.get(prefix, self.default)


class RandomLm(ToyLm):
    """Seeded model whose logits are a pure function of ``(seed, prefix)``."""

    def __init__(self, vocab_size: int, seed: int) -> None:
        super().__init__(vocab_size)
        self.seed = seed

    def logits(self, prefix: Prefix) -> np.ndarray:
        rng = np.random.default_rng([self.seed, len(prefix), *prefix])
        return rng.normal(size=self.vocab_size)

    def probs(self, prefix: Prefix) -> np.ndarray:
        z = self.logits(prefix)
        w = np.exp(z - z.max())
        return w / w.sum()

    def float_probs(self, prefix: Prefix) -> np.ndarray:
        return self.probs(prefix)


def _normalize(row: Sequence[Fraction], width: int) -> tuple[Fraction, ...]:
    if len(row) != width:
        raise LmFileError(f"distribution has {len(row)} entries, vocabulary has {width}")
    total = sum(row, Fraction(0))
    if total <= 0:
        raise LmFileError("distribution has no probability mass")
    return tuple(Fraction(p) / total for p in row)


def table_lm_from_file(lm: LmFile, vocab: Vocab) -> TableLm:
    """Bind a parsed model file to ``vocab``.

    Raises:
        LmFileError: no default row, unknown token names or width mismatch.
    """
    if lm.default is None:
        raise LmFileError("model file declares no default distribution")
    table: dict[Prefix, Sequence[Fraction]] = {}
    for key, row in lm.table.items():
        try:
            prefix = tuple(vocab.token_id(name) for name in key.split())
        except VocabError as e:
            raise LmFileError(f"table key '{key}': {e}") from e
        table[prefix] = [Fraction(p) for p in row]
    return TableLm(vocab.size, table, [Fraction(p) for p in lm.default])


def parse_lm_file(text: str) -> LmFile:
    """Parse model JSON keeping decimal literals exact."""
    try:
        data = json.loads(text, parse_float=Decimal)
        return LmFile.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise LmFileError(f"invalid model file: {e}") from e


def load_lm(path: Path, vocab: Vocab) -> TableLm:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise LmFileError(f"cannot read model file {path}: {e}") from e
    return table_lm_from_file(parse_lm_file(text), vocab)


# --------------------------------------------------------------------------- masking


def softmax(logits: np.ndarray) -> np.ndarray:
    finite = np.isfinite(logits)
    out = np.zeros(len(logits))
    if finite.any():
        w = np.exp(logits[finite] - logits[finite].max())
        out[finite] = w / w.sum()
    return out


def hard_mask(logits: np.ndarray, mask: TokenMask | np.ndarray) -> np.ndarray:
    """Softmax restricted to admissible entries; all others are exactly zero.

    Inadmissible entries are excluded from the normalizing sum rather than
    offset by a sentinel.

    Raises:
        DeadEndError: no admissible entry carries probability mass.
    """
    allowed = mask.as_array() if isinstance(mask, TokenMask) else np.asarray(mask, dtype=bool)
    if not allowed.any():
        raise DeadEndError("mask admits no token")
    vals = np.asarray(logits, dtype=float)[allowed]
    finite = np.isfinite(vals)
    if not finite.any():
        raise DeadEndError("no admissible probability mass remains")
    w = np.zeros(len(vals))
    w[finite] = np.exp(vals[finite] - vals[finite].max())
    out = np.zeros(len(allowed))
    out[allowed] = w / w.sum()
    return out


def hard_mask_exact(probs: Sequence[Fraction], mask: TokenMask) -> tuple[Fraction, ...]:
    """Exact renormalized restriction of a rational distribution."""
    total = sum((p for p, ok in zip(probs, mask.bits) if ok), Fraction(0))
    if total == 0:
        raise DeadEndError("no admissible probability mass remains")
    return tuple(p / total if ok else Fraction(0) for p, ok in zip(probs, mask.bits))


# --------------------------------------------------------------------------- sampling


@dataclass(frozen=True)
class DecodeConfig:
    beam: int = 1
    max_len: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beam < 1:
            raise ValueError("beam width must be at least 1")
        if self.max_len < 1:
            raise ValueError("max length must be at least 1")


@dataclass(frozen=True)
class StepTrace:
    t: int
    admissible: int
    token: int
    p_pre: float
    p_post: float
    counters: CounterVector = field(default_factory=CounterVector)

    def to_record(self, vocab: Vocab) -> StepTraceRecord:
        return StepTraceRecord(
            t=self.t,
            admissible=self.admissible,
            token=self.token,
            token_name=vocab.tokens[self.token].name,
            p_pre=self.p_pre,
            p_post=self.p_post,
            counters=self.counters.as_dict(),
        )


@dataclass(frozen=True)
class SampleResult:
    tokens: tuple[int, ...]
    traces: tuple[StepTrace, ...]
    terminated: bool

    def realized(self, vocab: Vocab) -> tuple[str, ...]:
        return realize(vocab, self.tokens)


def draw(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw that never returns a zero-probability index."""
    cdf = np.cumsum(dist)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if idx >= len(dist) or dist[idx] <= 0:
        idx = int(np.flatnonzero(dist > 0)[-1])
    return idx


def mask_oracle(g: Cfg, vocab: Vocab) -> MaskOracle:
    return MaskOracle(build_engine(reduce_grammar(g)), vocab)


def sample_constrained(
    lm: ToyLm,
    g: Cfg,
    vocab: Vocab,
    cfg: DecodeConfig,
    *,
    oracle: MaskOracle | None = None,
    rng: np.random.Generator | None = None,
) -> SampleResult:
    """Draw one hard-masked sample, stopping at eos or after ``cfg.max_len`` tokens.

    Outputs that hit the length limit are returned with ``terminated=False``.

    Raises:
        DeadEndError: a live prefix has no admissible probability mass.
    """
    oracle = oracle or mask_oracle(g, vocab)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    realizations = bind_vocab(vocab, oracle.engine.grammar)
    ys: list[int] = []
    terminals: tuple[int, ...] = ()
    traces: list[StepTrace] = []
    for t in range(1, cfg.max_len + 1):
        mask = oracle.mask(terminals)
        logits = lm.logits(tuple(ys))
        q = hard_mask(logits, mask)
        y = draw(q, rng)
        pre = softmax(logits)
        traces.append(StepTrace(t, mask.count, y, float(pre[y]), float(q[y]), mask.work))
        ys.append(y)
        if y == vocab.eos_id:
            return SampleResult(tuple(ys), tuple(traces), True)
        terminals = terminals + realizations[y]
    return SampleResult(tuple(ys), tuple(traces), False)


def sample_many(
    lm: ToyLm, g: Cfg, vocab: Vocab, cfg: DecodeConfig, count: int
) -> list[SampleResult]:
    """``count`` samples from one seeded stream, sharing a mask memo."""
    oracle = mask_oracle(g, vocab)
    rng = np.random.default_rng(cfg.seed)
    return [sample_constrained(lm, g, vocab, cfg, oracle=oracle, rng=rng) for _ in range(count)]


# --------------------------------------------------------------------------- beam search


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    finished: bool
    state: EngineState


@dataclass(frozen=True)
class Expansion:
    """Symbolic work spent on one hypothesis at one step."""

    t: int
    tokens: tuple[int, ...]
    counters: CounterVector
    phase: str = "mask"

    def to_record(self, vocab: Vocab) -> ExpansionRecord:
        return ExpansionRecord(
            t=self.t,
            phase=self.phase,
            tokens=[vocab.tokens[y].name for y in self.tokens],
            counters=self.counters.as_dict(),
        )


@dataclass(frozen=True)
class BeamResult:
    hypotheses: tuple[Hypothesis, ...]
    expansions: tuple[Expansion, ...]
    total: CounterVector


def beam_decode(lm: ToyLm, g: Cfg, vocab: Vocab, cfg: DecodeConfig) -> BeamResult:
    """Beam search over hard-masked log-probabilities.

    Every hypothesis owns its engine state; ties are broken by token sequence.
    """
    engine = build_engine(reduce_grammar(g))
    realizations = bind_vocab(vocab, engine.grammar)
    beams = [Hypothesis((), 0.0, False, engine.init())]
    expansions: list[Expansion] = []
    total = CounterVector()

    for t in range(1, cfg.max_len + 1):
        if all(h.finished for h in beams):
            break
        candidates: list[tuple[float, tuple[int, ...], Hypothesis, int | None]] = []
        for h in beams:
            if h.finished:
                candidates.append((h.logprob, h.tokens, h, None))
                continue
            mask = admissible_tokens(engine, h.state, vocab)
            expansions.append(Expansion(t, h.tokens, mask.work))
            total = total + mask.work
            q = hard_mask(lm.logits(h.tokens), mask)
            for y in mask.admissible:
                if q[y] > 0:
                    candidates.append((h.logprob + math.log(q[y]), h.tokens + (y,), h, y))
        if not candidates:
            raise DeadEndError("every hypothesis is dead")
        candidates.sort(key=lambda c: (-c[0], c[1]))

        beams = []
        for logprob, tokens, parent, y in candidates[: cfg.beam]:
            if y is None:
                beams.append(parent)
                continue
            state = parent.state
            if y == vocab.eos_id:
                beams.append(Hypothesis(tokens, logprob, True, state))
                continue
            work = CounterVector()
            for a in realizations[y]:
                state = engine.step_terminal(state, a)
                work = work + state.work
            expansions.append(Expansion(t, tokens, work, "advance"))
            total = total + work
            beams.append(Hypothesis(tokens, logprob, False, state))

    return BeamResult(tuple(beams), tuple(expansions), total)


# --------------------------------------------------------------------------- invariance


@dataclass(frozen=True)
class Mismatch:
    prefix: tuple[str, ...]
    only_first: tuple[str, ...]
    only_second: tuple[str, ...]

    @property
    def witness(self) -> tuple[str, ...]:
        """Shortest realized extension on which the two grammars disagree."""
        names = self.only_first or self.only_second
        return self.prefix + (names[0],)


@dataclass(frozen=True)
class InvarianceReport:
    max_length: int
    prefixes_checked: int
    mismatch: Mismatch | None = None

    @property
    def ok(self) -> bool:
        return self.mismatch is None


def oracle_invariance_check(g1: Cfg, g2: Cfg, vocab: Vocab, max_length: int) -> InvarianceReport:
    """Compare admissible masks of two grammars over all live token prefixes.

    Prefixes are enumerated breadth first up to ``max_length`` tokens and
    deduplicated by realized terminal string; the first differing mask ends
    the search.
    """
    first, second = mask_oracle(g1, vocab), mask_oracle(g2, vocab)
    queue: deque[tuple[int, ...]] = deque([()])
    seen: set[tuple[str, ...]] = {()}
    checked = 0
    while queue:
        ys = queue.popleft()
        m1 = first.mask_for_tokens(ys)
        m2 = second.mask_for_tokens(ys)
        checked += 1
        if m1.bits != m2.bits:
            names = vocab.names
            mismatch = Mismatch(
                prefix=realize(vocab, ys),
                only_first=tuple(names[i] for i in m1.admissible if not m2.bits[i]),
                only_second=tuple(names[i] for i in m2.admissible if not m1.bits[i]),
            )
            logger.info("mask mismatch after %r", " ".join(mismatch.prefix))
            return InvarianceReport(max_length, checked, mismatch)
        if len(ys) >= max_length:
            continue
        for y in m1.admissible:
            if y == vocab.eos_id:
                continue
            child = ys + (y,)
            key = realize(vocab, child)
            if key not in seen:
                seen.add(key)
                queue.append(child)
    return InvarianceReport(max_length, checked)
