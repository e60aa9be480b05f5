"""Exact grammar conditioning by survival reweighting, and masking distortion diagnostics.

Survival ``h(prefix)`` is the probability, under the base model, that the
sequence terminates with eos within the horizon and realizes a string of the
grammar. Reweighting next-token probabilities by survival ratios yields the
exact conditional sampler; hard masking only drops inadmissible tokens, and the
gap between the two is bounded by the spread of survival over admissible tokens.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .decoding import ToyLm, draw, hard_mask, hard_mask_exact, mask_oracle
from .errors import BudgetExceededError, ConditioningOnNullError
from .grammar import Cfg
from .tokens import MaskOracle, TokenMask, Vocab, realize

logger = logging.getLogger(__name__)

Number = Fraction | float
Prefix = tuple[int, ...]


@dataclass(frozen=True)
class DistortionReport:
    """One-step comparison of the hard-masked and the conditioned next-token law."""

    prefix: tuple[str, ...]
    horizon: int
    admissible: tuple[str, ...]
    survival: tuple[float, ...]
    q: tuple[float, ...]
    p_conditioned: tuple[float, ...]
    h_min: float
    h_max: float
    spread: float
    kl: float
    tv: float
    kl_bound: float
    tv_bound: float
    violations: tuple[str, ...] = ()

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.spread)

    def to_json(self) -> dict[str, object]:
        def num(x: float) -> float | str:
            return "inf" if math.isinf(x) else x

        return {
            "prefix": " ".join(self.prefix),
            "horizon": self.horizon,
            "admissible": list(self.admissible),
            "survival": dict(zip(self.admissible, self.survival)),
            "q": list(self.q),
            "p_conditioned": list(self.p_conditioned),
            "h_min": self.h_min,
            "h_max": self.h_max,
            "spread": num(self.spread),
            "kl": num(self.kl),
            "tv": self.tv,
            "kl_bound": num(self.kl_bound),
            "tv_bound": num(self.tv_bound),
            "vacuous": self.vacuous,
            "violations": list(self.violations),
        }


class Conditioner:
    """Survival, conditioned distributions and distortion for one (model, grammar, vocab).

    Table models are handled in exact rational arithmetic, seeded random models in
    floating point. Survival values are memoized per token prefix.

    Raises:
        BudgetExceededError: ``|V| ** horizon`` exceeds ``budget``.
    """

    def __init__(
        self,
        lm: ToyLm,
        g: Cfg,
        vocab: Vocab,
        horizon: int,
        *,
        budget: int = 10**7,
        tolerance: float | None = None,
        oracle: MaskOracle | None = None,
    ) -> None:
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        if vocab.size**horizon > budget:
            raise BudgetExceededError(
                f"|V|^T = {vocab.size}^{horizon} exceeds the enumeration budget {budget}"
            )
        self.lm = lm
        self.vocab = vocab
        self.horizon = horizon
        self.exact = lm.exact
        self.tolerance = tolerance if tolerance is not None else (1e-12 if lm.exact else 1e-9)
        self.oracle = oracle or mask_oracle(g, vocab)
        self._zero: Number = Fraction(0) if self.exact else 0.0
        self._one: Number = Fraction(1) if self.exact else 1.0
        self._h: dict[Prefix, Number] = {}
        self._doob: dict[Prefix, tuple[Number, ...]] = {}

    def _probs(self, prefix: Prefix) -> Sequence[Number]:
        if self.exact:
            return self.lm.probs(prefix)  # type: ignore[return-value]
        return [float(p) for p in self.lm.float_probs(prefix)]

    def mask(self, prefix: Prefix) -> TokenMask:
        return self.oracle.mask_for_tokens(prefix)

    def survival(self, prefix: Sequence[int]) -> Number:
        """Probability of terminating in the language within the horizon."""
        prefix = tuple(prefix)
        eos = self.vocab.eos_id
        if eos in prefix:
            end = prefix.index(eos)
            if end != len(prefix) - 1 or len(prefix) > self.horizon:
                return self._zero
            return self._one if self.mask(prefix[:-1]).eos else self._zero
        if len(prefix) >= self.horizon:
            return self._zero
        cached = self._h.get(prefix)
        if cached is not None:
            return cached
        mask = self.mask(prefix)
        total = self._zero
        if mask.count:
            probs = self._probs(prefix)
            for v in mask.admissible:
                if probs[v] == 0:
                    continue
                h_next = self._one if v == eos else self.survival(prefix + (v,))
                total = total + probs[v] * h_next
        self._h[prefix] = total
        return total

    def doob_next_dist(self, prefix: Sequence[int]) -> tuple[Number, ...]:
        """Exact conditional next-token distribution ``p(v|u) h(uv) / h(u)``.

        Raises:
            ConditioningOnNullError: ``h(prefix)`` is zero.
        """
        prefix = tuple(prefix)
        cached = self._doob.get(prefix)
        if cached is not None:
            return cached
        h0 = self.survival(prefix)
        if h0 == 0:
            raise ConditioningOnNullError(
                f"prefix '{' '.join(realize(self.vocab, prefix))}' has zero survival "
                f"within horizon {self.horizon}"
            )
        probs = self._probs(prefix)
        dist = tuple(
            probs[v] * self.survival(prefix + (v,)) / h0 for v in range(self.vocab.size)
        )
        self._doob[prefix] = dist
        return dist

    def masked_next_dist(self, prefix: Sequence[int]) -> tuple[Number, ...]:
        prefix = tuple(prefix)
        mask = self.mask(prefix)
        if self.exact:
            return hard_mask_exact(self.lm.probs(prefix), mask)  # type: ignore[arg-type]
        return tuple(float(x) for x in hard_mask(self.lm.logits(prefix), mask))

    def consistency_gap(self, prefix: Sequence[int]) -> float:
        """``|h(u) - sum_v p(v|u) h(uv)|`` for a non-terminated prefix below the horizon."""
        prefix = tuple(prefix)
        probs = self._probs(prefix)
        total = sum(
            (probs[v] * self.survival(prefix + (v,)) for v in range(self.vocab.size)),
            self._zero,
        )
        return abs(float(self.survival(prefix) - total))

    def distortion(self, prefix: Sequence[int]) -> DistortionReport:
        """KL and total variation between masking and conditioning, with their spread bounds.

        When some admissible token has zero survival the spread is infinite and the
        bounds are reported as vacuous.

        Raises:
            ConditioningOnNullError: ``h(prefix)`` is zero.
        """
        prefix = tuple(prefix)
        p_e = self.doob_next_dist(prefix)
        q = self.masked_next_dist(prefix)
        mask = self.mask(prefix)
        admissible = mask.admissible
        h = [self.survival(prefix + (v,)) for v in admissible]
        h_min, h_max = min(h), max(h)
        spread = math.inf if h_min == 0 else float(Fraction(h_max) / Fraction(h_min))

        kl = 0.0
        for qv, pv in zip(q, p_e):
            if qv == 0:
                continue
            if pv == 0:
                kl = math.inf
                break
            kl += float(qv) * math.log(float(Fraction(qv) / Fraction(pv)))
        tv = float(sum(abs(Fraction(a) - Fraction(b)) for a, b in zip(q, p_e)) / 2)

        kl_bound = math.log(spread) if not math.isinf(spread) else math.inf
        tv_bound = math.sqrt(0.5 * kl_bound) if not math.isinf(kl_bound) else math.inf
        violations = []
        if not math.isinf(spread):
            if kl > kl_bound + self.tolerance:
                violations.append("kl")
            if tv > tv_bound + self.tolerance:
                violations.append("tv")
        if violations:
            logger.warning("distortion bound violated at prefix %r: %s", prefix, violations)

        names = self.vocab.names
        return DistortionReport(
            prefix=realize(self.vocab, prefix),
            horizon=self.horizon,
            admissible=tuple(names[v] for v in admissible),
            survival=tuple(float(x) for x in h),
            q=tuple(float(x) for x in q),
            p_conditioned=tuple(float(x) for x in p_e),
            h_min=float(h_min),
            h_max=float(h_max),
            spread=spread,
            kl=kl,
            tv=tv,
            kl_bound=kl_bound,
            tv_bound=tv_bound,
            violations=tuple(violations),
        )

    def live_prefixes(self) -> Iterator[Prefix]:
        """Non-terminated prefixes below the horizon with positive survival, depth first."""
        stack: list[Prefix] = [()]
        while stack:
            prefix = stack.pop()
            if self.survival(prefix) == 0:
                continue
            yield prefix
            for v in reversed(self.mask(prefix).admissible):
                if v != self.vocab.eos_id and len(prefix) + 1 < self.horizon:
                    stack.append(prefix + (v,))

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        """Draw one sequence from the exact conditioned process."""
        ys: list[int] = []
        while True:
            dist = np.asarray([float(p) for p in self.doob_next_dist(ys)])
            y = draw(dist, rng)
            ys.append(y)
            if y == self.vocab.eos_id:
                return tuple(ys)


def survival(lm: ToyLm, g: Cfg, vocab: Vocab, prefix: Sequence[int], horizon: int) -> Number:
    return Conditioner(lm, g, vocab, horizon).survival(prefix)


def doob_next_dist(
    lm: ToyLm, g: Cfg, vocab: Vocab, prefix: Sequence[int], horizon: int
) -> tuple[Number, ...]:
    return Conditioner(lm, g, vocab, horizon).doob_next_dist(prefix)


def distortion(
    lm: ToyLm, g: Cfg, vocab: Vocab, prefix: Sequence[int], horizon: int
) -> DistortionReport:
    return Conditioner(lm, g, vocab, horizon).distortion(prefix)


def sample_conditioned(
    lm: ToyLm, g: Cfg, vocab: Vocab, horizon: int, count: int, seed: int = 0
) -> list[tuple[int, ...]]:
    """``count`` exact conditioned samples from one seeded stream."""
    conditioner = Conditioner(lm, g, vocab, horizon)
    rng = np.random.default_rng(seed)
    return [conditioner.sample(rng) for _ in range(count)]
