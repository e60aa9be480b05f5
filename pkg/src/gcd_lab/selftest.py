"""End-to-end acceptance suite run by ``gcd selftest``.

Every criterion is a function returning a one-line detail string on success and
raising :class:`CriterionFailed` otherwise. Any other exception (for instance a
corrupted fixture grammar) also fails the criterion, with the error as detail.
Details never contain timings, so two runs with the same inputs print the same
report.
"""

from __future__ import annotations

import itertools
import logging
import time
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Any

import numpy as np

from .chart import (
    SacEngine,
    count_parse_trees,
    earley_next_terminals,
    earley_recognize,
    sac_measure,
)
from .conditioning import Conditioner
from .counters import CounterVector
from .decoding import (
    DecodeConfig,
    RandomLm,
    TableLm,
    beam_decode,
    hard_mask_exact,
    mask_oracle,
    oracle_invariance_check,
    sample_constrained,
)
from .errors import EmptyLanguageError, InfiniteAmbiguityError
from .grammar import (
    Cfg,
    Production,
    SymbolId,
    build_cfg,
    kappa,
    min_yield_lengths,
    nonterminal,
    reduce_grammar,
    terminal,
)
from .models import CostComponent
from .pda import SimulationResult, compile_rtn, simulate_accepts
from .perf import fit_affine, loglog_slope, record_run
from .reachability import build_engine
from .registry import InputRegistry
from .rewrite import (
    RewriteFamily,
    enumerate_family,
    grammar_hash,
    is_pointwise_minimal,
    select_min,
)
from .tokens import Vocab

logger = logging.getLogger(__name__)

CATALAN = (1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786)

# (production index, children); a child is a terminal id or a subtree
ParseTree = tuple[int, tuple[Any, ...]]


class CriterionFailed(Exception):
    pass


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class _Context:
    registry: InputRegistry
    quick: bool
    seed: int

    def grammar(self, name: str) -> Cfg:
        return self.registry.grammar(f"builtin:{name}")


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise CriterionFailed(message)


def random_reduced_grammar(
    rng: np.random.Generator,
    max_nonterminals: int = 4,
    terminals: tuple[str, ...] = ("a", "b"),
    max_rhs: int = 3,
) -> Cfg:
    """Random grammar over ``terminals`` with a nonempty language, reduced."""
    while True:
        n = int(rng.integers(1, max_nonterminals + 1))
        productions = []
        for a in range(n):
            for _ in range(int(rng.integers(1, 4))):
                rhs = []
                for _ in range(int(rng.integers(0, max_rhs + 1))):
                    if rng.random() < 0.5:
                        rhs.append(terminal(int(rng.integers(len(terminals)))))
                    else:
                        rhs.append(nonterminal(int(rng.integers(n))))
                productions.append(Production(nonterminal(a), tuple(rhs)))
        names = [f"N{i}" for i in range(n)]
        g = build_cfg(names, terminals, list(dict.fromkeys(productions)), start=0)
        try:
            return reduce_grammar(g)
        except EmptyLanguageError:
            continue


def live_prefixes(g: Cfg, max_length: int) -> Iterator[tuple[int, ...]]:
    """Terminal prefixes of the language up to ``max_length``, breadth first."""
    level: list[tuple[int, ...]] = [()]
    for length in range(max_length + 1):
        yield from level
        if length == max_length:
            return
        level = [u + (a,) for u in level for a in sorted(earley_next_terminals(g, u).terminals)]


def has_completion(g: Cfg, prefix: Sequence[int], *, exact: bool = False) -> bool:
    """Whether some word of the language starts with ``prefix`` (or equals it, if ``exact``).

    Decided on the grammar alone, with no automaton and no chart. It is a fixpoint
    over which nonterminal derives a stretch between two positions of the prefix
    automaton. The last position loops on every terminal unless ``exact``.
    """
    k = len(prefix)
    positions = range(k + 1)

    def move(q: int, t: int) -> int | None:
        if q < k:
            return q + 1 if prefix[q] == t else None
        return None if exact else k

    ends: list[list[set[int]]] = [[set() for _ in positions] for _ in g.nonterminals]
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            lhs = ends[prod.lhs.index]
            for p in positions:
                reach = {p}
                for sym in prod.rhs:
                    if sym.is_terminal:
                        reach = {q for r in reach if (q := move(r, sym.index)) is not None}
                    else:
                        reach = {q for r in reach for q in ends[sym.index][r]}
                    if not reach:
                        break
                if not reach <= lhs[p]:
                    lhs[p] |= reach
                    changed = True
    return k in ends[g.start.index][0]


def enumerate_parse_trees(g: Cfg, word: Sequence[int]) -> list[ParseTree]:
    """Every parse tree of ``word``, built one by one.

    A tree is ``(production, children)`` where a child is a terminal id or a
    subtree. Exponential; for short words only.

    Raises:
        InfiniteAmbiguityError: a derivable cycle gives infinitely many trees.
    """
    min_yield = min_yield_lengths(g)
    by_lhs = g.productions_by_lhs
    memo: dict[tuple[int, int, int], list[ParseTree]] = {}
    active: set[tuple[int, int, int]] = set()

    def splits(rhs: tuple[SymbolId, ...], i: int, j: int) -> Iterator[tuple[Any, ...]]:
        if not rhs:
            if i == j:
                yield ()
            return
        head, rest = rhs[0], rhs[1:]
        if head.is_terminal:
            if i < j and word[i] == head.index:
                for tail in splits(rest, i + 1, j):
                    yield (head.index, *tail)
            return
        # leave room for the shortest yield of the rest
        need = sum(1 if s.is_terminal else int(min_yield[s.index]) for s in rest)
        for k in range(i + int(min_yield[head.index]), j - need + 1):
            for first in trees(head.index, i, k):
                for tail in splits(rest, k, j):
                    yield (first, *tail)

    def trees(a: int, i: int, j: int) -> list[ParseTree]:
        key = (a, i, j)
        if key in memo:
            return memo[key]
        if key in active:
            raise InfiniteAmbiguityError(g.nonterminals[a])
        active.add(key)
        found = [(p, kids) for p in by_lhs[a] for kids in splits(g.productions[p].rhs, i, j)]
        active.discard(key)
        memo[key] = found
        return found

    return trees(g.start.index, 0, len(word))


# --------------------------------------------------------------------------- criteria


def exact_kappa(ctx: _Context) -> str:
    counts = {}
    for name, expected in (("G1", 8), ("G2", 15)):
        g = ctx.grammar(name)
        states = len(compile_rtn(g).states)
        _check(kappa(g) == expected, f"kappa({name}) = {kappa(g)}, expected {expected}")
        _check(states == expected, f"{name} compiles to {states} states, expected {expected}")
        counts[name] = states
    return f"G1={counts['G1']} G2={counts['G2']} ratio={Fraction(counts['G2'], counts['G1'])}"


def oracle_invariance(ctx: _Context) -> str:
    depth = 6 if ctx.quick else 10
    checked = []
    for left, right in (("G1", "G2"), ("G3", "G4")):
        g1, g2 = ctx.grammar(left), ctx.grammar(right)
        report = oracle_invariance_check(g1, g2, Vocab.singleton(g1), depth)
        if report.mismatch is not None:
            raise CriterionFailed(
                f"{left}/{right} disagree after '{' '.join(report.mismatch.prefix)}'"
            )
        checked.append(f"{left}/{right}:{report.prefixes_checked}")
    return f"depth {depth}, prefixes " + " ".join(checked)


def cross_oracle(ctx: _Context) -> str:
    depth = 5 if ctx.quick else 8
    random_count = 10 if ctx.quick else 100
    rng = np.random.default_rng(ctx.seed)
    grammars = [ctx.grammar(n) for n in ("G1", "G2", "G3", "G4", "SEP")]
    builtin_count = len(grammars)
    grammars += [random_reduced_grammar(rng) for _ in range(random_count)]
    compared = 0
    for gi, g in enumerate(grammars):
        engine = build_engine(g)
        states = {(): engine.init()}
        for u in live_prefixes(g, depth):
            if u:
                states[u] = engine.step_terminal(states[u[:-1]], u[-1])
            got = engine.next_terminals(states[u])
            want = earley_next_terminals(g, u)
            _check(
                got.terminals == want.terminals and got.eos == want.eos,
                f"grammar #{gi} prefix {g.decode(u)}: engine {sorted(got.terminals)}/{got.eos}"
                f" vs Earley {sorted(want.terminals)}/{want.eos}",
            )
            compared += 1
            if gi < builtin_count or len(u) <= 5:
                _completion_agrees(g, u, got.terminals, got.eos)
    return f"{compared} prefixes over {len(grammars)} grammars"


def _completion_agrees(g: Cfg, u: tuple[int, ...], terminals: frozenset[int], eos: bool) -> None:
    member = simulate_accepts(compile_rtn(g), u, 2 * len(u) + 2)
    if member is not SimulationResult.BOUND_EXCEEDED:
        _check((member is SimulationResult.ACCEPT) == eos, f"eos disagrees at {g.decode(u)}")
    _check(has_completion(g, u, exact=True) == eos, f"membership of {g.decode(u)}")
    for a in range(len(g.terminals)):
        live = has_completion(g, u + (a,))
        _check(
            live == (a in terminals),
            f"'{g.terminals[a]}' after {g.decode(u)}: completion {live}, engine {a in terminals}",
        )


def catalan_ambiguity(ctx: _Context) -> str:
    g = ctx.grammar("G4")
    a, b = g.terminal_id("a"), g.terminal_id("b")
    top = 8 if ctx.quick else 12
    exhaustive = 6 if ctx.quick else 8
    for n in range(1, top + 1):
        if n <= exhaustive:
            words = list(itertools.product((a, b), repeat=n))
        else:
            words = [(a,) * n, tuple(a if i % 2 else b for i in range(n))]
        for word in words:
            count = count_parse_trees(g, word)
            _check(count == CATALAN[n - 1], f"n={n}: {count} trees, expected {CATALAN[n - 1]}")
            if n <= exhaustive:
                listed = len(enumerate_parse_trees(g, word))
                _check(listed == count, f"{g.decode(word)}: {listed} trees listed, {count} counted")
    g3 = ctx.grammar("G3")
    for n in range(exhaustive + 1):
        for word in itertools.product(range(len(g3.terminals)), repeat=n):
            count = count_parse_trees(g3, word)
            _check(count == 1, f"G3 {g3.decode(word)}: {count} trees")
    return f"n=1..{top} match Catalan numbers, all words listed to n={exhaustive}, G3 unambiguous"


def forest_density(ctx: _Context) -> str:
    g = ctx.grammar("G4")
    top = 24 if ctx.quick else 64
    series = sac_measure(g, (g.terminal_id("a"),) * top)
    symbols = list(itertools.accumulate(series.nonterminal_series("S")))
    for t in range(1, top + 1):
        _check(
            series.deltas[t - 1] == t * (t - 1) // 2,
            f"step {t}: {series.deltas[t - 1]} packed",
        )
        _check(series.cumulative_packed[t - 1] == comb(t + 1, 3), f"cumulative packed at {t}")
        _check(symbols[t - 1] == comb(t + 1, 2), f"symbol nodes at {t}: {symbols[t - 1]}")
    return f"n<={top}: packed C(n+1,3)={comb(top + 1, 3)}, symbols C(n+1,2)={comb(top + 1, 2)}"


def sac_exponents(ctx: _Context) -> str:
    top = 64 if ctx.quick else 256
    g4 = ctx.grammar("G4")
    series = sac_measure(g4, (g4.terminal_id("a"),) * top)
    ts = list(range(16, top + 1))
    step_slope = loglog_slope(ts, [series.deltas[t - 1] for t in ts])
    cum_slope = loglog_slope(ts, [series.cumulative_packed[t - 1] for t in ts])
    g3 = ctx.grammar("G3")
    fast = sac_measure(g3, (g3.terminal_id("a"),) * top, SacEngine.FAST)
    fast_slope = loglog_slope(ts, [fast.deltas[t - 1] for t in ts])
    _check(abs(step_slope - 2.0) <= 0.1, f"per-step slope {step_slope:.3f}")
    _check(abs(cum_slope - 3.0) <= 0.1, f"cumulative slope {cum_slope:.3f}")
    _check(abs(fast_slope) <= 0.1, f"fast path slope {fast_slope:.3f}")
    return f"per-step {step_slope:.3f}, cumulative {cum_slope:.3f}, fast path {fast_slope:.3f}"


def separation(ctx: _Context) -> str:
    g = ctx.grammar("SEP")
    vocab = Vocab.singleton(g)
    lm = ctx.registry.lm("builtin:SEP", vocab)
    b = vocab.token_id("b")
    conditioner = Conditioner(lm, g, vocab, horizon=3)
    masked = hard_mask_exact(lm.probs(()), conditioner.mask(()))  # type: ignore[arg-type]
    doob = conditioner.doob_next_dist(())
    _check(masked[b] == Fraction(2, 5), f"masked P(b) = {masked[b]}")
    _check(doob[b] == Fraction(1, 16), f"conditioned P(b) = {doob[b]}")

    samples = 20_000 if ctx.quick else 100_000
    rng = np.random.default_rng(ctx.seed)
    oracle = mask_oracle(g, vocab)
    cfg = DecodeConfig(max_len=3, seed=ctx.seed)
    hits = sum(
        sample_constrained(lm, g, vocab, cfg, oracle=oracle, rng=rng).tokens[0] == b
        for _ in range(samples)
    )
    doob_hits = sum(conditioner.sample(rng)[0] == b for _ in range(samples))
    mc_masked, mc_doob = hits / samples, doob_hits / samples
    _check(abs(mc_masked - 0.4) <= 0.01, f"Monte Carlo masked P(b) = {mc_masked:.4f}")
    _check(abs(mc_doob - 0.0625) <= 0.005, f"Monte Carlo conditioned P(b) = {mc_doob:.4f}")
    return f"exact 2/5 vs 1/16; Monte Carlo {mc_masked:.4f} vs {mc_doob:.4f} (n={samples})"


def constant_survival_lm(vocab: Vocab) -> TableLm:
    """Model on ``a^n b^n`` under which every admissible first token has survival 1."""
    a, b, eos = vocab.token_id("a"), vocab.token_id("b"), vocab.eos_id

    def row(**weights: int) -> list[Fraction]:
        out = [Fraction(0)] * vocab.size
        for index, w in ((a, weights.get("a", 0)), (b, weights.get("b", 0))):
            out[index] = Fraction(w)
        out[eos] = Fraction(weights.get("eos", 0))
        return out

    table = {(): row(a=5, b=2, eos=3), (a,): row(b=1), (a, b): row(eos=1)}
    return TableLm(vocab.size, table, row(a=1, b=1, eos=1))


def distortion_bounds(ctx: _Context) -> str:
    g = ctx.grammar("G1")
    vocab = Vocab.singleton(g)
    models = 100 if ctx.quick else 1000
    oracle = mask_oracle(g, vocab)
    reports = 0
    vacuous = 0
    for seed in range(models):
        conditioner = Conditioner(RandomLm(vocab.size, seed), g, vocab, horizon=6, oracle=oracle)
        for prefix in conditioner.live_prefixes():
            report = conditioner.distortion(prefix)
            _check(
                not report.violations,
                f"model {seed} prefix {report.prefix}: {', '.join(report.violations)} bound",
            )
            reports += 1
            vacuous += report.vacuous
    flat = Conditioner(constant_survival_lm(vocab), g, vocab, horizon=6).distortion(())
    _check(flat.kl == 0.0, f"constant survival gives KL {flat.kl}")
    return f"{reports} prefixes over {models} models, {vacuous} vacuous; constant-h KL=0"


def soundness(ctx: _Context) -> str:
    per_grammar = 200 if ctx.quick else 1000
    checked = 0
    for name in ("G1", "G2", "G3", "G4", "SEP"):
        g = ctx.grammar(name)
        vocab = Vocab.singleton(g)
        lm = RandomLm(vocab.size, ctx.seed)
        oracle = mask_oracle(g, vocab)
        rng = np.random.default_rng(ctx.seed)
        cfg = DecodeConfig(max_len=32, seed=ctx.seed)
        for _ in range(per_grammar):
            result = sample_constrained(lm, g, vocab, cfg, oracle=oracle, rng=rng)
            if not result.terminated:
                continue
            word = g.encode(result.realized(vocab))
            _check(earley_recognize(g, word), f"{name} sample {result.realized(vocab)} rejected")
            checked += 1
    return f"{checked} terminated samples accepted"


def bitset_overhead(ctx: _Context) -> str:
    scanned = {}
    for name, expected in (("G1", 8), ("G2", 15)):
        g = ctx.grammar(name)
        run = record_run(g, g.encode("a a b b".split()), bitset=True)
        per_step = {c.bitset_slots_scanned for c in run.series}
        _check(per_step == {expected}, f"{name} scans {sorted(per_step)} slots per step")
        scanned[name] = expected
    return f"slots per step G1={scanned['G1']} G2={scanned['G2']}"


def beam_additivity(ctx: _Context) -> str:
    g = ctx.grammar("G1")
    vocab = Vocab.singleton(g)
    lm = RandomLm(vocab.size, ctx.seed)
    totals = []
    for beam in (1, 2, 4, 8):
        result = beam_decode(lm, g, vocab, DecodeConfig(beam=beam, max_len=8, seed=ctx.seed))
        summed = CounterVector.total([e.counters for e in result.expansions])
        _check(summed == result.total, f"B={beam}: total differs from per-hypothesis sum")
        totals.append(result.total.engine_edges_touched)
    return "engine edges by B=1,2,4,8: " + ",".join(map(str, totals))


def rewriter(ctx: _Context) -> str:
    g1, g2 = ctx.grammar("G1"), ctx.grammar("G2")
    vocab = Vocab.singleton(g2)
    depth = 6 if ctx.quick else 8
    family = enumerate_family(g2, 2)
    for member in family:
        report = oracle_invariance_check(g2, member.grammar, vocab, depth)
        _check(report.ok, f"member '{member.describe()}' changes the language")
    workload = [("a",) * k + ("b",) * k for k in range(1, 5)]
    selection = select_min(
        RewriteFamily.of([g1, g2]), workload, (CostComponent.SAC, CostComponent.KAPPA)
    )
    _check(selection.winner.member.digest == grammar_hash(g1), "G1 was not selected over G2")
    _check(is_pointwise_minimal(selection), "winner is dominated")
    best = min(m.kappa for m in family)
    return f"{len(family)} members invariant to depth {depth}, min kappa {best}; G1 selected"


def fit_recovery(ctx: _Context) -> str:
    rng = np.random.default_rng(ctx.seed)
    s = np.repeat(np.arange(1.0, 21.0), 2)
    t = 3.0 * s + 7.0 + rng.normal(0.0, 0.1, size=s.size)
    fit = fit_affine(s, t)
    _check(abs(fit.a - 3.0) <= 0.15 and abs(fit.b - 7.0) <= 0.35, f"a={fit.a:.4f} b={fit.b:.4f}")
    return f"a={fit.a:.4f} b={fit.b:.4f} R^2={fit.r_squared:.6f}"


CRITERIA: tuple[tuple[str, Callable[[_Context], str]], ...] = (
    ("exact kappa", exact_kappa),
    ("oracle invariance", oracle_invariance),
    ("cross-oracle equivalence", cross_oracle),
    ("Catalan ambiguity", catalan_ambiguity),
    ("forest density", forest_density),
    ("SAC exponents", sac_exponents),
    ("separation numbers", separation),
    ("distortion bounds", distortion_bounds),
    ("soundness", soundness),
    ("bitset overhead", bitset_overhead),
    ("beam additivity", beam_additivity),
    ("rewriter safety and selection", rewriter),
    ("fit recovery", fit_recovery),
)


def run_selftest(
    registry: InputRegistry | None = None,
    *,
    quick: bool = False,
    seed: int = 0,
    only: set[int] | None = None,
) -> list[CriterionResult]:
    """Run the acceptance criteria in order; ``only`` selects criterion numbers."""
    ctx = _Context(registry or InputRegistry(), quick, seed)
    results = []
    for number, (name, check) in enumerate(CRITERIA, start=1):
        if only is not None and number not in only:
            continue
        started = time.perf_counter()
        try:
            detail = check(ctx)
            passed = True
        except CriterionFailed as e:
            detail, passed = str(e), False
        except Exception as e:  # noqa: BLE001
            detail, passed = f"{type(e).__name__}: {e}", False
        elapsed = time.perf_counter() - started
        logger.info("criterion %d (%s): %s", number, name, "pass" if passed else "FAIL")
        results.append(CriterionResult(number, name, passed, detail, elapsed))
    return results


def all_passed(results: list[CriterionResult]) -> bool:
    return bool(results) and all(r.passed for r in results)
