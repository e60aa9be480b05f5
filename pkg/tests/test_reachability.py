import numpy as np
import pytest

from gcd_lab.chart import earley_next_terminals
from gcd_lab.grammar import kappa
from gcd_lab.models import Worklist
from gcd_lab.pda import BOTTOM, compile_rtn
from gcd_lab.reachability import BitsetScanEngine, build_engine
from gcd_lab.selftest import has_completion, live_prefixes, random_reduced_grammar


def names(g, terminals):
    return {g.terminals[a] for a in terminals}


def test_g1_next_terminals(g1):
    engine = build_engine(g1)
    a, b = g1.terminal_id("a"), g1.terminal_id("b")

    s = engine.init()
    nxt = engine.next_terminals(s)
    assert names(g1, nxt.terminals) == {"a"} and nxt.eos

    s = engine.step_terminal(s, a)
    nxt = engine.next_terminals(s)
    assert names(g1, nxt.terminals) == {"a", "b"} and not nxt.eos

    s = engine.step_terminal(s, b)
    nxt = engine.next_terminals(s)
    assert nxt.terminals == frozenset() and nxt.eos
    assert s.consumed == 2


def test_inadmissible_terminal_kills_state(g1):
    engine = build_engine(g1)
    s = engine.step_terminal(engine.init(), g1.terminal_id("b"))
    assert not s.live
    assert s.configs.is_empty


def test_step_does_not_mutate_parent(g1):
    engine = build_engine(g1)
    s0 = engine.init()
    before = s0.configs.digest()
    engine.step_terminal(s0, g1.terminal_id("a"))
    assert s0.configs.digest() == before


def test_deep_stacks_are_represented(g1):
    engine = build_engine(g1)
    s = engine.step_many(engine.init(), g1.encode("a" * 30))
    assert s.live
    assert s.consumed == 30
    stacks = {stack for state, stack in s.configs.configurations(40) if len(stack) > 30}
    assert stacks


def test_accepting_configuration_membership(g1):
    engine = build_engine(g1)
    s = engine.init()
    assert s.configs.contains(engine.npda.accepting, (BOTTOM,))
    assert (engine.npda.accepting, (BOTTOM,)) in set(s.configs.configurations(0))


def test_worklist_order_does_not_change_result(g2, g4):
    for g, word in ((g2, "aabb"), (g4, "abba")):
        fifo = build_engine(g, Worklist.FIFO)
        lifo = build_engine(g, Worklist.LIFO)
        sf = fifo.init()
        sl = lifo.init()
        assert sf.configs.edges == sl.configs.edges
        for a in g.encode(word):
            sf, sl = fifo.step_terminal(sf, a), lifo.step_terminal(sl, a)
            assert sf.configs.edges == sl.configs.edges


def test_g4_always_open(g4):
    engine = build_engine(g4)
    s = engine.init()
    for a in g4.encode("abbab"):
        s = engine.step_terminal(s, a)
        nxt = engine.next_terminals(s)
        assert names(g4, nxt.terminals) == {"a", "b"} and nxt.eos


def assert_oracles_agree(g, depth):
    """Engine sets equal the Earley sets and the completion fixpoint, both ways."""
    engine = build_engine(g)
    states = {(): engine.init()}
    for u in live_prefixes(g, depth):
        if u:
            states[u] = engine.step_terminal(states[u[:-1]], u[-1])
        got = engine.next_terminals(states[u])
        want = earley_next_terminals(g, u)
        assert (got.terminals, got.eos) == (want.terminals, want.eos), g.decode(u)
        completions = {a for a in range(len(g.terminals)) if has_completion(g, u + (a,))}
        assert got.terminals == completions, g.decode(u)
        assert got.eos == has_completion(g, u, exact=True), g.decode(u)


def test_agrees_with_earley(g1, g2, g3, g4, sep, random_grammars):
    for g in (g1, g2, g3, g4, sep):
        assert_oracles_agree(g, 8)
    for g in random_grammars:
        assert_oracles_agree(g, 5)


@pytest.mark.slow
def test_agrees_with_earley_on_100_grammars():
    rng = np.random.default_rng(4321)
    for _ in range(100):
        assert_oracles_agree(random_reduced_grammar(rng), 8)


def test_completion_fixpoint(g1, sep):
    a, b = g1.terminal_id("a"), g1.terminal_id("b")
    assert has_completion(g1, (a, a, b))
    assert not has_completion(g1, (a, b, a))
    assert not has_completion(g1, (a, a, b), exact=True)
    assert has_completion(g1, (), exact=True)
    assert not has_completion(sep, sep.encode("bb"))
    assert has_completion(sep, sep.encode("ba"), exact=True)


def test_node_growth_per_step_is_bounded_by_return_symbols(g1, g3, g4):
    for g, word in ((g1, "aaaabbbb"), (g3, "abbabaab"), (g4, "aabbabab")):
        engine = build_engine(g)
        returns = len(compile_rtn(g).stack_alphabet) - 1
        s = engine.init()
        counts = [s.configs.node_count]
        for a in g.encode(word):
            s = engine.step_terminal(s, a)
            counts.append(s.configs.node_count)
        assert s.live
        assert counts[0] <= engine.control_count + 1 + returns
        assert all(after - before <= returns for before, after in zip(counts, counts[1:]))
        assert counts[-1] <= engine.control_count + 1 + returns * (len(word) + 1)


def test_step_work_is_counted(g2):
    engine = build_engine(g2)
    s = engine.step_terminal(engine.init(), g2.terminal_id("a"))
    assert s.work.engine_edges_touched > 0
    assert s.work.saturation_iterations > 0


def test_bitset_engine_scans_kappa_slots(g1, g2):
    for g in (g1, g2):
        engine = build_engine(g, bitset=True)
        assert isinstance(engine, BitsetScanEngine)
        plain = build_engine(g)
        s = engine.step_terminal(engine.init(), g.terminal_id("a"))
        nxt = engine.next_terminals(s)
        assert nxt.work.bitset_slots_scanned == kappa(g)
        ref = plain.next_terminals(plain.step_terminal(plain.init(), g.terminal_id("a")))
        assert (nxt.terminals, nxt.eos) == (ref.terminals, ref.eos)
