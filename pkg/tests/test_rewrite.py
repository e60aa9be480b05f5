import csv
import io

import pytest

from gcd_lab.decoding import oracle_invariance_check
from gcd_lab.errors import RewriteError
from gcd_lab.grammar import kappa, parse_grammar
from gcd_lab.models import CostComponent
from gcd_lab.rewrite import (
    CostVector,
    RewriteFamily,
    RewriteKind,
    canonical_form,
    eliminate_delegation,
    enumerate_family,
    grammar_hash,
    inline,
    is_pointwise_minimal,
    measure_cost,
    render_cost_table,
    render_grammar,
    save_selection,
    select_min,
    successors,
)
from gcd_lab.rewrite.persistence import PROXY_NOTE, TABLE_COLUMNS
from gcd_lab.tokens import Vocab

WORKLOAD = [("a",) * k + ("b",) * k for k in range(1, 4)]


def rules(g):
    return [g.format_production(p) for p in range(len(g.productions))]


def test_canonical_form_ignores_names_and_rule_order(g2):
    renamed = parse_grammar("S -> eps | 'a' X 'b'\nX -> eps | 'a' X 'b'\n")
    assert canonical_form(renamed) == canonical_form(g2)
    assert grammar_hash(renamed) == grammar_hash(g2)


def test_canonical_form_distinguishes_structure(g1, g2):
    assert grammar_hash(g1) != grammar_hash(g2)
    assert canonical_form(g1).splitlines()[0] == "%terminals 'a' 'b'"


def test_inline_keeps_other_productions(g2):
    result = inline(g2, 0, "A")
    assert rules(result) == [
        "S -> 'a' 'a' A 'b' 'b'",
        "S -> 'a' 'b'",
        "S -> eps",
        "A -> 'a' A 'b'",
        "A -> eps",
    ]
    assert oracle_invariance_check(g2, result, Vocab.singleton(g2), 8).ok


def test_inline_errors(g1, g2):
    with pytest.raises(RewriteError):
        inline(g1, 0, "S")
    with pytest.raises(RewriteError):
        inline(g2, 0, "Q")
    with pytest.raises(RewriteError):
        inline(g2, 0, "A", occurrence=1)
    with pytest.raises(RewriteError):
        inline(g2, 9, "A")


def test_merge_equal_rule_sets(g1, g2):
    merged = eliminate_delegation(g2, "A", "S")
    assert grammar_hash(merged) == grammar_hash(g1)
    assert kappa(merged) == 8


def test_merge_plain_delegation():
    g = parse_grammar("S -> 'x' A\nA -> B\nB -> 'b' | 'c'\n")
    merged = eliminate_delegation(g, "A", "B")
    assert rules(merged) == ["S -> 'x' B", "B -> 'b'", "B -> 'c'"]
    assert kappa(merged) < kappa(g)


def test_merge_errors(g2):
    with pytest.raises(RewriteError):
        eliminate_delegation(g2, "S", "A")
    g = parse_grammar("S -> A 'x'\nA -> 'y'\n")
    with pytest.raises(RewriteError):
        eliminate_delegation(g, "A", "S")


def test_successors(g2):
    steps = successors(g2)
    kinds = [s.kind for s in steps]
    assert kinds == [RewriteKind.INLINE, RewriteKind.INLINE, RewriteKind.DELEGATION]
    assert steps[-1].description == "merge A into S"
    assert all(s.source_hash == grammar_hash(g2) for s in steps)


def test_family_budget_zero_is_the_seed(g2):
    family = enumerate_family(g2, 0)
    assert len(family) == 1
    assert next(iter(family)).describe() == "seed"


def test_family_members_preserve_the_language(g2):
    family = enumerate_family(g2, 2)
    assert not family.partial
    assert min(m.kappa for m in family) == 8
    assert len({m.digest for m in family}) == len(family)
    vocab = Vocab.singleton(g2)
    for member in family:
        assert member.depth <= 2
        assert oracle_invariance_check(g2, member.grammar, vocab, 6).ok, member.describe()


def test_family_member_cap(g2):
    family = enumerate_family(g2, 3, member_cap=3)
    assert family.partial
    assert len(family) == 3


def test_family_budget_bounds(g2):
    with pytest.raises(RewriteError):
        enumerate_family(g2, -1)
    with pytest.raises(RewriteError):
        enumerate_family(g2, 4)
    with pytest.raises(RewriteError):
        RewriteFamily.of([])


def test_explicit_family_dedups(g1, g2):
    renamed = parse_grammar("X -> 'a' X 'b' | eps\n")
    assert len(RewriteFamily.of([g1, renamed, g2])) == 2


def test_cost_vector_dominance():
    low = CostVector(1.0, 2, 3.0)
    assert low.dominates(CostVector(2.0, 3, 4.0))
    assert not low.dominates(CostVector(2.0, 2, 4.0))
    assert not low.dominates(low)
    assert low.key((CostComponent.KAPPA, CostComponent.SAC)) == (2.0, 1.0)


def test_measure_cost(g1):
    cost = measure_cost(g1, WORKLOAD)
    assert cost.kappa == 8
    assert cost.sac > 0
    assert cost.tokenizer > 0


def test_select_prefers_fewer_states(g1, g2):
    family = RewriteFamily.of([g2, g1])
    selection = select_min(family, WORKLOAD, (CostComponent.SAC, CostComponent.KAPPA))
    assert selection.winner.member.digest == grammar_hash(g1)
    assert selection.grammar == g1
    assert is_pointwise_minimal(selection)
    assert len(selection.table) == 2


def test_selection_persistence(g1, g2, tmp_path):
    selection = select_min(RewriteFamily.of([g1, g2]), WORKLOAD, (CostComponent.KAPPA,))
    text = render_grammar(selection)
    assert PROXY_NOTE in text
    assert parse_grammar(text) == selection.grammar

    table = render_cost_table(selection)
    lines = table.splitlines()
    assert lines[0] == PROXY_NOTE
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(rows[0]) == TABLE_COLUMNS
    assert sum(int(r["winner"]) for r in rows) == 1

    grammar_path, table_path = tmp_path / "best.cfg", tmp_path / "costs.csv"
    save_selection(selection, grammar_path, table_path)
    assert grammar_path.read_text() == text
    assert table_path.read_text() == table
