import json

import numpy as np
import pytest

from gcd_lab.errors import VocabError
from gcd_lab.models import VocabEntry
from gcd_lab.reachability import build_engine
from gcd_lab.selftest import live_prefixes
from gcd_lab.tokens import (
    EOS_NAME,
    MaskOracle,
    Token,
    Vocab,
    admissible_tokens,
    admissible_tokens_trie,
    bind_vocab,
    load_vocab,
    realize,
    vocab_to_json,
)

MERGED = [
    {"id": 0, "name": "a", "terminals": ["a"]},
    {"id": 1, "name": "b", "terminals": ["b"]},
    {"id": 2, "name": "ab", "terminals": ["a", "b"]},
    {"id": 3, "name": "bb", "terminals": ["b", "b"]},
    {"id": 4, "name": EOS_NAME},
]


@pytest.fixture
def merged_vocab(tmp_path):
    path = tmp_path / "vocab.json"
    path.write_text(json.dumps(MERGED))
    return load_vocab(path)


def test_singleton_vocab(g1):
    v = Vocab.singleton(g1)
    assert v.names == ("a", "b", EOS_NAME)
    assert v.eos_id == 2
    assert v.size == 3
    assert v.mean_terminals_per_token() == 1.0


def test_loaded_vocab(merged_vocab):
    assert merged_vocab.size == 5
    assert merged_vocab.eos_id == 4
    assert merged_vocab.token_id("ab") == 2
    assert merged_vocab.mean_terminals_per_token() == 1.5
    assert realize(merged_vocab, [2, 3, 4]) == ("a", "b", "b", "b")


def test_vocab_json_round_trip(merged_vocab, tmp_path):
    path = tmp_path / "again.json"
    path.write_text(vocab_to_json(merged_vocab))
    assert load_vocab(path) == merged_vocab


def test_vocab_needs_one_eos():
    with pytest.raises(VocabError):
        Vocab((Token(0, "a", ("a",)),))
    with pytest.raises(VocabError):
        Vocab((Token(0, "x", (), is_eos=True), Token(1, "y", (), is_eos=True)))


def test_vocab_ids_must_be_dense():
    with pytest.raises(VocabError):
        Vocab.from_entries(
            [VocabEntry(id=0, name="a", terminals=["a"]), VocabEntry(id=2, name=EOS_NAME)]
        )


def test_eos_cannot_realize_terminals():
    with pytest.raises(VocabError):
        Vocab.from_entries([VocabEntry(id=0, name=EOS_NAME, terminals=["a"])])


def test_unreadable_vocab_file(tmp_path):
    with pytest.raises(VocabError):
        load_vocab(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('[{"id": -1, "name": "a"}]')
    with pytest.raises(VocabError):
        load_vocab(bad)


def test_bind_rejects_unknown_terminal(g1, tmp_path):
    path = tmp_path / "v.json"
    entries = [{"id": 0, "name": "c", "terminals": ["c"]}, {"id": 1, "name": EOS_NAME}]
    path.write_text(json.dumps(entries))
    with pytest.raises(VocabError):
        bind_vocab(load_vocab(path), g1)


def test_merged_token_masks(g1, merged_vocab):
    engine = build_engine(g1)
    s = engine.init()
    assert admissible_tokens(engine, s, merged_vocab).bits == (True, False, True, False, True)
    s = engine.step_terminal(s, g1.terminal_id("a"))
    mask = admissible_tokens(engine, s, merged_vocab)
    assert mask.bits == (True, True, True, False, False)
    assert not mask.eos
    assert mask.count == 3
    assert mask.work.speculative_token_steps > 0
    np.testing.assert_array_equal(mask.as_array(), np.array(mask.bits))


def test_trie_mask_matches_plain_mask(g2, g4, merged_vocab):
    for g in (g2, g4):
        engine = build_engine(g)
        states = {(): engine.init()}
        for u in live_prefixes(g, 4):
            if u:
                states[u] = engine.step_terminal(states[u[:-1]], u[-1])
            plain = admissible_tokens(engine, states[u], merged_vocab)
            trie = admissible_tokens_trie(engine, states[u], merged_vocab)
            assert plain.bits == trie.bits


def test_mask_oracle_memoizes_and_handles_dead_prefixes(g1, merged_vocab):
    oracle = MaskOracle(build_engine(g1), merged_vocab)
    first = oracle.mask_for_tokens([2])
    assert first is oracle.mask_for_tokens([2])
    assert first.bits == (False, False, False, False, True)
    dead = oracle.mask_for_tokens([1])
    assert dead.count == 0
    assert not oracle.state(oracle.realized([1])).live
