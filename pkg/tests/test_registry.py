import hashlib
import json
from pathlib import Path

import pytest

from gcd_lab.config import get_config_path, load_config, save_config, write_atomic
from gcd_lab.decoding import RandomLm, TableLm
from gcd_lab.defaults import BUILTIN_GRAMMARS
from gcd_lab.errors import GrammarError, LmFileError, VocabError
from gcd_lab.models import CostComponent, LabConfig, RewriteSettings
from gcd_lab.registry import InputRegistry


def test_builtin_grammars_are_listed():
    assert InputRegistry.builtin_grammars() == ["G1", "G2", "G3", "G4", "SEP"]


def test_grammar_digest_is_recorded():
    registry = InputRegistry()
    registry.grammar("builtin:G1")
    expected = hashlib.sha256(BUILTIN_GRAMMARS["G1"].encode()).hexdigest()
    assert registry.digests == {"builtin:G1": expected}


def test_grammar_from_file(tmp_path):
    path = tmp_path / "g.cfg"
    path.write_text("S -> 'x' S | 'y'\n")
    g = InputRegistry().grammar(str(path))
    assert g.terminals == ("x", "y")
    assert g.reduced


def test_missing_grammar():
    registry = InputRegistry()
    with pytest.raises(GrammarError):
        registry.grammar("builtin:G9")
    with pytest.raises(GrammarError):
        registry.grammar("/nonexistent/grammar.cfg")


def test_fixtures_override_builtins(tmp_path):
    (tmp_path / "G1.cfg").write_text("S -> 'z'\n")
    registry = InputRegistry(fixtures=tmp_path)
    assert registry.grammar("builtin:G1").terminals == ("z",)
    assert registry.grammar("builtin:G2").nonterminals == ("S", "A")


def test_vocab_resolution(g1):
    registry = InputRegistry()
    assert registry.vocab(None, g1).names == ("a", "b", "<eos>")
    assert registry.vocab("builtin:singleton", g1).size == 3
    with pytest.raises(VocabError):
        registry.vocab("builtin:bpe", g1)


def test_lm_resolution(g1, sep_vocab):
    registry = InputRegistry()
    assert isinstance(registry.lm("random:5", sep_vocab), RandomLm)
    assert isinstance(registry.lm("builtin:SEP", sep_vocab), TableLm)
    assert "builtin:SEP" in registry.digests
    assert registry.lm_vocab_ref("builtin:SEP") == "builtin:singleton"
    assert registry.lm_vocab_ref("random:1") is None
    with pytest.raises(LmFileError):
        registry.lm("random:abc", sep_vocab)
    with pytest.raises(LmFileError):
        registry.lm("builtin:GPT", sep_vocab)


def test_lm_file_vocab_ref(tmp_path, sep_vocab):
    path = tmp_path / "lm.json"
    path.write_text(json.dumps({"vocab_ref": "v.json", "default": [1, 1, 2]}))
    registry = InputRegistry()
    assert registry.lm_vocab_ref(str(path)) == "v.json"
    assert registry.lm(str(path), sep_vocab).probs(())[2] == pytest.approx(0.5)


def test_workload(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("# header\na b\n\neps\na a b b  # trailing\n")
    assert InputRegistry().workload(path) == [("a", "b"), (), ("a", "a", "b", "b")]


def test_config_defaults_when_absent(tmp_path):
    config = load_config(tmp_path / "missing.json")
    assert config == LabConfig()
    assert config.decode.max_len == 32
    assert config.rewrite.priority == [
        CostComponent.SAC,
        CostComponent.KAPPA,
        CostComponent.TOKENIZER,
    ]


def test_config_round_trip(tmp_path):
    path = tmp_path / "nested" / "config.json"
    config = LabConfig()
    config.decode.beam = 4
    save_config(config, path)
    assert load_config(path).decode.beam == 4


def test_config_path_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("GCD_LAB_CONFIG", str(tmp_path / "x.json"))
    assert get_config_path() == tmp_path / "x.json"


def test_priority_validation():
    with pytest.raises(ValueError):
        RewriteSettings(priority=[CostComponent.SAC, CostComponent.SAC])
    with pytest.raises(ValueError):
        RewriteSettings(priority=[])


def test_write_atomic_replaces_content(tmp_path):
    path = tmp_path / "out.txt"
    write_atomic(path, "first")
    write_atomic(path, "second")
    assert path.read_text() == "second"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_example_config_is_valid():
    example = Path(__file__).resolve().parents[1] / "config.example.json"
    assert load_config(example) == LabConfig()
