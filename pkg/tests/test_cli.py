import csv
import json

import pytest
from typer.testing import CliRunner

from gcd_lab import __version__
from gcd_lab.cli import app
from gcd_lab.grammar import kappa, parse_grammar

runner = CliRunner()


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    monkeypatch.setenv("GCD_LAB_CONFIG", str(tmp_path / "absent-config.json"))


@pytest.fixture
def manifest(tmp_path):
    return tmp_path / "manifest.json"


def invoke(manifest, *args):
    return runner.invoke(app, ["--manifest", str(manifest), *args])


def read_manifest(path):
    return json.loads(path.read_text())


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert result.stdout.strip() == __version__


def test_no_arguments_shows_help():
    result = runner.invoke(app, [])
    assert "Usage" in result.output


def test_unknown_option_is_a_usage_error():
    result = runner.invoke(app, ["mask", "--no-such-flag"])
    assert result.exit_code == 2


def test_compile_dumps_automaton(manifest, tmp_path):
    dump = tmp_path / "g1.json"
    result = invoke(manifest, "compile", "-g", "builtin:G1", "--dump-pda", str(dump))
    assert result.exit_code == 0, result.output
    assert json.loads(dump.read_text())["kappa"] == 8
    assert "kappa" in result.stdout
    recorded = read_manifest(manifest)
    assert recorded["subcommand"] == "compile"
    assert "builtin:G1" in recorded["inputs"]
    assert recorded["version"] == __version__


def test_mask_terminals(manifest):
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "a")
    assert result.exit_code == 0
    assert result.stdout.split() == ["a", "b"]
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "ab", "--earley")
    assert result.stdout.split() == ["<eos>"]
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "eps")
    assert result.stdout.split() == ["a", "<eos>"]


def test_mask_tokens(manifest, tmp_path):
    vocab = tmp_path / "vocab.json"
    vocab.write_text(
        json.dumps(
            [
                {"id": 0, "name": "a", "terminals": ["a"]},
                {"id": 1, "name": "ab", "terminals": ["a", "b"]},
                {"id": 2, "name": "<eos>"},
            ]
        )
    )
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "a", "--vocab", str(vocab))
    assert result.exit_code == 0
    assert result.stdout.split() == ["a", "ab"]


def test_unknown_grammar_fails_but_writes_manifest(manifest):
    result = invoke(manifest, "mask", "-g", "builtin:NOPE")
    assert result.exit_code == 1
    assert read_manifest(manifest)["subcommand"] == "mask"


def test_unknown_terminal_in_prefix(manifest):
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "c")
    assert result.exit_code == 1


def test_sac_csv(manifest, tmp_path):
    out = tmp_path / "sac.csv"
    result = invoke(manifest, "sac", "-g", "builtin:G4", "-i", "aaaa", "--csv", str(out))
    assert result.exit_code == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["new_packed"]) for r in rows] == [0, 1, 3, 6]
    assert rows[-1]["cum_packed"] == "10"


def test_sac_fast_path_rejects_non_regular(manifest):
    result = invoke(manifest, "sac", "-g", "builtin:G1", "-i", "ab", "--engine", "fast")
    assert result.exit_code == 1


def test_parses(manifest, tmp_path):
    result = invoke(manifest, "parses", "-g", "builtin:G4", "-i", "aaaa")
    assert result.stdout.strip() == "5"
    word = tmp_path / "word.txt"
    word.write_text("a b a b a\n")
    result = invoke(manifest, "parses", "-g", "builtin:G4", "--input-file", str(word))
    assert result.stdout.strip() == "14"


def test_condition_report(manifest, tmp_path):
    report = tmp_path / "report.json"
    result = invoke(
        manifest, "condition", "-g", "builtin:SEP", "--lm", "builtin:SEP", "-T", "3",
        "--report", str(report),
    )
    assert result.exit_code == 0, result.output
    data = json.loads(report.read_text())
    assert data["q"][1] == pytest.approx(0.4)
    assert data["p_conditioned"][1] == pytest.approx(0.0625)
    assert data["violations"] == []


def test_generate(manifest, tmp_path):
    trace = tmp_path / "trace.jsonl"
    result = invoke(
        manifest, "generate", "-g", "builtin:G1", "--seed", "3", "-n", "4",
        "--max-len", "12", "--trace", str(trace),
    )
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in trace.read_text().splitlines()]
    assert lines and all(rec["admissible"] >= 1 for rec in lines)
    assert read_manifest(manifest)["seed"] == 3


def test_generate_beam(manifest):
    result = invoke(manifest, "generate", "-g", "builtin:G2", "-b", "3", "--max-len", "6")
    assert result.exit_code == 0, result.output
    assert "Beam search" in result.stdout


def test_generate_beam_trace(manifest, tmp_path):
    trace = tmp_path / "beam.jsonl"
    result = invoke(
        manifest, "generate", "-g", "builtin:G1", "-b", "2", "--max-len", "6",
        "--trace", str(trace),
    )
    assert result.exit_code == 0, result.output
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert {rec["phase"] for rec in records} == {"mask", "advance"}
    assert all(set(rec["tokens"]) <= {"a", "b", "<eos>"} for rec in records)
    assert records[0]["t"] == 1 and records[0]["tokens"] == []


def test_optimize(manifest, tmp_path):
    workload = tmp_path / "workload.txt"
    workload.write_text("# balanced strings\na b\na a b b\neps\n")
    best, table = tmp_path / "best.cfg", tmp_path / "costs.csv"
    result = invoke(
        manifest, "optimize", "-g", "builtin:G2", "-k", "1", "--workload", str(workload),
        "--priority", "kappa,sac", "--out", str(best), "--table", str(table),
    )
    assert result.exit_code == 0, result.output
    assert kappa(parse_grammar(best.read_text())) == 8
    assert table.read_text().startswith("# costs are measured proxies")
    assert best.read_text().startswith("# selected from")
    assert sorted(p.name for p in tmp_path.iterdir() if p.suffix in (".cfg", ".csv")) == [
        "best.cfg",
        "costs.csv",
    ]

    result = invoke(
        manifest, "optimize", "-g", "builtin:G2", "-k", "1", "--workload", str(workload),
    )
    assert result.exit_code == 0, result.output
    assert "# selected from" in result.stdout


def test_optimize_rejects_bad_priority(manifest, tmp_path):
    workload = tmp_path / "workload.txt"
    workload.write_text("a b\n")
    result = invoke(
        manifest, "optimize", "-g", "builtin:G2", "--workload", str(workload),
        "--priority", "speed",
    )
    assert result.exit_code == 2


def test_bench_fit_envelope_pipeline(manifest, tmp_path):
    trace, fit, env = tmp_path / "trace.jsonl", tmp_path / "fit.json", tmp_path / "env.csv"
    result = invoke(manifest, "bench", "-g", "builtin:G4", "-i", "ab" * 6, "--trace", str(trace))
    assert result.exit_code == 0, result.output
    assert len(trace.read_text().splitlines()) == 12

    result = invoke(manifest, "fit", "--trace", str(trace), "--out", str(fit))
    assert result.exit_code == 0, result.output
    fitted = json.loads(fit.read_text())
    assert fitted["a"] >= 0 and fitted["b"] >= 0 and fitted["samples"] == 12

    result = invoke(
        manifest, "envelope", "--fit", str(fit), "-g", "builtin:G4", "-i", "abab",
        "-b", "2", "--csv", str(env),
    )
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(env.open()))
    assert len(rows) == 4
    assert float(rows[0]["t_nn"]) == pytest.approx(2e6)


def test_fit_rejects_short_trace(manifest, tmp_path):
    trace = tmp_path / "trace.jsonl"
    invoke(manifest, "bench", "-g", "builtin:G1", "-i", "ab", "--trace", str(trace))
    result = invoke(manifest, "fit", "--trace", str(trace))
    assert result.exit_code == 1


def test_fit_and_envelope_report_missing_files(manifest, tmp_path):
    result = invoke(manifest, "fit", "--trace", str(tmp_path / "missing.jsonl"))
    assert result.exit_code == 1
    assert "[perf]" in result.output
    result = invoke(
        manifest, "envelope", "--fit", str(tmp_path / "missing.json"), "-g", "builtin:G1",
        "-i", "ab",
    )
    assert result.exit_code == 1
    assert "Traceback" not in result.output


def test_fit_rejects_malformed_trace(manifest, tmp_path):
    trace = tmp_path / "trace.jsonl"
    trace.write_text('{"t": "first"}\n')
    result = invoke(manifest, "fit", "--trace", str(trace))
    assert result.exit_code == 1


def test_bench_trie_masks(manifest, tmp_path):
    vocab = tmp_path / "vocab.json"
    vocab.write_text(
        json.dumps(
            [
                {"id": 0, "name": "a", "terminals": ["a"]},
                {"id": 1, "name": "b", "terminals": ["b"]},
                {"id": 2, "name": "ab", "terminals": ["a", "b"]},
                {"id": 3, "name": "<eos>"},
            ]
        )
    )
    traces = {}
    for flag in ([], ["--trie"]):
        trace = tmp_path / f"trace{len(flag)}.jsonl"
        result = invoke(
            manifest, "bench", "-g", "builtin:G1", "-i", "aabb", "--vocab", str(vocab),
            "--trace", str(trace), *flag,
        )
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in trace.read_text().splitlines()]
        traces[bool(flag)] = sum(r["counters"]["speculative_token_steps"] for r in records)
    assert 0 < traces[True] < traces[False]


def test_envelope_rejects_bad_tnn(manifest, tmp_path):
    result = invoke(
        manifest, "envelope", "--fit", str(tmp_path / "f.json"), "-g", "builtin:G1",
        "--vnn", "quadratic:1",
    )
    assert result.exit_code == 2


def test_manifest_file_keeps_stderr_clean(manifest):
    result = invoke(manifest, "mask", "-g", "builtin:G1", "-p", "a")
    assert result.exit_code == 0
    assert '"subcommand"' not in result.output
    assert read_manifest(manifest)["subcommand"] == "mask"

    result = runner.invoke(app, ["mask", "-g", "builtin:G1", "-p", "a"])
    assert result.exit_code == 0
    assert '"subcommand"' in result.output


def test_invariance(manifest):
    result = invoke(manifest, "invariance", "--g1", "builtin:G1", "--g2", "builtin:G2", "-d", "6")
    assert result.exit_code == 0
    assert result.stdout.startswith("no mismatch")

    result = invoke(manifest, "invariance", "--g1", "builtin:G1", "--g2", "builtin:G3", "-d", "3")
    assert result.exit_code == 0
    assert "mismatch after ''" in result.stdout
    assert "witness: b" in result.stdout


def test_selftest_subset(manifest):
    result = invoke(manifest, "selftest", "--quick", "--only", "1,4")
    assert result.exit_code == 0, result.output
    assert read_manifest(manifest)["subcommand"] == "selftest"


def test_selftest_fixture_override_fails_criterion(manifest, tmp_path):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    (fixtures / "G1.cfg").write_text("S -> 'a' S 'b' 'b' | eps\n")
    result = invoke(manifest, "selftest", "--quick", "--only", "1", "--fixtures", str(fixtures))
    assert result.exit_code == 1


def test_config_init_and_show(tmp_path):
    path = tmp_path / "cfg" / "gcd-config.json"
    result = runner.invoke(app, ["--config", str(path), "config", "init"])
    assert result.exit_code == 0
    assert json.loads(path.read_text())["decode"]["max_len"] == 32

    result = runner.invoke(app, ["--config", str(path), "config", "init"])
    assert result.exit_code == 1

    result = runner.invoke(app, ["--config", str(path), "config", "show"])
    assert result.exit_code == 0
    out = result.stdout
    assert json.loads(out[out.index("{") :])["rewrite"]["max_budget"] == 3


def test_invalid_config_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"decode": {"beam": 0}}))
    result = runner.invoke(app, ["--config", str(path), "config", "show"])
    assert result.exit_code == 1
