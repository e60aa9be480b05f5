import io
import itertools
import json

import numpy as np
import pytest

from gcd_lab.chart import SacEngine
from gcd_lab.counters import COUNTER_NAMES, CounterVector
from gcd_lab.errors import DegenerateDesignError, TraceFileError, UnknownCounterError
from gcd_lab.models import FitResult
from gcd_lab.perf import (
    ProxyWeights,
    TnnModel,
    envelope,
    fit_affine,
    fit_trace,
    load_fit,
    loglog_slope,
    proxy,
    read_trace,
    record_run,
    write_trace,
)
from gcd_lab.tokens import load_vocab


def test_counter_vector_arithmetic():
    a = CounterVector(chart_packed_nodes=2, engine_edges_touched=3)
    b = CounterVector(chart_packed_nodes=1, bitset_slots_scanned=8)
    total = CounterVector.total([a, b])
    assert total == a + b
    assert total.as_dict()["chart_packed_nodes"] == 3
    assert CounterVector.from_dict(total.as_dict()) == total
    assert set(total.as_dict()) == set(COUNTER_NAMES)


def test_proxy_weights():
    w = ProxyWeights.parse("engine_edges_touched=2, chart_packed_nodes")
    assert w.weights == {"engine_edges_touched": 2.0, "chart_packed_nodes": 1.0}
    c = CounterVector(chart_packed_nodes=5, engine_edges_touched=3, bitset_slots_scanned=100)
    assert w.apply(c) == 11.0
    assert proxy([c, CounterVector()], w) == [11.0, 0.0]


@pytest.mark.parametrize(
    "weights",
    [{"no_such_counter": 1.0}, {"chart_packed_nodes": -1.0}, {"chart_packed_nodes": 0.0}],
)
def test_invalid_proxy_weights(weights):
    with pytest.raises(UnknownCounterError):
        ProxyWeights(weights)


def test_unparseable_weight():
    with pytest.raises(UnknownCounterError):
        ProxyWeights.parse("chart_packed_nodes=heavy")


def test_record_run(g1):
    run = record_run(g1, g1.encode("aabb"))
    assert run.completed
    assert [s.t for s in run.steps] == [1, 2, 3, 4]
    assert run.admissible == [2, 2, 1, 1]
    assert run.total == CounterVector.total(run.series)
    assert run.total.chart_packed_nodes > 0
    assert all(s.counters.engine_edges_touched > 0 for s in run.steps)
    assert all(s.config_edges > 0 and s.config_nodes > 0 for s in run.steps)


def test_record_run_stops_on_dead_input(g1):
    run = record_run(g1, g1.encode("aba"))
    assert not run.completed
    assert len(run.steps) == 2


def test_record_run_phase_times(g3):
    ticks = itertools.count(step=10)
    run = record_run(g3, g3.encode("abab"), chart=SacEngine.FAST, clock=lambda: next(ticks))
    assert all(s.t_update_ns == 10 and s.t_mask_ns == 10 for s in run.steps)
    assert [s.counters.chart_packed_nodes for s in run.steps] == [1, 1, 1, 1]


def test_trie_masks_share_speculative_steps(g1, tmp_path):
    path = tmp_path / "vocab.json"
    path.write_text(
        json.dumps(
            [
                {"id": 0, "name": "a", "terminals": ["a"]},
                {"id": 1, "name": "b", "terminals": ["b"]},
                {"id": 2, "name": "ab", "terminals": ["a", "b"]},
                {"id": 3, "name": "bb", "terminals": ["b", "b"]},
                {"id": 4, "name": "<eos>"},
            ]
        )
    )
    vocab = load_vocab(path)
    plain = record_run(g1, g1.encode("aabb"), vocab=vocab)
    shared = record_run(g1, g1.encode("aabb"), vocab=vocab, trie=True)
    assert shared.admissible == plain.admissible
    assert shared.total.speculative_token_steps < plain.total.speculative_token_steps


def test_bitset_overhead_is_kappa_per_step(g1, g2):
    for g, expected in ((g1, 8), (g2, 15)):
        run = record_run(g, g.encode("aabb"), bitset=True)
        assert {c.bitset_slots_scanned for c in run.series} == {expected}


def test_trace_round_trip(g2, tmp_path):
    run = record_run(g2, g2.encode("aaabbb"))
    buf = io.StringIO()
    assert write_trace((s.to_record() for s in run.steps), buf) == 6
    path = tmp_path / "trace.jsonl"
    path.write_text(buf.getvalue())
    records = read_trace(path)
    assert [r.t for r in records] == list(range(1, 7))
    assert CounterVector.from_dict(records[2].counters) == run.steps[2].counters


def test_unreadable_trace_and_fit_files(tmp_path):
    with pytest.raises(TraceFileError):
        read_trace(tmp_path / "missing.jsonl")
    with pytest.raises(TraceFileError):
        load_fit(tmp_path / "missing.json")
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"t": 1, "counters": {"chart_packed_nodes": "many"}}\n')
    with pytest.raises(TraceFileError):
        read_trace(bad)
    with pytest.raises(TraceFileError):
        load_fit(bad)


def test_fit_file_round_trip(tmp_path):
    path = tmp_path / "fit.json"
    fit = FitResult(a=2.0, b=1.0, r_squared=0.9, max_relative_error=0.1, samples=4)
    path.write_text(fit.model_dump_json())
    assert load_fit(path) == fit


def test_fit_recovers_affine_law():
    s = np.repeat(np.arange(1.0, 21.0), 2)
    fit = fit_affine(s, 3.0 * s + 7.0)
    assert fit.a == pytest.approx(3.0)
    assert fit.b == pytest.approx(7.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.samples == 40


def test_fit_with_noise():
    rng = np.random.default_rng(0)
    s = np.repeat(np.arange(1.0, 21.0), 2)
    fit = fit_affine(s, 3.0 * s + 7.0 + rng.normal(0.0, 0.1, size=s.size))
    assert abs(fit.a - 3.0) <= 0.15
    assert abs(fit.b - 7.0) <= 0.35


def test_fit_keeps_coefficients_nonnegative():
    s = np.arange(3.0, 13.0)
    fit = fit_affine(s, 2.0 * s - 5.0)
    assert fit.b == 0.0
    assert fit.a > 0.0


def test_degenerate_designs():
    with pytest.raises(DegenerateDesignError):
        fit_affine([5.0] * 10, list(range(10)))
    with pytest.raises(DegenerateDesignError):
        fit_affine([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateDesignError):
        fit_affine([1.0, 2.0], [1.0])


def test_fit_trace(g4):
    run = record_run(g4, g4.encode("ab" * 6))
    records = [s.to_record() for s in run.steps]
    records = [
        r.model_copy(update={"t_mask_ns": 4 * r.counters["chart_packed_nodes"] + 9})
        for r in records
    ]
    fit = fit_trace(records, ProxyWeights.unit("chart_packed_nodes"))
    assert fit.a == pytest.approx(4.0)
    assert fit.b == pytest.approx(9.0)


def test_loglog_slope():
    ts = list(range(1, 50))
    assert loglog_slope(ts, [t**2 for t in ts]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        loglog_slope([1, 2], [0, 1])


def test_tnn_model_parsing():
    assert TnnModel.parse("const:100")(7) == 100.0
    linear = TnnModel.parse("linear:10,2")
    assert linear(5) == 20.0
    assert linear.label() == "linear:10,2"
    for bad in ("const:", "linear:1", "cubic:1", "const:-1", "const:x"):
        with pytest.raises(ValueError):
            TnnModel.parse(bad)


def test_envelope_scales_with_beam():
    fit = FitResult(a=2.0, b=5.0, r_squared=1.0, max_relative_error=0.0, samples=10)
    s = [10.0, 20.0, 40.0]
    k = [3, 2, 1]
    one = envelope(100, s, k, 1, TnnModel(50.0), fit)
    four = envelope(100, s, k, 4, TnnModel(50.0), fit)
    assert [st.t_mask for st in one.steps] == [25.0, 45.0, 85.0]
    assert [st.t_nn for st in four.steps] == [200.0] * 3
    assert [st.t_mask for st in four.steps] == [85.0, 165.0, 325.0]
    assert [st.t_sel_dense for st in four.steps] == [400.0] * 3
    assert [st.t_sel_sparse for st in four.steps] == [12.0, 8.0, 4.0]
    assert four.symbolic_work == 280.0
    assert one.crossover == 3
    assert four.crossover == 3
    assert four.sparse_total < four.dense_total
    assert four.cumulative_dense()[-1] == pytest.approx(four.dense_total)


def test_envelope_validation():
    fit = FitResult(a=1.0, b=0.0, r_squared=1.0, max_relative_error=0.0, samples=10)
    with pytest.raises(ValueError):
        envelope(10, [1.0], [1], 0, TnnModel(1.0), fit)
    with pytest.raises(ValueError):
        envelope(10, [1.0, 2.0], [1], 1, TnnModel(1.0), fit)
