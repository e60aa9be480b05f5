import math
from fractions import Fraction

import pytest

from gcd_lab.conditioning import (
    Conditioner,
    distortion,
    doob_next_dist,
    sample_conditioned,
    survival,
)
from gcd_lab.decoding import RandomLm
from gcd_lab.errors import BudgetExceededError, ConditioningOnNullError
from gcd_lab.selftest import constant_survival_lm
from gcd_lab.tokens import Vocab


def test_separation_numbers(sep, sep_lm, sep_vocab):
    b = sep_vocab.token_id("b")
    assert survival(sep_lm, sep, sep_vocab, (), 3) == Fraction(8, 125)
    dist = doob_next_dist(sep_lm, sep, sep_vocab, (), 3)
    assert dist[b] == Fraction(1, 16)
    assert dist[sep_vocab.token_id("a")] == Fraction(15, 16)
    assert sum(dist) == 1
    masked = Conditioner(sep_lm, sep, sep_vocab, 3).masked_next_dist(())
    assert masked[b] == Fraction(2, 5)


def test_survival_respects_horizon(sep, sep_lm, sep_vocab):
    # "b a <eos>" needs three tokens
    assert survival(sep_lm, sep, sep_vocab, (), 2) == Fraction(3, 50)


def test_terminated_prefix_survival(sep, sep_lm, sep_vocab):
    c = Conditioner(sep_lm, sep, sep_vocab, 3)
    a, b, eos = sep_vocab.token_id("a"), sep_vocab.token_id("b"), sep_vocab.eos_id
    assert c.survival((a, eos)) == 1
    assert c.survival((b, eos)) == 0
    assert c.survival((eos, a)) == 0


def test_consistency_gap_is_zero_for_exact_models(sep, sep_lm, sep_vocab):
    c = Conditioner(sep_lm, sep, sep_vocab, 3)
    for prefix in c.live_prefixes():
        assert c.consistency_gap(prefix) == 0.0


def test_live_prefixes(sep, sep_lm, sep_vocab):
    c = Conditioner(sep_lm, sep, sep_vocab, 3)
    names = {" ".join(sep_vocab.names[y] for y in p) for p in c.live_prefixes()}
    assert names == {"", "a", "b", "b a"}


def test_distortion_report(sep, sep_lm, sep_vocab):
    report = distortion(sep_lm, sep, sep_vocab, (), 3)
    assert report.admissible == ("a", "b")
    assert report.survival == pytest.approx((0.1, 0.01))
    assert report.spread == pytest.approx(10.0)
    assert report.kl_bound == pytest.approx(math.log(10.0))
    expected_kl = 0.6 * math.log(0.6 / (15 / 16)) + 0.4 * math.log(0.4 / (1 / 16))
    assert report.kl == pytest.approx(expected_kl)
    assert report.tv == pytest.approx(0.9375 - 0.6)
    assert not report.violations
    assert not report.vacuous
    assert report.to_json()["spread"] == pytest.approx(10.0)


def test_constant_survival_means_no_distortion(g1):
    vocab = Vocab.singleton(g1)
    report = Conditioner(constant_survival_lm(vocab), g1, vocab, 6).distortion(())
    assert report.kl == 0.0
    assert report.tv == 0.0
    assert report.spread == 1.0


def test_random_models_respect_bounds(g1):
    vocab = Vocab.singleton(g1)
    for seed in range(10):
        c = Conditioner(RandomLm(vocab.size, seed), g1, vocab, 5)
        assert not c.exact
        for prefix in c.live_prefixes():
            report = c.distortion(prefix)
            assert not report.violations
            assert c.consistency_gap(prefix) < 1e-9


def test_zero_survival_prefix(sep, sep_lm, sep_vocab):
    b = sep_vocab.token_id("b")
    with pytest.raises(ConditioningOnNullError):
        doob_next_dist(sep_lm, sep, sep_vocab, (b, b), 3)


def test_enumeration_budget(g1):
    vocab = Vocab.singleton(g1)
    with pytest.raises(BudgetExceededError):
        Conditioner(RandomLm(vocab.size, 0), g1, vocab, 20)
    with pytest.raises(ValueError):
        Conditioner(RandomLm(vocab.size, 0), g1, vocab, 0)


def test_conditioned_samples(sep, sep_lm, sep_vocab):
    samples = sample_conditioned(sep_lm, sep, sep_vocab, horizon=3, count=200, seed=1)
    realized = {" ".join(sep_vocab.names[y] for y in s) for s in samples}
    assert realized <= {"a <eos>", "b a <eos>"}
    assert "a <eos>" in realized
