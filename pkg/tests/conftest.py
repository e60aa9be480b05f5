from fractions import Fraction

import numpy as np
import pytest

from gcd_lab.grammar import Cfg
from gcd_lab.registry import InputRegistry
from gcd_lab.selftest import random_reduced_grammar
from gcd_lab.tokens import Vocab


@pytest.fixture(scope="session")
def registry() -> InputRegistry:
    return InputRegistry()


@pytest.fixture(scope="session")
def g1(registry: InputRegistry) -> Cfg:
    return registry.grammar("builtin:G1")


@pytest.fixture(scope="session")
def g2(registry: InputRegistry) -> Cfg:
    return registry.grammar("builtin:G2")


@pytest.fixture(scope="session")
def g3(registry: InputRegistry) -> Cfg:
    return registry.grammar("builtin:G3")


@pytest.fixture(scope="session")
def g4(registry: InputRegistry) -> Cfg:
    return registry.grammar("builtin:G4")


@pytest.fixture(scope="session")
def sep(registry: InputRegistry) -> Cfg:
    return registry.grammar("builtin:SEP")


@pytest.fixture(scope="session")
def sep_vocab(sep: Cfg) -> Vocab:
    return Vocab.singleton(sep)


@pytest.fixture(scope="session")
def sep_lm(registry: InputRegistry, sep_vocab: Vocab):
    return registry.lm("builtin:SEP", sep_vocab)


@pytest.fixture
def random_grammars() -> list[Cfg]:
    rng = np.random.default_rng(1234)
    return [random_reduced_grammar(rng) for _ in range(12)]


def frac(text: str) -> Fraction:
    return Fraction(text)
