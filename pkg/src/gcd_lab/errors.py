"""Exception hierarchy.

Every domain error carries the name of the module that raised it so the CLI can
prefix messages consistently. Outcomes that are meaningful results (dead engine
states, invariance mismatches, inconclusive simulations) are never raised.
"""

from __future__ import annotations


class GcdError(Exception):
    """Base class for all domain errors."""

    module = "gcd"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class GrammarError(GcdError):
    """Invalid grammar structure."""

    module = "grammar"


class GrammarSyntaxError(GrammarError):
    """Grammar source does not conform to the file format."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndeclaredSymbolError(GrammarError):
    """A right-hand side names a nonterminal that has no rule."""

    def __init__(self, name: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: undeclared nonterminal '{name}'")
        self.name = name
        self.line = line
        self.column = column


class EmptyLanguageError(GrammarError):
    """The start symbol derives no terminal string."""


class VocabError(GcdError):
    """Invalid vocabulary or token id."""

    module = "tokens"


class DeadEndError(GcdError):
    """No admissible probability mass remains at a live decoding step."""

    module = "decoding"


class LmFileError(GcdError):
    """Malformed toy language model description."""

    module = "decoding"


class InfiniteAmbiguityError(GcdError):
    """A derivable cycle yields infinitely many parse trees."""

    module = "chart"

    def __init__(self, nonterminal: str) -> None:
        super().__init__(f"infinitely many parse trees through cyclic nonterminal '{nonterminal}'")
        self.nonterminal = nonterminal


class FastPathError(GcdError):
    """The constant-state recognizer was requested for an unsupported grammar."""

    module = "chart"


class BudgetExceededError(GcdError):
    """Exhaustive enumeration would exceed the configured budget."""

    module = "conditioning"


class ConditioningOnNullError(GcdError):
    """Conditioning on an event of probability zero."""

    module = "conditioning"


class RewriteError(GcdError):
    """A rewrite precondition does not hold."""

    module = "rewrite"


class UnknownCounterError(GcdError):
    """A proxy weight names a counter that does not exist."""

    module = "perf"


class DegenerateDesignError(GcdError):
    """Fit samples do not determine an affine model."""

    module = "perf"


class TraceFileError(GcdError):
    """A trace or fit file is missing or malformed."""

    module = "perf"
