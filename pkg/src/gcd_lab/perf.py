"""Counter instrumentation, SAC proxies, affine time fits and latency envelopes.

Counters are exact and hardware independent; wall times are recorded next to
them and bridged by the affine model ``T_mask ~ a * S + b``.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np
from pydantic import ValidationError

from .chart import PackedChart, RegularRecognizer, SacEngine
from .counters import COUNTER_NAMES, CounterVector
from .errors import DegenerateDesignError, TraceFileError, UnknownCounterError
from .grammar import Cfg, reduce_grammar
from .models import CounterTraceRecord, FitResult, Worklist
from .reachability import build_engine
from .tokens import Vocab, admissible_tokens, admissible_tokens_trie

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- proxies


@dataclass(frozen=True)
class ProxyWeights:
    """Nonnegative weight per counter; counters not named weigh zero.

    Raises:
        UnknownCounterError: a name is not a counter, a weight is negative, or
            no weight is positive.
    """

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        unknown = sorted(set(self.weights) - set(COUNTER_NAMES))
        if unknown:
            raise UnknownCounterError(
                f"unknown counter(s) {', '.join(unknown)}; known: {', '.join(COUNTER_NAMES)}"
            )
        if any(w < 0 for w in self.weights.values()):
            raise UnknownCounterError("proxy weights must be nonnegative")
        if not any(w > 0 for w in self.weights.values()):
            raise UnknownCounterError("at least one proxy weight must be positive")

    @classmethod
    def unit(cls, *names: str) -> ProxyWeights:
        return cls({name: 1.0 for name in names})

    @classmethod
    def parse(cls, text: str) -> ProxyWeights:
        """Parse ``name=weight,name=weight``; a bare name means weight 1."""
        weights: dict[str, float] = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, _, value = part.partition("=")
            try:
                weights[name.strip()] = float(value) if value else 1.0
            except ValueError as e:
                raise UnknownCounterError(f"invalid weight '{part}'") from e
        return cls(weights)

    def apply(self, counters: CounterVector) -> float:
        values = counters.as_dict()
        return float(sum(w * values[name] for name, w in self.weights.items()))


def proxy(series: Iterable[CounterVector], weights: ProxyWeights) -> list[float]:
    """Per-step SAC proxy ``S_t``: inner product of weights and counters."""
    return [weights.apply(c) for c in series]


# --------------------------------------------------------------------------- recording


@dataclass(frozen=True)
class RunStep:
    """Counters and phase times of one decoding step.

    ``config_nodes`` and ``config_edges`` are the two size measures of the live
    configuration representation after the step.
    """

    t: int
    counters: CounterVector
    t_update_ns: int
    t_mask_ns: int
    admissible: int
    config_nodes: int
    config_edges: int

    def to_record(self) -> CounterTraceRecord:
        return CounterTraceRecord(
            t=self.t,
            counters=self.counters.as_dict(),
            t_update_ns=self.t_update_ns,
            t_mask_ns=self.t_mask_ns,
        )


@dataclass(frozen=True)
class RunRecord:
    grammar: Cfg
    steps: tuple[RunStep, ...]
    completed: bool = True

    @property
    def series(self) -> list[CounterVector]:
        return [s.counters for s in self.steps]

    @property
    def total(self) -> CounterVector:
        return CounterVector.total(self.series)

    @property
    def admissible(self) -> list[int]:
        return [s.admissible for s in self.steps]


def record_run(
    g: Cfg,
    word: Sequence[int],
    *,
    vocab: Vocab | None = None,
    chart: SacEngine = SacEngine.CHART,
    bitset: bool = False,
    trie: bool = False,
    worklist: Worklist = Worklist.FIFO,
    clock: Callable[[], int] = time.perf_counter_ns,
) -> RunRecord:
    """Instrumented run of ``word``: chart update, engine update, then one mask per step.

    The update phase covers the chart and the engine step; the mask phase
    covers one admissibility computation. With ``trie`` the mask shares
    speculative steps across tokens with a common realization prefix. Recording
    stops early (``completed`` false) once the engine state dies.
    """
    g = reduce_grammar(g)
    vocab = vocab or Vocab.singleton(g)
    recognizer = RegularRecognizer(g) if chart is SacEngine.FAST else PackedChart(g)
    engine = build_engine(g, worklist, bitset)
    masker = admissible_tokens_trie if trie else admissible_tokens
    state = engine.init()
    steps: list[RunStep] = []

    for t, a in enumerate(word, start=1):
        t0 = clock()
        chart_step = recognizer.step(a)
        state = engine.step_terminal(state, a)
        t1 = clock()
        if not state.live:
            logger.warning("input leaves the prefix language at step %d", t)
            return RunRecord(g, tuple(steps), completed=False)
        mask = masker(engine, state, vocab)
        t2 = clock()
        counters = (
            CounterVector(
                chart_symbol_nodes=chart_step.new_symbol,
                chart_packed_nodes=chart_step.new_packed,
            )
            + state.work
            + mask.work
        )
        steps.append(
            RunStep(
                t=t,
                counters=counters,
                t_update_ns=t1 - t0,
                t_mask_ns=t2 - t1,
                admissible=mask.count,
                config_nodes=state.configs.node_count,
                config_edges=state.configs.edge_count,
            )
        )
    return RunRecord(g, tuple(steps))


def write_trace(records: Iterable[CounterTraceRecord], out: IO[str]) -> int:
    """Write JSON Lines; returns the number of records."""
    n = 0
    for record in records:
        out.write(record.model_dump_json() + "\n")
        n += 1
    return n


def read_trace(path: Path) -> list[CounterTraceRecord]:
    try:
        with open(path, encoding="utf-8") as f:
            return [CounterTraceRecord.model_validate_json(line) for line in f if line.strip()]
    except OSError as e:
        raise TraceFileError(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise TraceFileError(f"{path} is not a counter trace: {e}") from e


def load_fit(path: Path) -> FitResult:
    """Read a fit written by 'gcd fit'."""
    try:
        return FitResult.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise TraceFileError(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise TraceFileError(f"{path} is not a fit result: {e}") from e


# --------------------------------------------------------------------------- fitting


def fit_affine(
    s: Sequence[float],
    t: Sequence[float],
    *,
    min_samples: int = 8,
    min_distinct: int = 4,
) -> FitResult:
    """Least squares fit of ``t ~ a * s + b`` subject to ``a, b >= 0``.

    The two-variable problem is solved exactly by comparing the feasible
    solutions of each active set.

    Raises:
        DegenerateDesignError: too few samples or too few distinct ``s`` values.
    """
    x = np.asarray(s, dtype=float)
    y = np.asarray(t, dtype=float)
    if x.shape != y.shape:
        raise DegenerateDesignError(f"{len(x)} proxy values but {len(y)} times")
    if len(x) < min_samples:
        raise DegenerateDesignError(f"{len(x)} samples; at least {min_samples} required")
    distinct = len(np.unique(x))
    if distinct < min_distinct:
        raise DegenerateDesignError(
            f"{distinct} distinct proxy values; at least {min_distinct} required"
        )

    candidates: list[tuple[float, float]] = []
    design = np.column_stack([x, np.ones_like(x)])
    (a_free, b_free), *_ = np.linalg.lstsq(design, y, rcond=None)
    candidates.append((float(a_free), float(b_free)))
    (a_only,), *_ = np.linalg.lstsq(x[:, None], y, rcond=None)
    candidates.append((max(float(a_only), 0.0), 0.0))
    candidates.append((0.0, max(float(y.mean()), 0.0)))
    candidates.append((0.0, 0.0))

    def sse(ab: tuple[float, float]) -> float:
        return float(np.sum((ab[0] * x + ab[1] - y) ** 2))

    a, b = min((c for c in candidates if c[0] >= 0 and c[1] >= 0), key=sse)
    residual = sse((a, b))
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - residual / total if total > 0 else (1.0 if residual == 0 else 0.0)
    pred = a * x + b
    nonzero = y != 0
    rel = np.abs(pred[nonzero] - y[nonzero]) / np.abs(y[nonzero])
    max_rel = float(rel.max()) if rel.size else 0.0
    logger.info("affine fit a=%.6g b=%.6g R^2=%.4f over %d samples", a, b, r_squared, len(x))
    return FitResult(a=a, b=b, r_squared=r_squared, max_relative_error=max_rel, samples=len(x))


def fit_trace(
    records: Sequence[CounterTraceRecord],
    weights: ProxyWeights,
    *,
    min_samples: int = 8,
    min_distinct: int = 4,
) -> FitResult:
    """Fit measured mask-phase times against the proxy of each trace record."""
    s = proxy((CounterVector.from_dict(r.counters) for r in records), weights)
    t = [float(r.t_mask_ns) for r in records]
    return fit_affine(s, t, min_samples=min_samples, min_distinct=min_distinct)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Slope of the least squares line through ``(log x, log y)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log regression needs positive values")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


# --------------------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class TnnModel:
    """Synthetic neural forward time per step: ``const:C`` or ``linear:C,D`` (C + D*t)."""

    constant: float
    slope: float = 0.0

    def __call__(self, t: int) -> float:
        return self.constant + self.slope * t

    @classmethod
    def parse(cls, text: str) -> TnnModel:
        kind, _, args = text.partition(":")
        try:
            values = [float(v) for v in args.split(",")] if args else []
        except ValueError as e:
            raise ValueError(f"invalid T_NN model '{text}'") from e
        if kind == "const" and len(values) == 1:
            model = cls(values[0])
        elif kind == "linear" and len(values) == 2:
            model = cls(values[0], values[1])
        else:
            raise ValueError(f"invalid T_NN model '{text}'; use const:C or linear:C,D")
        if model.constant < 0 or model.slope < 0:
            raise ValueError("T_NN model must be nonnegative")
        return model

    def label(self) -> str:
        if self.slope:
            return f"linear:{self.constant:g},{self.slope:g}"
        return f"const:{self.constant:g}"


@dataclass(frozen=True)
class EnvelopeStep:
    t: int
    t_nn: float
    t_mask: float
    t_sync: float
    t_sel_dense: float
    t_sel_sparse: float

    @property
    def critical(self) -> float:
        return max(self.t_nn, self.t_mask)

    @property
    def dense(self) -> float:
        return self.critical + self.t_sync + self.t_sel_dense

    @property
    def sparse(self) -> float:
        return self.critical + self.t_sync + self.t_sel_sparse


@dataclass(frozen=True)
class LatencyEnvelope:
    """Predicted per-step critical-path times for a beam of ``beam`` hypotheses.

    ``t_nn`` values come from a synthetic model named by ``t_nn_model``.
    """

    vocab_size: int
    beam: int
    t_nn_model: str
    fit: FitResult
    steps: tuple[EnvelopeStep, ...]
    symbolic_work: float
    mean_terminals_per_token: float | None = None
    notes: tuple[str, ...] = field(default=("T_NN is synthetic",))

    @property
    def dense_total(self) -> float:
        return sum(s.dense for s in self.steps)

    @property
    def sparse_total(self) -> float:
        return sum(s.sparse for s in self.steps)

    @property
    def crossover(self) -> int | None:
        """First step at which predicted masking time exceeds neural time."""
        return next((s.t for s in self.steps if s.t_mask > s.t_nn), None)

    def cumulative_dense(self) -> list[float]:
        return list(itertools.accumulate(s.dense for s in self.steps))


def envelope(
    vocab_size: int,
    s_series: Sequence[float],
    k_series: Sequence[int],
    beam: int,
    t_nn: TnnModel,
    fit: FitResult,
    *,
    t_sync: float = 0.0,
    select_ns_per_slot: float = 1.0,
    mean_terminals_per_token: float | None = None,
) -> LatencyEnvelope:
    """Critical-path envelope ``max(T_NN, T_mask) + T_sync + T_sel`` per step.

    With ``B`` hypotheses the neural and masking terms scale by ``B``; the dense
    selection path scans ``V`` slots per hypothesis, the sparse path ``K_t``.
    """
    if beam < 1:
        raise ValueError("beam must be at least 1")
    if len(s_series) != len(k_series):
        raise ValueError("proxy and admissible-count series differ in length")
    steps = []
    for t, (s, k) in enumerate(zip(s_series, k_series), start=1):
        steps.append(
            EnvelopeStep(
                t=t,
                t_nn=beam * t_nn(t),
                t_mask=fit.a * beam * s + fit.b,
                t_sync=t_sync,
                t_sel_dense=beam * vocab_size * select_ns_per_slot,
                t_sel_sparse=beam * k * select_ns_per_slot,
            )
        )
    work = beam * math.fsum(s_series)
    return LatencyEnvelope(
        vocab_size=vocab_size,
        beam=beam,
        t_nn_model=t_nn.label(),
        fit=fit,
        steps=tuple(steps),
        symbolic_work=work,
        mean_terminals_per_token=mean_terminals_per_token,
    )
