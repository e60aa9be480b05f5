"""Pydantic models for lab configuration and on-disk file formats."""

from __future__ import annotations

from datetime import datetime
from decimal import Decimal
from enum import Enum

from pydantic import BaseModel, Field, field_validator, model_validator


class Worklist(str, Enum):
    """Saturation worklist discipline."""

    FIFO = "fifo"
    LIFO = "lifo"


class CostComponent(str, Enum):
    """Grammar cost components used for representative selection."""

    SAC = "sac"
    KAPPA = "kappa"
    TOKENIZER = "tokenizer"


class EngineSettings(BaseModel):
    """Reachability engine and simulation limits."""

    simulate_max_configurations: int = Field(
        default=200_000, ge=1, description="Configuration cap for the brute-force NPDA simulator"
    )
    worklist: Worklist = Field(default=Worklist.FIFO, description="Saturation worklist order")


class DecodeSettings(BaseModel):
    """Defaults for constrained sampling and beam search."""

    seed: int = Field(default=0, ge=0)
    beam: int = Field(default=1, ge=1, description="Beam width B")
    max_len: int = Field(default=32, ge=1, description="Maximum tokens per output (T_max)")


class ConditioningSettings(BaseModel):
    """Exact conditioning limits and tolerances."""

    enumeration_budget: int = Field(
        default=10**7, ge=1, description="Upper bound on |V|^T_max for exhaustive enumeration"
    )
    float_tolerance: float = Field(default=1e-9, gt=0.0)
    exact_tolerance: float = Field(default=1e-12, gt=0.0)


class RewriteSettings(BaseModel):
    """Bounded rewrite search."""

    max_budget: int = Field(default=3, ge=0, description="Largest permitted rewrite budget k")
    member_cap: int = Field(default=10_000, ge=1, description="Family explosion guard")
    priority: list[CostComponent] = Field(
        default_factory=lambda: [CostComponent.SAC, CostComponent.KAPPA, CostComponent.TOKENIZER]
    )

    @field_validator("priority")
    @classmethod
    def validate_priority(cls, v: list[CostComponent]) -> list[CostComponent]:
        """Priority must name each component at most once."""
        if not v:
            raise ValueError("priority must name at least one cost component")
        if len(set(v)) != len(v):
            raise ValueError("priority lists a cost component twice")
        return v


class PerfSettings(BaseModel):
    """Performance model parameters."""

    fit_min_samples: int = Field(default=8, ge=2)
    fit_min_distinct: int = Field(default=4, ge=2)
    t_sync_ns: float = Field(default=0.0, ge=0.0, description="Synchronization overhead per step")
    select_ns_per_slot: float = Field(
        default=1.0, ge=0.0, description="Selection cost per scanned vocabulary slot"
    )
    default_weights: dict[str, float] = Field(
        default_factory=lambda: {
            "chart_packed_nodes": 1.0,
            "chart_symbol_nodes": 1.0,
            "engine_edges_touched": 1.0,
        }
    )


class LabConfig(BaseModel):
    """Root configuration."""

    engine: EngineSettings = Field(default_factory=EngineSettings)
    decode: DecodeSettings = Field(default_factory=DecodeSettings)
    conditioning: ConditioningSettings = Field(default_factory=ConditioningSettings)
    rewrite: RewriteSettings = Field(default_factory=RewriteSettings)
    perf: PerfSettings = Field(default_factory=PerfSettings)


# --------------------------------------------------------------------------- file formats


class VocabEntry(BaseModel):
    """One vocabulary file entry; the eos entry has no terminals."""

    id: int = Field(..., ge=0)
    name: str
    terminals: list[str] | None = None


class LmFile(BaseModel):
    """Table toy language model.

    Probabilities are held as ``Decimal`` so that JSON literals such as ``0.6`` are
    converted to exact rationals rather than binary floats.
    """

    vocab_ref: str | None = None
    default: list[Decimal] | None = Field(
        default=None, description="Distribution for prefixes absent from the table"
    )
    table: dict[str, list[Decimal]] = Field(
        default_factory=dict, description="Space-separated token names to distribution"
    )

    @model_validator(mode="after")
    def validate_rows(self) -> LmFile:
        """All rows share one width and contain no negative entries."""
        rows = list(self.table.values())
        if self.default is not None:
            rows.append(self.default)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ValueError("distributions have differing lengths")
        for row in rows:
            if any(p < 0 for p in row):
                raise ValueError("negative probability")
            if sum(row) <= 0:
                raise ValueError("distribution has no mass")
        return self


class RunManifest(BaseModel):
    """Provenance record emitted with every CLI run."""

    subcommand: str
    inputs: dict[str, str] = Field(
        default_factory=dict, description="Input reference to sha256 of its content"
    )
    seed: int | None = None
    version: str
    started_at: datetime
    finished_at: datetime | None = None


class StepTraceRecord(BaseModel):
    """One JSON Lines record of a decoding trace."""

    t: int
    admissible: int = Field(..., description="Admissible token count K_t")
    token: int
    token_name: str
    p_pre: float = Field(..., description="Unmasked probability of the chosen token")
    p_post: float = Field(..., description="Masked probability of the chosen token")
    counters: dict[str, int] = Field(default_factory=dict)


class ExpansionRecord(BaseModel):
    """One JSON Lines record of a beam-search trace."""

    t: int
    phase: str = Field(..., description="'mask' or 'advance'")
    tokens: list[str] = Field(..., description="Token names of the hypothesis after the phase")
    counters: dict[str, int] = Field(default_factory=dict)


class CounterTraceRecord(BaseModel):
    """One JSON Lines record of a benchmark trace."""

    t: int
    counters: dict[str, int]
    t_update_ns: int = 0
    t_mask_ns: int = 0


class FitResult(BaseModel):
    """Affine proxy-to-time model ``T_mask ~ a * S + b``."""

    a: float = Field(..., ge=0.0)
    b: float = Field(..., ge=0.0)
    r_squared: float
    max_relative_error: float
    samples: int = Field(..., ge=0)
