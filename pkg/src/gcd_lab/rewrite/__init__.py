"""Language-preserving grammar rewrites and cost-driven representative selection.

A seed grammar is closed under a bounded number of inlining and delegation
elimination steps; every member of the resulting family is measured on a
workload and the cheapest one under a priority order is selected.
"""

from .family import FamilyMember, RewriteFamily, enumerate_family
from .persistence import render_cost_table, render_grammar, save_selection
from .selection import (
    CostRow,
    CostVector,
    Selection,
    is_pointwise_minimal,
    measure_cost,
    select_min,
)
from .steps import (
    RewriteKind,
    RewriteStep,
    canonical_form,
    eliminate_delegation,
    grammar_hash,
    inline,
    successors,
)

__all__ = [
    "CostRow",
    "CostVector",
    "FamilyMember",
    "RewriteFamily",
    "RewriteKind",
    "RewriteStep",
    "Selection",
    "canonical_form",
    "eliminate_delegation",
    "enumerate_family",
    "grammar_hash",
    "inline",
    "is_pointwise_minimal",
    "measure_cost",
    "render_cost_table",
    "render_grammar",
    "save_selection",
    "select_min",
    "successors",
]
