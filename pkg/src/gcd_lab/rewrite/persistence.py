"""Persistence of rewrite selections."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from ..config import write_atomic
from ..grammar import print_grammar
from .selection import Selection

TABLE_COLUMNS = ("digest", "depth", "sac", "kappa", "tokenizer", "size", "winner", "path")
PROXY_NOTE = "# costs are measured proxies on the given workload, not intrinsic SAC"


def render_grammar(selection: Selection) -> str:
    """Winning grammar in the grammar file format, with its rewrite path as comments."""
    member = selection.winner.member
    header = [
        f"# selected from {len(selection.table)} candidates",
        f"# priority: {','.join(c.value for c in selection.priority)}",
        f"# rewrites: {member.describe()}",
        PROXY_NOTE,
    ]
    return "\n".join(header) + "\n" + print_grammar(member.grammar)


def render_cost_table(selection: Selection) -> str:
    buf = io.StringIO()
    buf.write(PROXY_NOTE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for row in selection.table:
        m, c = row.member, row.cost
        writer.writerow(
            [
                m.digest,
                m.depth,
                f"{c.sac:.6g}",
                c.kappa,
                f"{c.tokenizer:.6g}",
                m.size,
                int(row is selection.winner),
                m.describe(),
            ]
        )
    return buf.getvalue()


def save_selection(
    selection: Selection, grammar_path: Path | None = None, table_path: Path | None = None
) -> None:
    """Write the winning grammar and the cost table atomically."""
    if grammar_path is not None:
        write_atomic(grammar_path, render_grammar(selection))
    if table_path is not None:
        write_atomic(table_path, render_cost_table(selection))
