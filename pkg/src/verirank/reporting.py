"""Report tables: per-model rows, column averages, CSV/JSON/text emission.

Cells hold exact rationals; half-up rounding to 2 decimals happens only in
the renderers, so transcribed percentages aggregate without drift. Missing
cells (closed-source models without token probabilities) stay None and are
skipped by the averages.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import ColumnMismatchError
from .metrics import _as_fraction

Cell = Fraction | None


def to_cell(value) -> Cell:
    if value is None:
        return None
    frac = _as_fraction(value)
    if not 0 <= frac <= 100:
        raise ValueError(f"percent out of range [0, 100]: {value!r}")
    return frac


@dataclass(frozen=True)
class ReportRow:
    """One table row: base pass@1, reranked pass@1 per strategy, pass@k."""

    model: str
    pass1: Cell
    reranked: tuple[tuple[str, Cell], ...]
    passk: Cell

    @classmethod
    def make(cls, model: str, pass1, reranked: dict, passk) -> "ReportRow":
        return cls(
            model=model,
            pass1=to_cell(pass1),
            reranked=tuple((name, to_cell(v)) for name, v in reranked.items()),
            passk=to_cell(passk),
        )

    @property
    def strategy_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.reranked)


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]
    average: ReportRow


def _mean(cells: Sequence[Cell]) -> Cell:
    present = [c for c in cells if c is not None]
    if not present:
        return None
    return sum(present, Fraction(0)) / len(present)


def aggregate_report(rows: Sequence[ReportRow]) -> ReportTable:
    """Append a column-mean row; all rows must share the strategy columns."""
    if not rows:
        raise ValueError("aggregate_report needs at least one row")
    names = rows[0].strategy_names
    for row in rows[1:]:
        if row.strategy_names != names:
            raise ColumnMismatchError(
                f"row {row.model!r} has columns {row.strategy_names}, "
                f"expected {names}"
            )
    average = ReportRow(
        model="Avg.",
        pass1=_mean([r.pass1 for r in rows]),
        reranked=tuple(
            (name, _mean([dict(r.reranked)[name] for r in rows])) for name in names
        ),
        passk=_mean([r.passk for r in rows]),
    )
    return ReportTable(rows=tuple(rows), average=average)


def format_percent(value, places: int = 2) -> str:
    """Half-up decimal rounding, applied only at emission time."""
    if value is None:
        return "-"
    quantum = Decimal(1).scaleb(-places)
    with localcontext() as ctx:
        ctx.prec = 50
        if isinstance(value, Fraction):
            dec = Decimal(value.numerator) / Decimal(value.denominator)
        else:
            dec = Decimal(repr(float(value)))
        return str(dec.quantize(quantum, rounding=ROUND_HALF_UP))


def format_ratio(value, places: int = 3) -> str:
    return format_percent(value, places=places)


def _header(table: ReportTable, k: int) -> list[str]:
    return ["Model", "Pass@1", *table.rows[0].strategy_names, f"Pass@{k}"]


def _row_cells(row: ReportRow) -> list[str]:
    return [
        row.model,
        format_percent(row.pass1),
        *[format_percent(v) for _, v in row.reranked],
        format_percent(row.passk),
    ]


def render_text(table: ReportTable, k: int = 5) -> str:
    header = _header(table, k)
    body = [_row_cells(r) for r in table.rows]
    avg = _row_cells(table.average)
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body + [avg]))
        for i in range(len(header))
    ]

    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    lines = [fmt(header), rule]
    lines.extend(fmt(line) for line in body)
    lines.append(rule)
    lines.append(fmt(avg))
    return "\n".join(lines) + "\n"


def render_csv(table: ReportTable, k: int = 5) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_header(table, k))
    for row in list(table.rows) + [table.average]:
        cells = _row_cells(row)
        writer.writerow([c if c != "-" else "" for c in cells])
    return buf.getvalue()


def _row_json(row: ReportRow) -> dict:
    def cell(v: Cell):
        return None if v is None else format_percent(v)

    return {
        "model": row.model,
        "pass1": cell(row.pass1),
        "reranked": {name: cell(v) for name, v in row.reranked},
        "passk": cell(row.passk),
    }


def render_json(table: ReportTable, k: int = 5) -> dict:
    return {
        "k": k,
        "rows": [_row_json(r) for r in table.rows],
        "average": _row_json(table.average),
    }


def load_rows(path) -> list[ReportRow]:
    """Read rows from a JSON file: [{model, pass1, reranked: {...}, passk}]."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [
        ReportRow.make(
            model=rec["model"],
            pass1=rec.get("pass1"),
            reranked=rec.get("reranked") or {},
            passk=rec.get("passk"),
        )
        for rec in data
    ]


def write_report(table: ReportTable, out_dir, formats=("json", "csv", "txt"), k: int = 5) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(
            json.dumps(render_json(table, k), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        written["json"] = path
    if "csv" in formats:
        path = out_dir / "report.csv"
        path.write_text(render_csv(table, k), encoding="utf-8")
        written["csv"] = path
    if "txt" in formats:
        path = out_dir / "report.txt"
        path.write_text(render_text(table, k), encoding="utf-8")
        written["txt"] = path
    return written
