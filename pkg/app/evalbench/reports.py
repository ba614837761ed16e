# app/evalbench/reports.py

"""
Result tables rendered as TSV (for machines) and aligned text (for people).

    precision_recall_table  precision and recall per category and kernel
    fscore_table            F1 per category and kernel
    timing_table            prediction time per category and path
    macro_table             macro F1, precision and recall per kernel
    grid_table              every point of a grid search
"""

import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

from app.evalbench import EvalReport, GridSearchResult
from app.evalbench.bench import EXTRA_COLUMNS, TABLE_COLUMNS, BenchRow

logger = logging.getLogger(__name__)

ALL_ROW = "All"


@dataclass
class Table:
    headers: List[str]
    rows: List[List[str]] = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.headers)] + ["\t".join(row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        widths = [len(h) for h in self.headers]
        for row in self.rows:
            widths = [max(w, len(cell)) for w, cell in zip(widths, row)]

        def render(cells: Sequence[str]) -> str:
            first = cells[0].ljust(widths[0])
            rest = [cell.rjust(w) for cell, w in zip(cells[1:], widths[1:])]
            return "  ".join([first] + rest).rstrip()

        rule = "  ".join("-" * w for w in widths)
        return "\n".join([render(self.headers), rule] + [render(r) for r in self.rows]) + "\n"


def _metric(value: float) -> str:
    return f"{value:.3f}"


def _ms(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def _categories(reports: Mapping[str, EvalReport]) -> List[str]:
    first = next(iter(reports.values()))
    return [entry.category for entry in first.per_category]


def precision_recall_table(reports: Mapping[str, EvalReport]) -> Table:
    """Columns ``<kernel> P`` and ``<kernel> R`` per kernel; the last row holds macro values."""
    kernels = list(reports)
    table = Table(["category"] + [f"{k} {m}" for k in kernels for m in ("P", "R")])
    for category in _categories(reports):
        row = [category]
        for k in kernels:
            entry = reports[k].metrics(category)
            row += [_metric(entry.precision), _metric(entry.recall)]
        table.rows.append(row)
    macro = [ALL_ROW]
    for k in kernels:
        macro += [_metric(reports[k].macro_precision), _metric(reports[k].macro_recall)]
    table.rows.append(macro)
    return table


def fscore_table(reports: Mapping[str, EvalReport]) -> Table:
    kernels = list(reports)
    table = Table(["category"] + kernels)
    for category in _categories(reports):
        table.rows.append([category] + [_metric(reports[k].metrics(category).f1) for k in kernels])
    table.rows.append([ALL_ROW] + [_metric(reports[k].macro_f1) for k in kernels])
    return table


def timing_table(rows: Sequence[BenchRow]) -> Table:
    """Milliseconds per path, the precomputed NDK path and the dual/primal ratio."""
    columns = list(TABLE_COLUMNS) + list(EXTRA_COLUMNS)
    table = Table(["category"] + columns + ["dual/primal"])
    for row in rows:
        ratio = row.dual_primal_ratio
        table.rows.append([row.category] + [_ms(row.timings_ms.get(c)) for c in columns]
                          + ["-" if ratio is None else f"{ratio:.2f}"])
    return table


def macro_table(reports: Mapping[str, EvalReport]) -> Table:
    table = Table(["kernel", "F", "P", "R"])
    for kernel, report in reports.items():
        table.rows.append([kernel, _metric(report.macro_f1), _metric(report.macro_precision),
                           _metric(report.macro_recall)])
    return table


def grid_table(result: GridSearchResult) -> Table:
    table = Table(["kernel", "parameters", "C", "macro_f1", "converged"])
    for point in result.table:
        params = ",".join(f"{k}={v}" for k, v in point.kernel.model_dump().items() if k != "tag")
        table.rows.append([point.kernel.name, params or "-", f"{point.C:g}", f"{point.macro_f1:.4f}",
                           "yes" if point.converged else "no"])
    return table
