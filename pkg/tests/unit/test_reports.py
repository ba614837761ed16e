# tests/unit/test_reports.py

import pytest

from app.config import SmoConfig
from app.evalbench import CategoryMetrics, EvalReport, GridPoint, GridSearchResult
from app.evalbench.bench import BenchRow
from app.evalbench.reports import (
    Table,
    fscore_table,
    grid_table,
    macro_table,
    precision_recall_table,
    timing_table,
)
from app.kernels import LinearKernel, NdkKernel


def _report(rows):
    per_category = [CategoryMetrics(category=c, precision=p, recall=r, f1=f, support=s) for c, p, r, f, s in rows]
    n = len(per_category)
    return EvalReport(
        per_category=per_category,
        macro_precision=sum(m.precision for m in per_category) / n,
        macro_recall=sum(m.recall for m in per_category) / n,
        macro_f1=sum(m.f1 for m in per_category) / n,
        n_documents=10,
    )


@pytest.fixture
def reports():
    """Two kernels over the same two categories."""
    return {
        "ndk": _report([("earn", 0.9, 0.8, 0.848, 6), ("grain", 0.612, 0.612, 0.612, 4)]),
        "rbf": _report([("earn", 1.0, 0.5, 0.667, 6), ("grain", 0.5, 1.0, 0.667, 4)]),
    }


def test_table_renderings():
    """TSV and aligned text renderings of the same table."""
    table = Table(["name", "value"], [["a", "1.5"], ["long name", "10"]])
    assert table.to_tsv() == "name\tvalue\na\t1.5\nlong name\t10\n"
    assert table.to_text().splitlines() == [
        "name       value",
        "---------  -----",
        "a            1.5",
        "long name     10",
    ]


def test_precision_recall_table(reports):
    """Precision and recall per category."""
    table = precision_recall_table(reports)
    assert table.headers == ["category", "ndk P", "ndk R", "rbf P", "rbf R"]
    assert table.rows[0] == ["earn", "0.900", "0.800", "1.000", "0.500"]
    assert table.rows[-1] == ["All", "0.756", "0.706", "0.750", "0.750"]


def test_fscore_and_macro_tables(reports):
    """F1 per category and the macro averages."""
    fscore = fscore_table(reports)
    assert fscore.headers == ["category", "ndk", "rbf"]
    assert fscore.rows[1] == ["grain", "0.612", "0.667"]
    assert fscore.rows[-1][0] == "All"
    macro = macro_table(reports)
    assert macro.headers == ["kernel", "F", "P", "R"]
    assert macro.rows[0] == ["ndk", "0.730", "0.756", "0.706"]


def test_timing_table_marks_missing_columns():
    """Missing timings are shown as a dash."""
    rows = [BenchRow(category="earn", n_probes=4, timings_ms={"ndk_dual": 12.0, "ndk_primal": 3.0,
                                                              "ndk_precomputed": 2.5, "rbf": 20.0})]
    table = timing_table(rows)
    assert table.headers == ["category", "ndk_primal", "ndk_dual", "square", "cubic", "rbf", "linear_dual",
                             "ndk_precomputed", "dual/primal"]
    assert table.rows[0] == ["earn", "3.000", "12.000", "-", "-", "20.000", "-", "2.500", "4.00"]


def test_grid_table():
    """One row per grid point."""
    result = GridSearchResult(
        family="ndk",
        kernel=NdkKernel(a=0.5),
        smo=SmoConfig(C=10.0),
        macro_f1=0.9,
        table=[GridPoint(kernel=NdkKernel(a=0.5), C=10.0, macro_f1=0.9),
               GridPoint(kernel=LinearKernel(), C=0.1, macro_f1=0.25, converged=False)],
    )
    table = grid_table(result)
    assert table.rows[0] == ["ndk", "a=0.5,c=0.0,allow_negative_c=False", "10", "0.9000", "yes"]
    assert table.rows[1] == ["linear", "-", "0.1", "0.2500", "no"]
