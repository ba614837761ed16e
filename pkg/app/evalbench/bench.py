# app/evalbench/bench.py

"""
Prediction timing harness.

Only prediction is timed: deriving the precomputed and complex primal forms
happens before the timed region and is reported separately as build time.
Every path is warmed up, then run ``repetitions`` times over all probes with
the garbage collector paused; the reported figure is the median total time
in milliseconds.
"""

import gc
import logging
import statistics
import time
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from pydantic import BaseModel, Field

from app.config import BenchConfig
from app.evalbench.synthetic import synthetic_ndk_model, synthetic_probes, synthetic_reference_models
from app.ndk_fast import build_complex_primal, decide_complex_primal, decide_precomputed, precompute_dual
from app.svm import SvmModel, decide_dual
from app.veccore import SparseVector

logger = logging.getLogger(__name__)

# column order of the timing table
TABLE_COLUMNS = ("ndk_primal", "ndk_dual", "square", "cubic", "rbf", "linear_dual")
REFERENCE_COLUMNS = ("square", "cubic", "rbf", "linear_dual")
EXTRA_COLUMNS = ("ndk_precomputed",)


class BenchRow(BaseModel):
    """Median prediction time (ms over all probes) per path for one category."""

    category: str
    n_probes: int = Field(..., ge=0)
    m: int = Field(0, ge=0, description="Support vectors of the NDK model")
    timings_ms: Dict[str, Optional[float]] = Field(default_factory=dict)
    build_ms: Dict[str, float] = Field(default_factory=dict)

    @property
    def dual_primal_ratio(self) -> Optional[float]:
        dual, primal = self.timings_ms.get("ndk_dual"), self.timings_ms.get("ndk_primal")
        if not dual or not primal:
            return None
        return dual / primal


def time_path(decide: Callable[[SparseVector], object], probes: Sequence[SparseVector],
              cfg: Optional[BenchConfig] = None) -> float:
    """Median over repetitions of the time to decide all probes, in milliseconds."""
    cfg = cfg or BenchConfig()
    for _ in range(cfg.warmup):
        for x in probes:
            decide(x)

    samples: List[float] = []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(cfg.repetitions):
            start = time.perf_counter()
            for x in probes:
                decide(x)
            samples.append((time.perf_counter() - start) * 1000.0)
    finally:
        if gc_was_enabled:
            gc.enable()
    return statistics.median(samples)


def bench_predict(ndk: SvmModel, probes: Sequence[SparseVector],
                  reference: Optional[Mapping[str, SvmModel]] = None,
                  cfg: Optional[BenchConfig] = None, category: str = "all") -> BenchRow:
    """
    Time the three NDK paths of one model and the dual path of the reference models.

    Parameters:
    -----------
    ndk : SvmModel
        NDK model; its precomputed and primal forms are built here.
    probes : sequence of SparseVector
    reference : mapping, optional
        Column name (``square``, ``cubic``, ``rbf``, ``linear_dual``) -> model.
    cfg : BenchConfig, optional
        Repetitions (>= 5) and warm-up runs.
    """
    cfg = cfg or BenchConfig()
    reference = reference or {}
    build: Dict[str, float] = {}

    start = time.perf_counter()
    fast = precompute_dual(ndk)
    build["ndk_precomputed"] = (time.perf_counter() - start) * 1000.0
    start = time.perf_counter()
    primal = build_complex_primal(ndk)
    build["ndk_primal"] = (time.perf_counter() - start) * 1000.0

    timings: Dict[str, Optional[float]] = {
        "ndk_primal": time_path(lambda x: decide_complex_primal(primal, x), probes, cfg),
        "ndk_dual": time_path(lambda x: decide_dual(ndk, x), probes, cfg),
        "ndk_precomputed": time_path(lambda x: decide_precomputed(fast, x), probes, cfg),
    }
    for column in REFERENCE_COLUMNS:
        model = reference.get(column)
        timings[column] = None if model is None else time_path(lambda x, mdl=model: decide_dual(mdl, x), probes, cfg)

    row = BenchRow(category=category, n_probes=len(probes), m=ndk.m, timings_ms=timings, build_ms=build)
    logger.info(f"Benchmark {category}: m={ndk.m} probes={len(probes)} "
                f"dual={timings['ndk_dual']:.2f}ms primal={timings['ndk_primal']:.2f}ms")
    return row


def total_row(rows: Sequence[BenchRow], category: str = "all") -> BenchRow:
    """Sum of the per-category rows; a column is missing if any row lacks it."""
    columns = TABLE_COLUMNS + EXTRA_COLUMNS
    timings: Dict[str, Optional[float]] = {}
    for column in columns:
        values = [row.timings_ms.get(column) for row in rows]
        timings[column] = None if not rows or any(v is None for v in values) else float(sum(values))
    build: Dict[str, float] = {}
    for row in rows:
        for key, value in row.build_ms.items():
            build[key] = build.get(key, 0.0) + value
    return BenchRow(category=category, n_probes=sum(r.n_probes for r in rows),
                    m=sum(r.m for r in rows), timings_ms=timings, build_ms=build)


def bench_categories(ndk: Mapping[str, SvmModel], probes: Mapping[str, Sequence[SparseVector]],
                     reference: Optional[Mapping[str, Mapping[str, SvmModel]]] = None,
                     cfg: Optional[BenchConfig] = None) -> List[BenchRow]:
    """
    One row per category plus a final ``all`` row with the sums.

    ``reference`` maps a column name to per-category models.
    """
    reference = reference or {}
    rows = []
    for category in sorted(ndk):
        models = {column: per_cat[category] for column, per_cat in reference.items() if category in per_cat}
        rows.append(bench_predict(ndk[category], probes[category], models, cfg, category))
    rows.append(total_row(rows))
    return rows


def run_synthetic_benchmark(m: int = 2000, dim: int = 10_000, density: float = 0.01,
                            n_probes: int = 1000, cfg: Optional[BenchConfig] = None,
                            seed: int = 0, with_reference: bool = True) -> BenchRow:
    """Benchmark on a random NDK model and random probes of the given shape."""
    model = synthetic_ndk_model(m, dim, density, seed)
    probes = synthetic_probes(n_probes, dim, density, seed + 1)
    reference = synthetic_reference_models(m, dim, density, seed) if with_reference else None
    return bench_predict(model, probes, reference, cfg, category=f"synthetic_m{m}")
