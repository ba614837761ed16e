# app/evalbench/__init__.py

"""
Module: evalbench

One-vs-rest multi-label classification on top of the binary SVM, together
with the evaluation protocol around it: seeded train/validation/test
splits, per-category and macro precision/recall/F1, bias tuning on held-out
data, hyperparameter grid search, positive oversampling and the category
histogram of a corpus.

Timing lives in ``app.evalbench.bench``, synthetic data in
``app.evalbench.synthetic`` and table rendering in ``app.evalbench.reports``.
"""

import logging
import math
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from sklearn.metrics import f1_score, precision_recall_curve, precision_recall_fscore_support

from app.config import AssignmentMode, DecisionPath, GridConfig, SmoConfig, SplitConfig
from app.exceptions import ConvergenceError, DataIOError, InvalidParameterError, KernelMismatchError
from app.kernels import KernelSpec
from app.logger_module import StructuredLogger
from app.modelio import ModelBundle, read_model_file, write_model_file
from app.ndk_fast import build_complex_primal, decide_complex_primal, decide_precomputed, precompute_dual
from app.svm import SvmModel, TrainingSet, decision_value, smo_train
from app.veccore import SparseVector

logger = logging.getLogger(__name__)
structured = StructuredLogger(logger)

Probe = Union[SparseVector, Mapping[str, SparseVector]]

_CATEGORY_NAME = re.compile(r"^[\w.\-]+$")
CATEGORIES_FILE = "categories.txt"


# ---------------------------------------------------------------------------
# Classifier and assignment
# ---------------------------------------------------------------------------

def bundle_value(bundle: ModelBundle, x: SparseVector, path: DecisionPath = "dual") -> float:
    """
    Pre-sign decision value of one model along the requested path.

    The precomputed and primal forms are derived on first use and kept in
    the bundle.
    """
    if path == "dual":
        return decision_value(bundle.model, x)
    if path == "precomputed":
        if bundle.fast is None:
            bundle.fast = precompute_dual(bundle.model)
        return decide_precomputed(bundle.fast, x).value
    if path == "primal":
        if bundle.primal is None:
            bundle.primal = build_complex_primal(bundle.model)
        return decide_complex_primal(bundle.primal, x).value
    raise InvalidParameterError(f"unknown decision path {path!r}")


@dataclass
class MultiLabelClassifier:
    """
    One binary model per category, combined by the assignment rule.

    Attributes:
    -----------
    categories : list of str
        Category order; ties in the assignment are broken by it.
    models : dict
        category -> ModelBundle
    assignment_mode : str
        ``independent_threshold`` or ``signed_distance_argmax_fallback``.
    path : str
        Decision path used for NDK models (``dual``, ``precomputed``,
        ``primal``).
    """

    categories: List[str]
    models: Dict[str, ModelBundle]
    assignment_mode: AssignmentMode = "signed_distance_argmax_fallback"
    path: DecisionPath = "dual"

    def __post_init__(self):
        if not self.categories:
            raise InvalidParameterError("a classifier needs at least one category")
        if len(set(self.categories)) != len(self.categories):
            raise InvalidParameterError("duplicate category names")
        missing = [c for c in self.categories if c not in self.models]
        if missing or len(self.models) != len(self.categories):
            raise InvalidParameterError(f"need exactly one model per category, missing {missing}")
        if self.path != "dual":
            for category in self.categories:
                if self.models[category].model.kernel.tag != "ndk":
                    raise KernelMismatchError(
                        f"path {self.path!r} needs NDK models; {category} uses "
                        f"{self.models[category].model.kernel.tag}")

    def dims(self) -> Dict[str, int]:
        return {c: self.models[c].model.dim for c in self.categories}

    def value(self, category: str, x: Probe) -> float:
        vector = x[category] if isinstance(x, Mapping) else x
        return bundle_value(self.models[category], vector, self.path)

    def values(self, x: Probe) -> List[float]:
        return [self.value(c, x) for c in self.categories]

    def assign(self, x: Probe) -> FrozenSet[str]:
        return assign_from_values(self.categories, self.values(x), self.assignment_mode)


def assign_from_values(categories: Sequence[str], values: Sequence[float],
                       mode: AssignmentMode = "signed_distance_argmax_fallback") -> FrozenSet[str]:
    """
    The assignment rule on precomputed decision values.

    Every category with a value >= 0 is assigned. In the fallback mode an
    otherwise empty result becomes the category with the largest value,
    the first one in category order on ties.
    """
    chosen = frozenset(c for c, v in zip(categories, values) if v >= 0)
    if chosen or mode == "independent_threshold" or not categories:
        return chosen
    best = int(np.argmax(np.asarray(values, dtype=np.float64)))
    return frozenset([categories[best]])


def assign_labels(clf: MultiLabelClassifier, x: Probe) -> FrozenSet[str]:
    """Categories assigned to one document (a vector or one vector per category)."""
    return clf.assign(x)


def ordered(categories: Sequence[str], assigned: Iterable[str]) -> List[str]:
    """Assigned categories in classifier order."""
    assigned = set(assigned)
    return [c for c in categories if c in assigned]


def save_classifier(clf: MultiLabelClassifier, directory: Union[str, Path]) -> Path:
    """Write one ``<category>.model`` per category plus ``categories.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for category in clf.categories:
        bundle = clf.models[category]
        write_model_file(directory / f"{category}.model", bundle.model, bundle.fast, bundle.primal)
    (directory / CATEGORIES_FILE).write_text("\n".join(clf.categories) + "\n", encoding="utf-8")
    logger.info(f"Saved {len(clf.categories)} category models to {directory}")
    return directory


def load_classifier(directory: Union[str, Path],
                    assignment_mode: AssignmentMode = "signed_distance_argmax_fallback",
                    path: DecisionPath = "dual") -> MultiLabelClassifier:
    """Read a directory written by ``save_classifier``."""
    directory = Path(directory)
    listing = directory / CATEGORIES_FILE
    if not listing.is_file():
        logger.error(f"No {CATEGORIES_FILE} in {directory}")
        raise DataIOError(f"cannot read {listing}")
    categories = [line.strip() for line in listing.read_text(encoding="utf-8").splitlines() if line.strip()]
    models = {c: read_model_file(directory / f"{c}.model") for c in categories}
    return MultiLabelClassifier(categories, models, assignment_mode, path)


def check_category_name(category: str) -> str:
    if not _CATEGORY_NAME.match(category):
        raise InvalidParameterError(
            f"category name {category!r} may only contain letters, digits, '.', '_' and '-'")
    return category


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

class CategoryMetrics(BaseModel):
    category: str
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    support: int = Field(0, ge=0, description="Documents carrying the category")


class EvalReport(BaseModel):
    """
    Per-category and macro-averaged metrics of one evaluation run.

    ``timing_ms`` holds the time spent computing decision values per
    category; ``total_ms`` is their sum.
    """

    per_category: List[CategoryMetrics]
    macro_precision: float = Field(..., ge=0, le=1)
    macro_recall: float = Field(..., ge=0, le=1)
    macro_f1: float = Field(..., ge=0, le=1)
    n_documents: int = 0
    path: DecisionPath = "dual"
    timing_ms: Dict[str, float] = Field(default_factory=dict)
    total_ms: float = 0.0

    def metrics(self, category: str) -> CategoryMetrics:
        for entry in self.per_category:
            if entry.category == category:
                return entry
        raise KeyError(category)


def f1_from(precision: float, recall: float) -> float:
    """2PR / (P + R), 0 when P + R = 0."""
    total = precision + recall
    return 2.0 * precision * recall / total if total > 0 else 0.0


def _indicator(categories: Sequence[str], label_sets: Sequence[Iterable[str]]) -> np.ndarray:
    matrix = np.zeros((len(label_sets), len(categories)), dtype=np.int8)
    column = {c: j for j, c in enumerate(categories)}
    for i, labels in enumerate(label_sets):
        for c in labels:
            if c in column:
                matrix[i, column[c]] = 1
    return matrix


def score_assignments(categories: Sequence[str], predicted: Sequence[Iterable[str]],
                      actual: Sequence[Iterable[str]]) -> EvalReport:
    """
    Precision, recall and F1 per category and their unweighted means.

    A metric whose denominator is zero is 0.
    """
    if len(predicted) != len(actual):
        raise InvalidParameterError(f"{len(predicted)} predictions for {len(actual)} documents")
    if not categories:
        raise InvalidParameterError("no categories to score")
    if not actual:
        zeros = [CategoryMetrics(category=c, precision=0.0, recall=0.0, f1=0.0) for c in categories]
        return EvalReport(per_category=zeros, macro_precision=0.0, macro_recall=0.0, macro_f1=0.0)

    y_true = _indicator(categories, actual)
    y_pred = _indicator(categories, predicted)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, average=None, labels=list(range(len(categories))), zero_division=0)
    per_category = [
        CategoryMetrics(category=c, precision=float(p), recall=float(r), f1=float(f), support=int(s))
        for c, p, r, f, s in zip(categories, precision, recall, f1, support)
    ]
    return EvalReport(
        per_category=per_category,
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        n_documents=len(actual),
    )


def evaluate(clf: MultiLabelClassifier, probes: Sequence[Probe],
             label_sets: Sequence[Iterable[str]]) -> EvalReport:
    """
    Classify every probe and score the assignments against the true labels.

    Parameters:
    -----------
    clf : MultiLabelClassifier
    probes : sequence
        One SparseVector per document, or one mapping category -> vector
        per document when features are category-specific.
    label_sets : sequence
        True categories per document.
    """
    if len(probes) != len(label_sets):
        raise InvalidParameterError(f"{len(probes)} probes for {len(label_sets)} label sets")
    values = np.zeros((len(probes), len(clf.categories)))
    timing = {}
    for j, category in enumerate(clf.categories):
        start = time.perf_counter()
        for i, x in enumerate(probes):
            values[i, j] = clf.value(category, x)
        timing[category] = (time.perf_counter() - start) * 1000
    predicted = [assign_from_values(clf.categories, row, clf.assignment_mode) for row in values]
    report = score_assignments(clf.categories, predicted, [frozenset(s) for s in label_sets])
    report.path = clf.path
    report.timing_ms = timing
    report.total_ms = float(sum(timing.values()))
    structured.log_prediction(clf.path, len(probes) * len(clf.categories), report.total_ms)
    logger.info(f"Evaluated {len(probes)} documents: macro F1={report.macro_f1:.4f}")
    return report


def sample_evaluate(clf: MultiLabelClassifier, probes: Sequence[Probe],
                    label_sets: Sequence[Iterable[str]], sample_size: int,
                    n_samples: int = 3, seed: int = 0) -> List[EvalReport]:
    """Evaluate on ``n_samples`` seeded random samples (without replacement) of the test data."""
    if sample_size < 1 or n_samples < 1:
        raise InvalidParameterError("sample_size and n_samples must be positive")
    if sample_size > len(probes):
        raise InvalidParameterError(f"sample of {sample_size} from {len(probes)} documents")
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(n_samples):
        pick = np.sort(rng.choice(len(probes), size=sample_size, replace=False))
        reports.append(evaluate(clf, [probes[i] for i in pick], [label_sets[i] for i in pick]))
    return reports


# ---------------------------------------------------------------------------
# Bias tuning
# ---------------------------------------------------------------------------

def _heldout_scores(model: SvmModel, heldout: TrainingSet) -> np.ndarray:
    return np.array([decision_value(model, x) - model.bias for x in heldout.vectors])


def tune_bias(model: SvmModel, heldout: TrainingSet, metric: Literal["f1"] = "f1") -> float:
    """
    Bias maximising F1 of the rule f(x) >= 0 on held-out data.

    Candidates are one threshold below all held-out scores, the midpoints
    between consecutive distinct scores and one threshold above all of them.
    Among equally good candidates the one closest to the current bias wins.
    With no positive example in the held-out data the bias is chosen so
    that nothing is predicted positive.

    Raises:
    -------
    InvalidParameterError
        On an empty held-out set or an unsupported metric.
    """
    if metric != "f1":
        raise InvalidParameterError(f"unsupported metric {metric!r}")
    if len(heldout) == 0:
        logger.error("Bias tuning needs held-out examples")
        raise InvalidParameterError("empty held-out set")

    scores = _heldout_scores(model, heldout)
    positive = np.asarray(heldout.labels) == 1
    distinct = np.unique(scores)
    above_all = float(distinct[-1] + 1.0)
    if not positive.any():
        logger.warning("No positive held-out examples; bias set to reject everything")
        return -above_all

    precision, recall, thresholds = precision_recall_curve(positive.astype(int), scores)
    precision, recall = precision[:-1], recall[:-1]
    total = precision + recall
    f1 = np.divide(2 * precision * recall, total, out=np.zeros_like(total), where=total > 0)

    # predicting "score >= s" for a distinct score s is the same split as
    # thresholding at the midpoint below s (or below the minimum)
    position = np.searchsorted(distinct, thresholds)
    below = np.where(position > 0, distinct[np.maximum(position - 1, 0)], distinct[0] - 2.0)
    cut = (below + thresholds) / 2.0
    candidates = np.append(-cut, -above_all)
    f1 = np.append(f1, 0.0)

    best = f1.max()
    tied = np.flatnonzero(f1 == best)
    choice = tied[np.argmin(np.abs(candidates[tied] - model.bias))]
    logger.debug(f"Bias tuned from {model.bias:.6g} to {candidates[choice]:.6g} (F1={best:.4f})")
    return float(candidates[choice])


def validation_f1(model: SvmModel, heldout: TrainingSet) -> float:
    """Binary F1 of the rule f(x) >= 0."""
    y_true = (np.asarray(heldout.labels) == 1).astype(int)
    y_pred = np.array([decision_value(model, x) >= 0 for x in heldout.vectors], dtype=int)
    return float(f1_score(y_true, y_pred, zero_division=0))


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

class GridPoint(BaseModel):
    kernel: KernelSpec
    C: float
    macro_f1: float
    per_category_f1: Dict[str, float] = Field(default_factory=dict)
    converged: bool = True


class GridSearchResult(BaseModel):
    """Best grid point and the full table, in grid order."""

    family: str
    kernel: KernelSpec
    smo: SmoConfig
    macro_f1: float
    table: List[GridPoint]


def _train_tolerant(data: TrainingSet, kernel: KernelSpec, cfg: SmoConfig) -> Tuple[Optional[SvmModel], bool]:
    try:
        return smo_train(data, kernel, cfg), True
    except ConvergenceError as exc:
        logger.warning(f"No convergence for {kernel.name} C={cfg.C}; scoring the best model so far")
        return exc.best_model, False


def grid_search(train: Mapping[str, TrainingSet], validation: Mapping[str, TrainingSet],
                family: str, grid: Optional[GridConfig] = None, smo: Optional[SmoConfig] = None,
                workers: int = 1,
                points: Optional[Sequence[Tuple[KernelSpec, float]]] = None) -> GridSearchResult:
    """
    Exhaustive search over the (kernel, C) grid of one kernel family.

    Every point trains one model per category on ``train`` and scores F1 on
    ``validation``; the point with the highest macro F1 wins, the earliest
    in grid order on ties.

    Raises:
    -------
    InvalidParameterError
        If the grid is empty or train and validation categories differ.
    """
    grid = grid or GridConfig()
    smo = smo or SmoConfig()
    points = list(points) if points is not None else grid.points(family)
    if not points:
        logger.error(f"Empty grid for kernel family {family}")
        raise InvalidParameterError(f"empty grid for kernel family {family!r}")
    categories = sorted(train)
    if sorted(validation) != categories:
        raise InvalidParameterError("train and validation sets cover different categories")

    table: List[GridPoint] = []
    best: Optional[GridPoint] = None
    for kernel, C in points:
        cfg = smo.model_copy(update={"C": C})

        def score(category: str) -> Tuple[float, bool]:
            model, converged = _train_tolerant(train[category], kernel, cfg)
            if model is None:
                return 0.0, False
            return validation_f1(model, validation[category]), converged

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score, categories))
        per_category = {c: f for c, (f, _) in zip(categories, results)}
        point = GridPoint(kernel=kernel, C=C, macro_f1=float(np.mean(list(per_category.values()))),
                          per_category_f1=per_category, converged=all(ok for _, ok in results))
        table.append(point)
        logger.debug(f"Grid point {kernel.name} {kernel.model_dump()} C={C}: macro F1={point.macro_f1:.4f}")
        if best is None or point.macro_f1 > best.macro_f1:
            best = point

    logger.info(f"Grid search {family}: best {best.kernel.model_dump()} C={best.C} "
                f"macro F1={best.macro_f1:.4f} over {len(table)} points")
    return GridSearchResult(family=family, kernel=best.kernel, smo=smo.model_copy(update={"C": best.C}),
                            macro_f1=best.macro_f1, table=table)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train_one_vs_rest(train: Mapping[str, TrainingSet], kernel: Union[KernelSpec, Mapping[str, KernelSpec]],
                      smo: Optional[SmoConfig] = None, workers: int = 1,
                      heldout: Optional[Mapping[str, TrainingSet]] = None,
                      build_fast: bool = False, build_primal: bool = False,
                      assignment_mode: AssignmentMode = "signed_distance_argmax_fallback",
                      path: DecisionPath = "dual") -> MultiLabelClassifier:
    """
    Train one binary model per category, optionally on ``workers`` threads.

    With ``heldout`` the bias of every model is tuned for F1 before the
    optional precomputed and primal NDK forms are derived from it.
    """
    smo = smo or SmoConfig()
    categories = sorted(train)
    for category in categories:
        check_category_name(category)

    def fit(category: str) -> ModelBundle:
        spec = kernel[category] if isinstance(kernel, Mapping) else kernel
        start = time.perf_counter()
        model = smo_train(train[category], spec, smo)
        if heldout is not None:
            tuned = tune_bias(model, heldout[category])
            logger.info(f"Tuned bias of {category}: {model.bias:.6g} -> {tuned:.6g}")
            model = model.with_bias(tuned)
        bundle = ModelBundle(model=model)
        if spec.tag == "ndk":
            if build_fast:
                bundle.fast = precompute_dual(model)
            if build_primal and spec.c >= 0:
                bundle.primal = build_complex_primal(model)
        structured.log_training(category, spec.name, len(train[category]), model.m,
                                duration_ms=(time.perf_counter() - start) * 1000)
        return bundle

    with ThreadPoolExecutor(max_workers=workers) as pool:
        bundles = list(pool.map(fit, categories))
    return MultiLabelClassifier(categories, dict(zip(categories, bundles)), assignment_mode, path)


# ---------------------------------------------------------------------------
# Data preparation
# ---------------------------------------------------------------------------

def split_three_way(ids: Sequence[str], cfg: Optional[SplitConfig] = None) -> Tuple[List[str], List[str], List[str]]:
    """
    Seeded train/validation/test split.

    Sizes are rounded from the fractions with the test split taking the
    remainder; each part keeps the input order.
    """
    cfg = cfg or SplitConfig()
    n = len(ids)
    order = np.random.default_rng(cfg.seed).permutation(n)
    n_train = int(round(n * cfg.train))
    n_val = min(int(round(n * cfg.validation)), n - n_train)
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    return tuple([ids[i] for i in np.sort(part)] for part in parts)


def positive_ratio(data: TrainingSet) -> float:
    return data.n_positive / len(data) if len(data) else 0.0


def balance_oversample(data: TrainingSet, target_ratio: float, seed: int = 0) -> TrainingSet:
    """
    Duplicate randomly chosen positives until they make up ``target_ratio``.

    Duplicates are drawn with replacement from the original positives and
    appended after the original examples; negatives are left alone. A set
    already at or above the target is returned unchanged.

    Raises:
    -------
    InvalidParameterError
        If the set has no positive example or the ratio is outside (0, 1).
    """
    if not 0.0 < target_ratio < 1.0:
        raise InvalidParameterError(f"target ratio must be in (0, 1), got {target_ratio}")
    if data.n_positive == 0:
        logger.error("Cannot oversample a training set without positives")
        raise InvalidParameterError("oversampling needs at least one positive example")

    # p / (p + n) = t  =>  p = t n / (1 - t)
    needed = math.ceil(target_ratio * data.n_negative / (1.0 - target_ratio) - 1e-9)
    extra = needed - data.n_positive
    if extra <= 0:
        return data
    positives = [i for i, y in enumerate(data.labels) if y == 1]
    picks = np.random.default_rng(seed).integers(0, len(positives), size=extra)
    vectors = list(data.vectors) + [data.vectors[positives[k]] for k in picks]
    labels = list(data.labels) + [1] * extra
    logger.debug(f"Oversampled {extra} positives to reach ratio {target_ratio:.4f}")
    return TrainingSet(tuple(vectors), tuple(labels))


def balance_categories(per_category: Mapping[str, TrainingSet], target_ratio: Optional[float] = None,
                       seed: int = 0) -> Dict[str, TrainingSet]:
    """
    Oversample every category to a common positive ratio.

    The default target is the largest positive ratio among the categories.
    Each category draws from its own generator seeded by (seed, position).
    """
    categories = sorted(per_category)
    if target_ratio is None:
        target_ratio = max(positive_ratio(per_category[c]) for c in categories)
    if target_ratio >= 1.0:
        return dict(per_category)
    return {c: balance_oversample(per_category[c], target_ratio, seed=_category_seed(seed, k))
            for k, c in enumerate(categories)}


def _category_seed(seed: int, position: int) -> int:
    return int(np.random.SeedSequence([seed, position]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Histogram
# ---------------------------------------------------------------------------

@dataclass
class CategoryHistogram:
    """Documents per number of assigned categories and per category."""

    by_count: Dict[int, int] = field(default_factory=dict)
    by_category: Dict[str, int] = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["kind\tkey\tdocuments"]
        lines += [f"assignments\t{k}\t{n}" for k, n in sorted(self.by_count.items())]
        lines += [f"category\t{c}\t{n}" for c, n in sorted(self.by_category.items())]
        return "\n".join(lines) + "\n"


def category_histogram(label_sets: Iterable[Iterable[str]]) -> CategoryHistogram:
    by_count: Counter = Counter()
    by_category: Counter = Counter()
    for labels in label_sets:
        labels = set(labels)
        by_count[len(labels)] += 1
        by_category.update(labels)
    return CategoryHistogram(dict(by_count), dict(by_category))
