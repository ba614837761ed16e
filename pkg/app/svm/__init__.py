# app/svm/__init__.py

"""
Module: svm

Binary soft-margin SVM: SMO training over any kernel, the dual-form
decision function and primal weight extraction for the linear kernel.

The decision function of a trained model is

    f(x) = sum_j coeffs[j] K(x, svs[j]) + bias,   coeffs[j] = alpha_j y_j

and the predicted label is sgn(f(x)), with sgn(0) = 0 meaning that no
decision between the two classes is possible.
"""

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config import SmoConfig
from app.exceptions import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidParameterError,
    KernelMismatchError,
    NumericError,
)
from app.kernels import KernelCache, KernelSpec, apply_kernel, kernel_row, row_sq_norms, to_csr
from app.veccore import SparseVector
from app.veccore.sparse_format import binary_label

logger = logging.getLogger(__name__)

# multipliers at or below this are not support vectors
SV_THRESHOLD = 1e-12
_MAX_BIAS_ROUNDS = 20


class Decision(NamedTuple):
    value: float
    label: int


def sign_label(value: float) -> int:
    """sgn with sgn(0) = 0."""
    if value > 0:
        return 1
    if value < 0:
        return -1
    return 0


@dataclass(frozen=True)
class TrainingSet:
    """
    Labelled vectors of one binary task.

    Attributes:
    -----------
    vectors : tuple of SparseVector
        Inputs, all of the same dimension.
    labels : tuple of int
        -1 or +1 per vector.
    """

    vectors: Tuple[SparseVector, ...]
    labels: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "vectors", tuple(self.vectors))
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        if len(self.vectors) != len(self.labels):
            raise InvalidParameterError(
                f"{len(self.vectors)} vectors but {len(self.labels)} labels")
        if any(y not in (-1, 1) for y in self.labels):
            raise InvalidParameterError("labels must be -1 or +1")
        if self.vectors:
            dim = self.vectors[0].dim
            for x in self.vectors:
                if x.dim != dim:
                    raise DimensionMismatchError(dim, x.dim, "training vector")

    @classmethod
    def from_labelled(cls, vectors: Sequence[SparseVector], label_fields: Sequence[str],
                      category: Optional[str] = None) -> "TrainingSet":
        """One-vs-rest binarisation of multi-label fields (or plain +1/-1 fields)."""
        return cls(tuple(vectors), tuple(binary_label(f, category) for f in label_fields))

    @property
    def dim(self) -> int:
        return self.vectors[0].dim if self.vectors else 0

    @property
    def n_positive(self) -> int:
        return sum(1 for y in self.labels if y == 1)

    @property
    def n_negative(self) -> int:
        return len(self.labels) - self.n_positive

    def __len__(self):
        return len(self.vectors)


@dataclass(frozen=True)
class SvmModel:
    """
    Dual-form model.

    ``support_index`` records the training positions of the support vectors
    when the model comes from ``smo_train``; it is not serialised.
    """

    kernel: KernelSpec
    svs: Tuple[SparseVector, ...]
    coeffs: np.ndarray
    bias: float
    dim: int
    support_index: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "svs", tuple(self.svs))
        object.__setattr__(self, "bias", float(self.bias))
        if len(self.svs) != coeffs.size:
            raise InvalidParameterError(f"{len(self.svs)} SVs but {coeffs.size} coefficients")
        if not self.svs:
            raise InvalidParameterError("a model needs at least one support vector")
        for x in self.svs:
            if x.dim != self.dim:
                raise DimensionMismatchError(self.dim, x.dim, "support vector")

    @property
    def m(self) -> int:
        return len(self.svs)

    @cached_property
    def sv_matrix(self):
        return to_csr(self.svs, self.dim)

    @cached_property
    def sv_sq_norms(self) -> np.ndarray:
        return row_sq_norms(self.sv_matrix)

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over kernel, bias and support vectors; identifies derived models."""
        digest = hashlib.sha256()
        digest.update(self.kernel.model_dump_json().encode())
        digest.update(np.float64(self.bias).tobytes())
        digest.update(self.coeffs.tobytes())
        for x in self.svs:
            digest.update(x.indices.tobytes())
            digest.update(x.values.tobytes())
        return digest.hexdigest()

    def with_bias(self, bias: float) -> "SvmModel":
        return replace(self, bias=float(bias))

    def __eq__(self, other):
        if not isinstance(other, SvmModel):
            return NotImplemented
        return (self.kernel == other.kernel and self.dim == other.dim
                and self.bias == other.bias and self.svs == other.svs
                and np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None


class LinearPrimal(NamedTuple):
    w: np.ndarray
    b: float


def _check_probe(model_dim: int, x: SparseVector):
    if x.dim != model_dim:
        logger.error(f"Probe dimension {x.dim} does not match model dimension {model_dim}")
        raise DimensionMismatchError(model_dim, x.dim, "probe")


def decision_value(model: SvmModel, x: SparseVector) -> float:
    _check_probe(model.dim, x)
    k = kernel_row(model.kernel, model.sv_matrix, model.sv_sq_norms, x)
    return float(np.dot(model.coeffs, k)) + model.bias


def decide_dual(model: SvmModel, x: SparseVector) -> Decision:
    """
    Dual-form decision: compare the probe with every support vector.

    >>> # value = sum_j coeffs[j] K(x, svs[j]) + bias
    """
    value = decision_value(model, x)
    return Decision(value, sign_label(value))


def predict_labels(model: SvmModel, vectors: Sequence[SparseVector]) -> List[int]:
    return [decide_dual(model, x).label for x in vectors]


def extract_linear_primal(model: SvmModel) -> LinearPrimal:
    """
    Primal weight vector w = sum_j coeffs[j] svs[j] of a linear-kernel model.

    Raises:
    -------
    KernelMismatchError
        If the model does not use the linear kernel.
    """
    if model.kernel.tag != "linear":
        logger.error(f"Primal extraction requested for a {model.kernel.tag} model")
        raise KernelMismatchError(f"primal extraction needs a linear kernel, got {model.kernel.tag}")
    w = np.asarray(model.sv_matrix.T.dot(model.coeffs)).ravel()
    return LinearPrimal(w, model.bias)


def decide_linear_primal(primal: LinearPrimal, x: SparseVector) -> Decision:
    _check_probe(primal.w.size, x)
    value = float(np.dot(primal.w[x.indices], x.values)) + primal.b
    return Decision(value, sign_label(value))


def dual_objective(alpha: np.ndarray, labels: np.ndarray, g: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 (alpha y)^T K (alpha y), with g = K (alpha y)."""
    return float(alpha.sum() - 0.5 * np.dot(alpha * labels, g))


def kkt_violations(model: SvmModel, data: TrainingSet, C: float, tol: float) -> List[int]:
    """
    Indices of training examples violating the KKT conditions beyond ``tol``.

    Requires ``model.support_index`` (set by ``smo_train``).
    """
    if model.support_index is None:
        raise InvalidParameterError("KKT check needs a model trained by smo_train")
    alpha = np.zeros(len(data))
    alpha[list(model.support_index)] = np.abs(model.coeffs)
    violations = []
    for i, (x, y) in enumerate(zip(data.vectors, data.labels)):
        margin = y * decision_value(model, x)
        if alpha[i] <= SV_THRESHOLD:
            bad = margin < 1.0 - tol
        elif alpha[i] >= C * (1.0 - 1e-9):
            bad = margin > 1.0 + tol
        else:
            bad = abs(margin - 1.0) > tol
        if bad:
            violations.append(i)
    return violations


class _SmoState:
    """Mutable state of one SMO run."""

    def __init__(self, data: TrainingSet, kernel: KernelSpec, cfg: SmoConfig):
        self.kernel = kernel
        self.cfg = cfg
        self.n = len(data)
        self.y = np.asarray(data.labels, dtype=np.float64)
        self.alpha = np.zeros(self.n)
        self.g = np.zeros(self.n)  # g_i = sum_j alpha_j y_j K_ij, no bias
        self.b = 0.0
        self.iterations = 0
        self.rng = np.random.default_rng(cfg.seed)
        matrix = to_csr(data.vectors, data.dim)
        sq = row_sq_norms(matrix)
        self.diag = apply_kernel(kernel, sq, sq, sq)
        self.cache = KernelCache(
            lambda i: kernel_row(kernel, matrix, sq, data.vectors[i]),
            min(cfg.cache_rows, self.n),
        )
        # half the tolerance internally: the final bias shift costs the other half
        self.inner_tol = cfg.tol / 2.0
        self.objective = 0.0

    def error(self, i: int) -> float:
        return self.g[i] + self.b - self.y[i]

    def violates(self, i: int, tol: Optional[float] = None) -> bool:
        tol = self.inner_tol if tol is None else tol
        r = self.error(i) * self.y[i]
        a = self.alpha[i]
        return (r < -tol and a < self.cfg.C) or (r > tol and a > 0)

    def _clip(self, a: float) -> float:
        C = self.cfg.C
        if a < SV_THRESHOLD * C:
            return 0.0
        if a > C * (1.0 - 1e-12):
            return C
        return a

    def take_step(self, i: int, j: int) -> bool:
        if i == j:
            return False
        C = self.cfg.C
        a1, a2 = self.alpha[i], self.alpha[j]
        y1, y2 = self.y[i], self.y[j]
        e1, e2 = self.error(i), self.error(j)
        s = y1 * y2
        if y1 != y2:
            lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            lo, hi = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if hi - lo <= 1e-12 * C:
            return False

        row_i = self.cache.row(i)
        row_j = self.cache.row(j)
        k11, k22, k12 = self.diag[i], self.diag[j], row_i[j]
        eta = k11 + k22 - 2.0 * k12

        if eta > 1e-12:
            a2_new = min(max(a2 + y2 * (e1 - e2) / eta, lo), hi)
        else:
            # objective at both ends of the segment (Platt's sign convention)
            f1 = y1 * self.g[i] - 1.0 - a1 * k11 - s * a2 * k12
            f2 = y2 * self.g[j] - 1.0 - s * a1 * k12 - a2 * k22
            lo1 = a1 + s * (a2 - lo)
            hi1 = a1 + s * (a2 - hi)
            lo_obj = (lo1 * f1 + lo * f2 + 0.5 * lo1 * lo1 * k11
                      + 0.5 * lo * lo * k22 + s * lo * lo1 * k12)
            hi_obj = (hi1 * f1 + hi * f2 + 0.5 * hi1 * hi1 * k11
                      + 0.5 * hi * hi * k22 + s * hi * hi1 * k12)
            if lo_obj < hi_obj - 1e-12:
                a2_new = lo
            elif lo_obj > hi_obj + 1e-12:
                a2_new = hi
            else:
                return False

        a2_new = self._clip(a2_new)
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = self._clip(a1 + s * (a2 - a2_new))

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - e1 - d1 * k11 - d2 * k12
        b2 = self.b - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1_new < C:
            self.b = b1
        elif 0.0 < a2_new < C:
            self.b = b2
        else:
            self.b = 0.5 * (b1 + b2)

        self.g += d1 * row_i + d2 * row_j
        self.alpha[i] = a1_new
        self.alpha[j] = a2_new
        self.iterations += 1

        if self.cfg.debug:
            objective = dual_objective(self.alpha, self.y, self.g)
            if objective < self.objective - 1e-9 * max(1.0, abs(self.objective)):
                logger.error(f"Dual objective decreased: {self.objective} -> {objective}")
                raise NumericError(
                    f"dual objective decreased from {self.objective} to {objective}")
            self.objective = objective
        return True

    def examine(self, i: int) -> int:
        if not self.violates(i):
            return 0
        j = int(self.rng.integers(self.n - 1))
        if j >= i:
            j += 1
        if self.take_step(i, j):
            return 1
        for j in self.rng.permutation(self.n):
            if self.take_step(i, int(j)):
                return 1
        return 0

    def sweep(self, only_free: bool) -> int:
        changed = 0
        C = self.cfg.C
        for i in range(self.n):
            if only_free and not 0.0 < self.alpha[i] < C:
                continue
            changed += self.examine(i)
            if self.iterations >= self.cfg.max_iters:
                break
        return changed

    def optimise(self):
        """Alternate full sweeps with sweeps over the free multipliers until a full sweep changes nothing."""
        examine_all = True
        free_passes = 0
        while self.iterations < self.cfg.max_iters:
            changed = self.sweep(only_free=not examine_all)
            if examine_all:
                if changed == 0:
                    return
                examine_all = False
                free_passes = 0
            else:
                free_passes += 1
                if changed == 0 or free_passes >= self.cfg.max_passes:
                    examine_all = True

    def final_bias(self) -> float:
        """Average over free multipliers, else the midpoint of the feasible interval."""
        C = self.cfg.C
        free = (self.alpha > 0.0) & (self.alpha < C)
        if free.any():
            return float(np.mean(self.y[free] - self.g[free]))
        lower, upper = -np.inf, np.inf
        for i in range(self.n):
            bound = self.y[i] - self.g[i]
            at_zero = self.alpha[i] == 0.0
            # alpha = 0: y f >= 1; alpha = C: y f <= 1
            if (self.y[i] > 0) == at_zero:
                lower = max(lower, bound)
            else:
                upper = min(upper, bound)
        if np.isfinite(lower) and np.isfinite(upper):
            return 0.5 * (lower + upper)
        if np.isfinite(lower):
            return float(lower)
        if np.isfinite(upper):
            return float(upper)
        return self.b

    def violation_count(self, tol: Optional[float] = None) -> int:
        return sum(1 for i in range(self.n) if self.violates(i, tol))

    def build_model(self, data: TrainingSet, bias: float) -> SvmModel:
        keep = np.flatnonzero(self.alpha > SV_THRESHOLD)
        if keep.size == 0:
            raise NumericError("training produced no support vectors")
        return SvmModel(
            kernel=self.kernel,
            svs=tuple(data.vectors[i] for i in keep),
            coeffs=self.alpha[keep] * self.y[keep],
            bias=bias,
            dim=data.dim,
            support_index=tuple(int(i) for i in keep),
        )


def smo_train(data: TrainingSet, kernel: KernelSpec, cfg: SmoConfig) -> SvmModel:
    """
    Train a binary soft-margin SVM with sequential minimal optimisation.

    The outer loop visits examples in order and picks the first KKT
    violator; its partner is drawn at random (seeded), falling back to the
    remaining examples in a seeded random order. Sweeps over all examples
    alternate with sweeps over the free multipliers (0 < alpha < C).

    Parameters:
    -----------
    data : TrainingSet
        At least one example of each label.
    kernel : KernelSpec
        Any kernel family.
    cfg : SmoConfig
        C, tolerance, iteration budget and seed.

    Returns:
    --------
    SvmModel
        Support vectors are the examples with alpha > 1e-12.

    Raises:
    -------
    InvalidParameterError
        If one of the labels is missing.
    ConvergenceError
        If the iteration budget runs out; carries the best model so far.
    """
    if data.n_positive == 0 or data.n_negative == 0:
        logger.error("Training set needs both labels")
        raise InvalidParameterError("training set needs at least one example of each label")

    start = time.perf_counter()
    state = _SmoState(data, kernel, cfg)
    logger.debug(f"SMO start: n={state.n} kernel={kernel.tag} C={cfg.C} tol={cfg.tol}")

    for _ in range(_MAX_BIAS_ROUNDS):
        state.optimise()
        if state.iterations >= cfg.max_iters:
            break
        state.b = state.final_bias()
        if state.violation_count(cfg.tol) == 0:
            model = state.build_model(data, state.b)
            elapsed = (time.perf_counter() - start) * 1000
            logger.info(
                f"SMO converged: n={state.n} m={model.m} iterations={state.iterations} "
                f"time={elapsed:.1f}ms")
            return model
        logger.debug("KKT violations after bias averaging; resuming sweeps")

    diagnostic = {
        "iterations": state.iterations,
        "violations": state.violation_count(cfg.tol),
        "objective": dual_objective(state.alpha, state.y, state.g),
    }
    logger.error(f"SMO did not converge: {diagnostic}")
    best = None
    if np.any(state.alpha > SV_THRESHOLD):
        best = state.build_model(data, state.final_bias())
    raise ConvergenceError(
        f"SMO did not converge within {cfg.max_iters} iterations", best_model=best,
        diagnostic=diagnostic)
