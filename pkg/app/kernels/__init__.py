# app/kernels/__init__.py

"""
Module: kernels

Kernel specifications and closed-form kernel evaluation.

Supported families:
- linear:      <x1, x2>
- polynomial:  (a <x1, x2> + c)^d   (square: d=2, cubic: d=3)
- rbf:         exp(-gamma ||x1 - x2||^2)
- ndk:         -a ||x1 - x2||^2 + c  (negative distance kernel)

RBF is only ever evaluated in closed form; its feature space is infinite
dimensional.
"""

import logging
from collections import OrderedDict
from typing import Annotated, Callable, Dict, List, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from scipy import sparse

from app.exceptions import DataFormatError, DimensionMismatchError, InvalidParameterError
from app.veccore import NdkParams, SparseVector, dot, sq_distance

logger = logging.getLogger(__name__)


class LinearKernel(BaseModel):
    """Scalar product kernel."""

    model_config = ConfigDict(frozen=True)

    tag: Literal["linear"] = "linear"

    @property
    def name(self) -> str:
        return "linear"


class PolynomialKernel(BaseModel):
    """Polynomial kernel (a <x1, x2> + c)^d."""

    model_config = ConfigDict(frozen=True)

    tag: Literal["polynomial"] = "polynomial"
    a: float = Field(1.0, description="Scale of the scalar product")
    c: float = Field(0.0, description="Additive offset")
    d: int = Field(2, ge=1, description="Degree")

    @property
    def name(self) -> str:
        return {2: "square", 3: "cubic"}.get(self.d, f"poly{self.d}")


class RbfKernel(BaseModel):
    """Gaussian kernel exp(-gamma ||x1 - x2||^2)."""

    model_config = ConfigDict(frozen=True)

    tag: Literal["rbf"] = "rbf"
    gamma: float = Field(..., gt=0, description="Width parameter, gamma > 0")

    @property
    def name(self) -> str:
        return "rbf"


class NdkKernel(BaseModel):
    """Negative distance kernel -a ||x1 - x2||^2 + c."""

    model_config = ConfigDict(frozen=True)

    tag: Literal["ndk"] = "ndk"
    a: float = Field(1.0, gt=0, description="Kernel scale a > 0")
    c: float = Field(0.0, description="Kernel offset c")
    allow_negative_c: bool = Field(False, description="Permit c < 0 (dual-form use only)")

    @model_validator(mode="after")
    def _check_offset(self) -> "NdkKernel":
        if self.c < 0 and not self.allow_negative_c:
            raise ValueError("c must be >= 0 (set allow_negative_c for dual-form use)")
        return self

    @property
    def params(self) -> NdkParams:
        return NdkParams(a=self.a, c=self.c, allow_negative_c=self.allow_negative_c)

    @property
    def name(self) -> str:
        return "ndk"


KernelSpec = Annotated[
    Union[LinearKernel, PolynomialKernel, RbfKernel, NdkKernel],
    Field(discriminator="tag"),
]
_kernel_adapter = TypeAdapter(KernelSpec)


def parse_kernel(data: dict) -> KernelSpec:
    """Validate a plain mapping (e.g. from JSON) into a KernelSpec."""
    return _kernel_adapter.validate_python(data)


def square(a: float = 1.0, c: float = 1.0) -> PolynomialKernel:
    return PolynomialKernel(a=a, c=c, d=2)


def cubic(a: float = 1.0, c: float = 1.0) -> PolynomialKernel:
    return PolynomialKernel(a=a, c=c, d=3)


def kernel_eval(spec: KernelSpec, x1: SparseVector, x2: SparseVector) -> float:
    """
    Evaluate one kernel value in closed form.

    Parameters:
    -----------
    spec : KernelSpec
        Kernel family and hyperparameters.
    x1, x2 : SparseVector
        Inputs of equal dimension.

    Returns:
    --------
    float
        K(x1, x2). Symmetric in its arguments bit for bit.

    Raises:
    -------
    DimensionMismatchError
        If the dimensions differ.
    """
    match spec.tag:
        case "linear":
            return dot(x1, x2)
        case "polynomial":
            return float((spec.a * dot(x1, x2) + spec.c) ** spec.d)
        case "rbf":
            return float(np.exp(-spec.gamma * sq_distance(x1, x2)))
        case "ndk":
            return -spec.a * sq_distance(x1, x2) + spec.c
    raise InvalidParameterError(f"unknown kernel tag {spec.tag!r}")  # pragma: no cover


def to_csr(vectors: Sequence[SparseVector], dim: int) -> sparse.csr_matrix:
    """Stack sparse vectors as the rows of a CSR matrix."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for j, x in enumerate(vectors):
        if x.dim != dim:
            raise DimensionMismatchError(dim, x.dim)
        indptr[j + 1] = indptr[j] + x.nnz
    if vectors:
        indices = np.concatenate([x.indices for x in vectors])
        data = np.concatenate([x.values for x in vectors])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def row_sq_norms(matrix: sparse.csr_matrix) -> np.ndarray:
    return np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel()


def apply_kernel(spec: KernelSpec, dots: np.ndarray, sq_a: np.ndarray, sq_b) -> np.ndarray:
    """Turn scalar products and squared norms into kernel values."""
    match spec.tag:
        case "linear":
            return dots
        case "polynomial":
            return (spec.a * dots + spec.c) ** spec.d
        case "rbf":
            return np.exp(-spec.gamma * np.maximum(sq_a - 2.0 * dots + sq_b, 0.0))
        case "ndk":
            return -spec.a * (sq_a - 2.0 * dots + sq_b) + spec.c
    raise InvalidParameterError(f"unknown kernel tag {spec.tag!r}")  # pragma: no cover


def kernel_row(spec: KernelSpec, matrix: sparse.csr_matrix, sq_norms: np.ndarray,
               x: SparseVector) -> np.ndarray:
    """
    Kernel values of ``x`` against every row of ``matrix``.

    Cost is proportional to the number of stored entries of ``matrix``.
    """
    if x.dim != matrix.shape[1]:
        raise DimensionMismatchError(matrix.shape[1], x.dim)
    dots = matrix.dot(x.to_dense())
    return apply_kernel(spec, dots, sq_norms, x.norm_sq())


def kernel_matrix(spec: KernelSpec, points: Sequence[SparseVector]) -> np.ndarray:
    """Full symmetric kernel matrix of a set of points."""
    if not points:
        return np.zeros((0, 0))
    matrix = to_csr(points, points[0].dim)
    sq = row_sq_norms(matrix)
    gram = np.asarray(matrix.dot(matrix.T).todense())
    k = apply_kernel(spec, gram, sq[:, None], sq[None, :])
    return (k + k.T) / 2.0


class KernelCache:
    """
    Bounded LRU cache of kernel rows for one training session.

    Rows are keyed by training index. Not shared across threads.
    """

    def __init__(self, compute: Callable[[int], np.ndarray], capacity: int):
        if capacity < 1:
            raise InvalidParameterError("cache capacity must be >= 1")
        self._compute = compute
        self._capacity = capacity
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        value = self._compute(i)
        self._rows[i] = value
        if len(self._rows) > self._capacity:
            self._rows.popitem(last=False)
        return value

    def __len__(self):
        return len(self._rows)


class CpdReport(BaseModel):
    """Result of the conditional-positive-definiteness sampler."""

    min_quadratic_form: float = Field(..., description="Smallest sampled c^T K c with sum(c) = 0")
    trials: int
    n_points: int


def check_cpd(spec: KernelSpec, points: Sequence[SparseVector], trials: int,
              seed: int = 0) -> CpdReport:
    """
    Sample the quadratic form sum_jk c_j c_k K(x_j, x_k) over random
    coefficient vectors projected onto sum(c) = 0.

    A conditionally positive definite kernel keeps every sample >= 0 (up to
    rounding). For the NDK the form equals 2a ||sum_j c_j x_j||^2.
    """
    if len(points) < 2:
        raise InvalidParameterError("check_cpd needs at least 2 points")
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    k = kernel_matrix(spec, points)
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((trials, len(points)))
    coeffs -= coeffs.mean(axis=1, keepdims=True)
    forms = np.einsum("ti,ij,tj->t", coeffs, k, coeffs)
    report = CpdReport(min_quadratic_form=float(forms.min()), trials=trials, n_points=len(points))
    logger.debug(f"CPD check [{spec.tag}]: min form {report.min_quadratic_form:.3e} over {trials} trials")
    return report


_BLOCK_FIELDS: Dict[str, List[str]] = {
    "linear": [],
    "polynomial": ["a", "c", "d"],
    "rbf": ["gamma"],
    "ndk": ["a", "c", "allow_negative_c"],
}


def to_block(spec: KernelSpec) -> List[str]:
    """Render a KernelSpec as ``key=value`` lines."""
    lines = [f"tag={spec.tag}"]
    for name in _BLOCK_FIELDS[spec.tag]:
        value = getattr(spec, name)
        if isinstance(value, bool):
            lines.append(f"{name}={'true' if value else 'false'}")
        elif isinstance(value, float):
            lines.append(f"{name}={value:.17g}")
        else:
            lines.append(f"{name}={value}")
    return lines


def kernel_from_block(lines: Sequence[str]) -> KernelSpec:
    """Parse ``key=value`` lines written by ``to_block``."""
    data = {}
    for line in lines:
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"malformed kernel line {line!r}")
        key, value = key.strip(), value.strip()
        if value in ("true", "false"):
            data[key] = value == "true"
        else:
            data[key] = value
    if "tag" not in data:
        raise DataFormatError("kernel block without tag")
    try:
        return parse_kernel(data)
    except ValueError as exc:
        raise DataFormatError(f"invalid kernel block: {exc}") from exc
