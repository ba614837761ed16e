# app/veccore/__init__.py

"""
Module: veccore

Real sparse vectors, complex vectors, the complex feature map ``phi_c`` and
the modified (non-conjugating) scalar product.

The map ``phi_c`` sends a real vector x in R^n to C^(4n+1). Each real
component x_k becomes the block

    phi(x_k) = (sqrt(a)(x_k^2 - 1), sqrt(a) i, sqrt(2a) x_k, sqrt(a) i x_k^2)

and a final component sqrt(c) is appended. Under the modified scalar product
<*u, v> = sum_k u_k v_k (no conjugation) the blocks satisfy

    <*phi(s), phi(t)> = -a (s - t)^2

so <*phi_c(x1), phi_c(x2)> = -a ||x1 - x2||^2 + c, the negative distance
kernel. A block of two zero components contributes nothing, which is why the
sparse product only has to visit the union of the non-zero indices.

All values are immutable; every operation is a pure function.
"""

import logging
import math
from typing import Iterable, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

__all__ = [
    "NdkParams",
    "SparseVector",
    "ComplexVector",
    "dot",
    "sq_distance",
    "phi_component",
    "phi_c",
    "mod_scalar_product",
    "sparse_mod_product",
    "phi_blocks",
    "union_align",
]


class NdkParams(BaseModel):
    """
    Parameters of the negative distance kernel K(x1, x2) = -a ||x1 - x2||^2 + c.

    Attributes:
    -----------
    a : float
        Scale, strictly positive.
    c : float
        Offset. Must be non-negative unless ``allow_negative_c`` is set, since
        the last component of ``phi_c`` is sqrt(c).
    allow_negative_c : bool
        Permit c < 0. Such parameters only work on the dual and precomputed
        decision paths; building the complex primal form rejects them.
    """

    model_config = ConfigDict(frozen=True)

    a: float = Field(1.0, gt=0, description="Kernel scale a > 0")
    c: float = Field(0.0, description="Kernel offset c")
    allow_negative_c: bool = Field(False, description="Permit c < 0 (dual-form use only)")

    @model_validator(mode="after")
    def _check_offset(self) -> "NdkParams":
        if not math.isfinite(self.a) or not math.isfinite(self.c):
            raise ValueError("a and c must be finite")
        if self.c < 0 and not self.allow_negative_c:
            raise ValueError("c must be >= 0 (set allow_negative_c for dual-form use)")
        return self


class SparseVector:
    """
    Immutable sparse real vector.

    Only non-zero entries are stored, with strictly increasing 0-based
    indices below ``dim``. Zero values passed to the constructor are dropped.

    >>> v = SparseVector(3, [0, 2], [1.5, 0.0])
    >>> v.nnz
    1
    """

    __slots__ = ("dim", "indices", "values")

    def __init__(self, dim: int, indices: Iterable[int] = (), values: Iterable[float] = ()):
        dim = int(dim)
        if dim <= 0:
            raise InvalidParameterError(f"dim must be positive, got {dim}")
        idx = np.array(indices if isinstance(indices, np.ndarray) else list(indices), dtype=np.int64)
        val = np.array(values if isinstance(values, np.ndarray) else list(values), dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise InvalidParameterError("indices and values must be 1-D sequences of equal length")
        keep = val != 0.0
        if not keep.all():
            idx = idx[keep]
            val = val[keep]
        if idx.size:
            if idx[0] < 0 or idx[-1] >= dim:
                raise InvalidParameterError(f"index out of range for dim {dim}")
            if np.any(np.diff(idx) <= 0):
                raise InvalidParameterError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise InvalidParameterError("values must be finite")
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __setattr__(self, name, value):
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_pairs(cls, dim: int, pairs: Iterable[Tuple[int, float]]) -> "SparseVector":
        """Build from unordered (index, value) pairs; duplicate indices are rejected."""
        items = sorted((int(i), float(v)) for i, v in pairs)
        for (i, _), (j, _) in zip(items, items[1:]):
            if i == j:
                raise InvalidParameterError(f"duplicate index {i}")
        return cls(dim, [i for i, _ in items], [v for _, v in items])

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> "SparseVector":
        arr = np.asarray(values, dtype=np.float64).ravel()
        nz = np.flatnonzero(arr)
        return cls(arr.size, nz, arr[nz])

    @classmethod
    def zeros(cls, dim: int) -> "SparseVector":
        return cls(dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def norm_sq(self) -> float:
        return float(np.dot(self.values, self.values))

    def scaled(self, factor: float) -> "SparseVector":
        return SparseVector(self.dim, self.indices, self.values * factor)

    def items(self):
        return zip(self.indices.tolist(), self.values.tolist())

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __len__(self):
        return self.dim

    def __repr__(self):
        body = ", ".join(f"{i}:{v:g}" for i, v in list(self.items())[:8])
        more = ", ..." if self.nnz > 8 else ""
        return f"SparseVector(dim={self.dim}, {{{body}{more}}})"


class ComplexVector:
    """
    Immutable complex vector of fixed length.

    Components are stored as a complex128 array, i.e. interleaved
    (re, im) pairs of doubles.
    """

    __slots__ = ("components",)

    def __init__(self, components: Iterable[complex]):
        arr = np.array(list(components) if not isinstance(components, np.ndarray) else components,
                       dtype=np.complex128)
        if arr.ndim != 1:
            raise InvalidParameterError("ComplexVector components must be 1-D")
        arr.flags.writeable = False
        object.__setattr__(self, "components", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ComplexVector is immutable")

    @classmethod
    def zeros(cls, length: int) -> "ComplexVector":
        return cls(np.zeros(length, dtype=np.complex128))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, float]]) -> "ComplexVector":
        return cls([complex(re, im) for re, im in pairs])

    def __len__(self):
        return int(self.components.size)

    def __getitem__(self, k):
        return complex(self.components[k])

    def _check_length(self, other: "ComplexVector"):
        if len(self) != len(other):
            raise DimensionMismatchError(len(self), len(other), "complex vector")

    def add(self, other: "ComplexVector") -> "ComplexVector":
        self._check_length(other)
        return ComplexVector(self.components + other.components)

    def scale(self, factor: complex) -> "ComplexVector":
        return ComplexVector(self.components * factor)

    @property
    def real(self) -> np.ndarray:
        return self.components.real.copy()

    @property
    def imag(self) -> np.ndarray:
        return self.components.imag.copy()

    def pairs(self):
        return [(float(z.real), float(z.imag)) for z in self.components]

    def __eq__(self, other):
        if not isinstance(other, ComplexVector):
            return NotImplemented
        return np.array_equal(self.components, other.components)

    def __hash__(self):
        return hash(self.components.tobytes())

    def __repr__(self):
        return f"ComplexVector(len={len(self)})"


def _check_dims(x1: SparseVector, x2: SparseVector):
    if x1.dim != x2.dim:
        logger.error(f"Dimension mismatch: {x1.dim} vs {x2.dim}")
        raise DimensionMismatchError(x1.dim, x2.dim)


def union_align(x1: SparseVector, x2: SparseVector) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Align two sparse vectors on the union of their supports.

    Returns the union indices and the two value arrays over it (zeros where
    a vector has no entry). Cost is proportional to |I1| + |I2|.
    """
    _check_dims(x1, x2)
    union = np.union1d(x1.indices, x2.indices)
    u1 = np.zeros(union.size, dtype=np.float64)
    u2 = np.zeros(union.size, dtype=np.float64)
    u1[np.searchsorted(union, x1.indices)] = x1.values
    u2[np.searchsorted(union, x2.indices)] = x2.values
    return union, u1, u2


def dot(x1: SparseVector, x2: SparseVector) -> float:
    """
    Scalar product over the intersection of the supports.

    >>> dot(SparseVector(2, [0, 1], [1, 2]), SparseVector(2, [0, 1], [3, 4]))
    11.0
    """
    _check_dims(x1, x2)
    _, i1, i2 = np.intersect1d(x1.indices, x2.indices, assume_unique=True, return_indices=True)
    if i1.size == 0:
        return 0.0
    return float(np.dot(x1.values[i1], x2.values[i2]))


def sq_distance(x1: SparseVector, x2: SparseVector) -> float:
    """Squared Euclidean distance ||x1 - x2||^2, summed over the union of supports."""
    _, u1, u2 = union_align(x1, x2)
    diff = u1 - u2
    return float(np.dot(diff, diff))


def phi_blocks(values: np.ndarray, params: NdkParams) -> np.ndarray:
    """
    Vectorised per-component map: one (k, 4) complex block row per real value.
    """
    x = np.asarray(values, dtype=np.float64)
    sa = math.sqrt(params.a)
    s2a = math.sqrt(2.0 * params.a)
    blocks = np.empty((x.size, 4), dtype=np.complex128)
    x2 = x * x
    blocks[:, 0] = sa * (x2 - 1.0)
    blocks[:, 1] = 1j * sa
    blocks[:, 2] = s2a * x
    blocks[:, 3] = 1j * sa * x2
    return blocks


def phi_component(x: float, params: NdkParams) -> ComplexVector:
    """
    Map a single real component to its 4-component complex block.

    >>> phi_component(1.0, NdkParams(a=1.0)).pairs()
    [(0.0, 0.0), (0.0, 1.0), (1.4142135623730951, 0.0), (0.0, 1.0)]
    """
    return ComplexVector(phi_blocks(np.array([x]), params)[0])


def _sqrt_offset(params: NdkParams) -> float:
    if params.c < 0:
        logger.error(f"phi_c requested with negative offset c={params.c}")
        raise InvalidParameterError("phi_c needs c >= 0 so that sqrt(c) is real")
    return math.sqrt(params.c)


def phi_c(x: SparseVector, params: NdkParams) -> ComplexVector:
    """
    Full complex feature map R^n -> C^(4n+1).

    The result is materialised densely; products between mapped vectors
    should go through ``sparse_mod_product`` instead.
    """
    tail = _sqrt_offset(params)
    blocks = phi_blocks(x.to_dense(), params)
    out = np.empty(4 * x.dim + 1, dtype=np.complex128)
    out[:-1] = blocks.ravel()
    out[-1] = tail
    return ComplexVector(out)


def mod_scalar_product(u: ComplexVector, v: ComplexVector) -> complex:
    """
    Modified scalar product <*u, v> = sum_k u_k v_k, without conjugation.

    Bilinear and symmetric but not positive definite: for u = (i) the
    product with itself is -1.
    """
    if len(u) != len(v):
        logger.error(f"Length mismatch in modified scalar product: {len(u)} vs {len(v)}")
        raise DimensionMismatchError(len(u), len(v), "complex vector")
    # np.dot does not conjugate; np.vdot would
    return complex(np.dot(u.components, v.components))


def sparse_mod_product(x1: SparseVector, x2: SparseVector, params: NdkParams) -> float:
    """
    Real part of <*phi_c(x1), phi_c(x2)> computed over the union of supports.

    Components where both vectors are zero contribute exactly zero, so only
    |I1 u I2| blocks are built.
    """
    _, u1, u2 = union_align(x1, x2)
    if u1.size == 0:
        return float(params.c)
    total = np.sum(phi_blocks(u1, params) * phi_blocks(u2, params))
    return float(total.real) + float(params.c)

