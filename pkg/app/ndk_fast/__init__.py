# app/ndk_fast/__init__.py

"""
Module: ndk_fast

Fast prediction paths for models trained with the negative distance kernel
K(x, x_j) = -a ||x - x_j||^2 + c.

Three equivalent decision functions are available for the same model:

- dual (``app.svm.decide_dual``): one kernel evaluation per support vector,
  cost grows with the number m of support vectors.
- precomputed dual (``decide_precomputed``): expanding the distance gives

      f(x) = -a <x,x> S + 2 <x,z> - u + c' + b

  with S = sum_j y_j alpha_j, z = a sum_j y_j alpha_j x_j,
  u = a sum_j y_j alpha_j <x_j,x_j> and c' = c S, all independent of x.
- complex primal (``decide_complex_primal``): w = sum_j y_j alpha_j phi_c(x_j)
  and f(x) = <*w, phi_c(x)> + b. The imaginary part vanishes for real
  inputs.

The Mahalanobis variant applies tau(x) = sqrt(Cov^-1) x before any of the
paths, so that <*phi_c(tau x), phi_c(tau z)> = -(x-z)^T Cov^-1 (x-z).
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.exceptions import (
    DimensionMismatchError,
    InternalConsistencyError,
    InvalidParameterError,
    KernelMismatchError,
    NumericError,
    SingularCovarianceError,
)
from app.kernels import to_csr
from app.svm import Decision, SvmModel, TrainingSet, decide_dual, sign_label
from app.veccore import ComplexVector, NdkParams, SparseVector, phi_blocks, sparse_mod_product

logger = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-9


def _require_ndk(model: SvmModel) -> NdkParams:
    if model.kernel.tag != "ndk":
        logger.error(f"NDK fast path requested for a {model.kernel.tag} model")
        raise KernelMismatchError(f"model uses the {model.kernel.tag} kernel, not ndk")
    return model.kernel.params


def _check_probe(dim: int, x: SparseVector):
    if x.dim != dim:
        logger.error(f"Probe dimension {x.dim} does not match model dimension {dim}")
        raise DimensionMismatchError(dim, x.dim, "probe")


@dataclass(frozen=True)
class NdkFastModel:
    """
    Precomputed scalars and vector of an NDK model.

    Attributes:
    -----------
    params : NdkParams
    S : float
        sum_j y_j alpha_j
    z : np.ndarray
        a sum_j y_j alpha_j x_j (dense, length dim)
    u : float
        a sum_j y_j alpha_j <x_j, x_j>
    c_prime : float
        c S
    bias : float
    dim : int
    provenance : str
        Fingerprint of the source SvmModel.
    """

    params: NdkParams
    S: float
    z: np.ndarray
    u: float
    c_prime: float
    bias: float
    dim: int
    provenance: str = ""

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise DimensionMismatchError(self.dim, z.size, "precomputed z")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    __hash__ = None


def precompute_dual(model: SvmModel) -> NdkFastModel:
    """
    Collapse an NDK model into (S, z, u, c').

    Raises:
    -------
    KernelMismatchError
        If the model is not an NDK model.
    """
    params = _require_ndk(model)
    coeffs = model.coeffs
    S = float(np.sum(coeffs))
    z = params.a * np.asarray(model.sv_matrix.T.dot(coeffs)).ravel()
    sq_norms = np.array([x.norm_sq() for x in model.svs])
    u = params.a * float(np.dot(coeffs, sq_norms))
    fast = NdkFastModel(params=params, S=S, z=z, u=u, c_prime=params.c * S,
                        bias=model.bias, dim=model.dim, provenance=model.fingerprint)
    logger.debug(f"Precomputed dual: m={model.m} S={S:.3e} u={u:.3e}")
    return fast


def decide_precomputed(fm: NdkFastModel, x: SparseVector) -> Decision:
    """Decision in O(nnz(x)), independent of the number of support vectors."""
    _check_probe(fm.dim, x)
    xx = float(np.dot(x.values, x.values))
    xz = float(np.dot(fm.z[x.indices], x.values))
    value = -fm.params.a * xx * fm.S + 2.0 * xz - fm.u + fm.c_prime + fm.bias
    return Decision(value, sign_label(value))


@dataclass(frozen=True)
class ComplexPrimalModel:
    """
    Complex primal weight vector w = sum_j y_j alpha_j phi_c(x_j), length 4 dim + 1.
    """

    w: ComplexVector
    bias: float
    params: NdkParams
    dim: int
    provenance: str = ""

    def __post_init__(self):
        if len(self.w) != 4 * self.dim + 1:
            raise DimensionMismatchError(4 * self.dim + 1, len(self.w), "complex weight vector")
        if self.params.c < 0:
            raise InvalidParameterError("complex primal form needs c >= 0")

    @cached_property
    def blocks(self) -> np.ndarray:
        return self.w.components[:-1].reshape(self.dim, 4)

    @cached_property
    def zero_block(self) -> np.ndarray:
        return phi_blocks(np.zeros(1), self.params)[0]

    @cached_property
    def zero_fold(self) -> complex:
        """<*w, phi_c(0)> including the offset component."""
        per_block = self.blocks @ self.zero_block
        return complex(np.sum(per_block) + self.w.components[-1] * math.sqrt(self.params.c))

    __hash__ = None


def build_complex_primal(model: SvmModel) -> ComplexPrimalModel:
    """
    Build the complex primal weight vector of an NDK model.

    Blocks of components where a support vector is zero equal phi(0); they
    are added once, scaled by S, instead of per support vector.

    Raises:
    -------
    KernelMismatchError
        If the model is not an NDK model.
    InvalidParameterError
        If c < 0 (sqrt(c) is not real).
    """
    params = _require_ndk(model)
    if params.c < 0:
        logger.error(f"Complex primal form requested with c={params.c}")
        raise InvalidParameterError("complex primal form needs c >= 0")
    coeffs = model.coeffs
    S = float(np.sum(coeffs))
    zero = phi_blocks(np.zeros(1), params)[0]
    blocks = np.tile(zero * S, (model.dim, 1))

    matrix = model.sv_matrix
    if matrix.nnz:
        rows = np.repeat(np.arange(model.m), np.diff(matrix.indptr))
        deltas = (phi_blocks(matrix.data, params) - zero) * coeffs[rows][:, None]
        np.add.at(blocks, matrix.indices, deltas)

    w = np.empty(4 * model.dim + 1, dtype=np.complex128)
    w[:-1] = blocks.ravel()
    w[-1] = S * math.sqrt(params.c)
    logger.debug(f"Built complex primal: m={model.m} dim={model.dim}")
    return ComplexPrimalModel(w=ComplexVector(w), bias=model.bias, params=params,
                              dim=model.dim, provenance=model.fingerprint)


def complex_primal_product(pm: ComplexPrimalModel, x: SparseVector) -> complex:
    """<*w, phi_c(x)> evaluated over the non-zero components of x only."""
    _check_probe(pm.dim, x)
    if x.nnz == 0:
        return pm.zero_fold
    w_blocks = pm.blocks[x.indices]
    diff = phi_blocks(x.values, pm.params) - pm.zero_block
    return pm.zero_fold + complex(np.sum(w_blocks * diff))


def decide_complex_primal(pm: ComplexPrimalModel, x: SparseVector) -> Decision:
    """
    Decision through the complex primal form.

    Raises:
    -------
    InternalConsistencyError
        If the product has an imaginary part beyond 1e-9.
    """
    product = complex_primal_product(pm, x)
    if abs(product.imag) > IMAG_TOLERANCE:
        logger.error(f"Imaginary residue {product.imag:.3e} in complex primal decision")
        raise InternalConsistencyError(f"imaginary part {product.imag} exceeds tolerance")
    value = product.real + pm.bias
    return Decision(value, sign_label(value))


@dataclass(frozen=True)
class WhiteningTransform:
    """
    tau(x) = C x with C = sqrt(Cov^-1).

    Attributes:
    -----------
    C : np.ndarray
        Symmetric dim x dim matrix.
    dim : int
    eigenvalues : np.ndarray
        Eigenvalues of the covariance after clamping.
    ridge : float
        Lower clamp applied to the eigenvalues (0 if none).
    """

    C: np.ndarray
    dim: int
    eigenvalues: Optional[np.ndarray] = None
    ridge: float = 0.0

    def __post_init__(self):
        C = np.array(self.C, dtype=np.float64)
        if C.shape != (self.dim, self.dim):
            raise DimensionMismatchError(self.dim, C.shape[0], "whitening matrix")
        if not np.allclose(C, C.T, rtol=0.0, atol=1e-9 * max(1.0, float(np.abs(C).max(initial=0.0)))):
            raise InvalidParameterError("whitening matrix must be symmetric")
        C.flags.writeable = False
        object.__setattr__(self, "C", C)

    def apply(self, x: SparseVector) -> SparseVector:
        """Densifying map x -> C x; O(dim * nnz(x))."""
        _check_probe(self.dim, x)
        return SparseVector.from_dense(self.C[:, x.indices] @ x.values)

    __hash__ = None


def covariance(data: Union[TrainingSet, Sequence[SparseVector]]) -> np.ndarray:
    """
    Sample covariance (divisor N - 1) of the feature columns.

    Raises:
    -------
    InvalidParameterError
        If fewer than two rows are given.
    """
    vectors = data.vectors if isinstance(data, TrainingSet) else tuple(data)
    if len(vectors) < 2:
        raise InvalidParameterError("covariance needs at least 2 examples")
    X = to_csr(vectors, vectors[0].dim).toarray()
    centred = X - X.mean(axis=0)
    cov = centred.T @ centred / (X.shape[0] - 1)
    return (cov + cov.T) / 2.0


def jacobi_eigh(a: np.ndarray, rel_tol: float = 1e-12, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, V) with the eigenvectors as the columns of V, so
    that a = V diag(eigenvalues) V^T. Sweeps stop once the off-diagonal
    Frobenius norm drops below ``rel_tol`` times the norm of ``a``.
    """
    A = np.array(a, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidParameterError("jacobi_eigh needs a square matrix")
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if n < 2 or norm == 0.0:
        return np.diag(A).copy(), V

    for sweep in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off < rel_tol * norm:
            logger.debug(f"Jacobi converged after {sweep} sweeps (n={n})")
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                A[p, q] = A[q, p] = 0.0
                v_p, v_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q

    logger.error(f"Jacobi did not converge in {max_sweeps} sweeps (n={n})")
    raise NumericError(f"Jacobi eigen-decomposition did not converge in {max_sweeps} sweeps")


def whitening_from_covariance(cov: np.ndarray, ridge: Optional[float] = None) -> WhiteningTransform:
    """
    Build tau = sqrt(Cov^-1) = V diag(1/sqrt(lambda)) V^T.

    Parameters:
    -----------
    cov : np.ndarray
        Symmetric covariance matrix.
    ridge : float, optional
        Lower clamp for the eigenvalues. ``None`` picks 1e-6 trace/dim when the
        covariance is singular and 0 otherwise. ``0`` refuses singular input.

    Raises:
    -------
    SingularCovarianceError
        If an eigenvalue is not positive and ``ridge`` is 0.
    """
    cov = np.asarray(cov, dtype=np.float64)
    dim = cov.shape[0]
    if cov.shape != (dim, dim):
        raise InvalidParameterError("covariance must be square")
    scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9 * scale):
        raise InvalidParameterError("covariance must be symmetric")
    if ridge is not None and ridge < 0:
        raise InvalidParameterError("ridge must be >= 0")

    eigenvalues, V = jacobi_eigh((cov + cov.T) / 2.0)
    top = float(np.max(np.abs(eigenvalues), initial=0.0))
    # eigenvalues this small relative to the largest are rounding noise
    singular = bool(np.any(eigenvalues <= 1e-12 * top)) or top == 0.0

    if ridge is None:
        if singular:
            trace = float(np.trace(cov))
            ridge = 1e-6 * trace / dim if trace > 0 else 1e-6
            logger.warning(f"Singular covariance (dim={dim}); using ridge {ridge:.3e}")
        else:
            ridge = 0.0
    if singular and ridge == 0.0:
        logger.error("Singular covariance and no ridge allowed")
        raise SingularCovarianceError("covariance has non-positive eigenvalues; set a ridge")

    clamped = np.maximum(eigenvalues, ridge) if ridge > 0 else eigenvalues
    C = (V * (1.0 / np.sqrt(clamped))) @ V.T
    C = (C + C.T) / 2.0
    return WhiteningTransform(C=C, dim=dim, eigenvalues=clamped, ridge=float(ridge))


def whiten_training_set(data: TrainingSet, W: WhiteningTransform) -> TrainingSet:
    return TrainingSet(tuple(W.apply(x) for x in data.vectors), data.labels)


def mahalanobis_kernel(W: WhiteningTransform, x: SparseVector, z: SparseVector,
                       params: Optional[NdkParams] = None) -> float:
    """<*phi_c(tau x), phi_c(tau z)>; equals -(x-z)^T Cov^-1 (x-z) for a=1, c=0."""
    params = params or NdkParams(a=1.0, c=0.0)
    return sparse_mod_product(W.apply(x), W.apply(z), params)


WhitenedModel = Union[NdkFastModel, ComplexPrimalModel, SvmModel]


def decide_mahalanobis(model: WhitenedModel, W: WhiteningTransform, x: SparseVector) -> Decision:
    """
    Decide on tau(x) with a model built on whitened vectors (a=1, c=0).

    The model may be a precomputed, complex primal or plain dual NDK model.
    """
    if isinstance(model, SvmModel):
        params = _require_ndk(model)
    else:
        params = model.params
    if params.a != 1.0 or params.c != 0.0:
        raise InvalidParameterError("the Mahalanobis path expects NDK parameters a=1, c=0")
    if model.dim != W.dim:
        raise DimensionMismatchError(W.dim, model.dim, "whitened model")
    tx = W.apply(x)
    if isinstance(model, NdkFastModel):
        return decide_precomputed(model, tx)
    if isinstance(model, ComplexPrimalModel):
        return decide_complex_primal(model, tx)
    return decide_dual(model, tx)
