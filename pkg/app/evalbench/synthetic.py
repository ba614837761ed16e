# app/evalbench/synthetic.py

"""
Seeded synthetic data: random sparse models and probes for the timing
benchmark, and a labelled text corpus with category-indicative vocabulary
for end-to-end runs.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from app.exceptions import InvalidParameterError
from app.kernels import LinearKernel, NdkKernel, RbfKernel, cubic, square
from app.svm import SvmModel
from app.textfeat import Corpus, Document
from app.veccore import SparseVector

logger = logging.getLogger(__name__)


def _nnz(dim: int, density: float) -> int:
    if dim < 1:
        raise InvalidParameterError("dim must be positive")
    if not 0.0 < density <= 1.0:
        raise InvalidParameterError(f"density must be in (0, 1], got {density}")
    return max(1, int(round(density * dim)))


def random_sparse_vectors(n: int, dim: int, density: float, rng: np.random.Generator) -> List[SparseVector]:
    """``n`` vectors with round(density * dim) non-zeros drawn from U(0.1, 1)."""
    nnz = _nnz(dim, density)
    vectors = []
    for _ in range(n):
        idx = np.sort(rng.choice(dim, size=nnz, replace=False))
        vectors.append(SparseVector(dim, idx, rng.uniform(0.1, 1.0, size=nnz)))
    return vectors


def synthetic_probes(n: int, dim: int, density: float, seed: int = 0) -> List[SparseVector]:
    return random_sparse_vectors(n, dim, density, np.random.default_rng(seed))


def synthetic_ndk_model(m: int, dim: int, density: float, seed: int = 0,
                        a: float = 1.0, c: float = 0.0, bias: float = 0.0) -> SvmModel:
    """
    An NDK model with ``m`` random support vectors.

    The coefficients are standard normal, so the model is not the result of
    training; it only has the shape of one.
    """
    if m < 1:
        raise InvalidParameterError("a model needs at least one support vector")
    rng = np.random.default_rng(seed)
    svs = random_sparse_vectors(m, dim, density, rng)
    coeffs = rng.normal(size=m)
    return SvmModel(kernel=NdkKernel(a=a, c=c), svs=tuple(svs), coeffs=coeffs, bias=bias, dim=dim)


def synthetic_reference_models(m: int, dim: int, density: float, seed: int = 0) -> Dict[str, SvmModel]:
    """Square, cubic, RBF and linear models over the same support vectors as ``synthetic_ndk_model``."""
    base = synthetic_ndk_model(m, dim, density, seed)
    return {
        "square": replace(base, kernel=square()),
        "cubic": replace(base, kernel=cubic()),
        "rbf": replace(base, kernel=RbfKernel(gamma=1.0)),
        "linear_dual": replace(base, kernel=LinearKernel()),
    }


def synthetic_corpus(n_docs: int = 500, n_categories: int = 5, seed: int = 0,
                     indicative_terms: int = 40, common_terms: int = 300,
                     doc_length: int = 60, signal: float = 0.35,
                     second_label_rate: float = 0.1,
                     category_names: Optional[List[str]] = None) -> Corpus:
    """
    A labelled corpus in which every category owns a block of indicative terms.

    Each document gets one category, and with probability
    ``second_label_rate`` a second one. A fraction ``signal`` of its tokens
    comes from the indicative terms of its categories, the rest from a
    shared pool of common terms.
    """
    if n_categories < 1 or n_docs < 1:
        raise InvalidParameterError("need at least one category and one document")
    if not 0.0 < signal <= 1.0:
        raise InvalidParameterError("signal must be in (0, 1]")
    names = category_names or [f"cat{k}" for k in range(n_categories)]
    if len(names) != n_categories:
        raise InvalidParameterError("one name per category is required")

    rng = np.random.default_rng(seed)
    indicative = [[f"{name}term{j:03d}" for j in range(indicative_terms)] for name in names]
    common = [f"common{j:04d}" for j in range(common_terms)]

    documents = []
    for i in range(n_docs):
        cats = [int(rng.integers(n_categories))]
        if n_categories > 1 and rng.random() < second_label_rate:
            other = int(rng.integers(n_categories - 1))
            cats.append(other if other < cats[0] else other + 1)
        n_signal = int(round(doc_length * signal))
        tokens = [indicative[cats[t % len(cats)]][int(rng.integers(indicative_terms))] for t in range(n_signal)]
        tokens += [common[int(rng.integers(common_terms))] for _ in range(doc_length - n_signal)]
        rng.shuffle(tokens)
        documents.append(Document(f"doc{i:05d}", " ".join(tokens), frozenset(names[k] for k in cats)))
    logger.debug(f"Synthetic corpus: {n_docs} documents, {n_categories} categories, seed={seed}")
    return Corpus(documents)
