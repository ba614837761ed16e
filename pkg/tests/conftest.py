# tests/conftest.py

import logging

import numpy as np
import pytest
from click.testing import CliRunner

from app.logger_module import setup_test_logging
from app.svm import TrainingSet
from app.veccore import NdkParams, SparseVector


@pytest.fixture
def rng():
    """Seeded generator so every randomized test is reproducible."""
    return np.random.default_rng(20150601)


@pytest.fixture
def ndk_params():
    return NdkParams(a=1.0, c=0.0)


def random_sparse(rng, dim, density=0.3, scale=1.0):
    """Random SparseVector with about density * dim non-zeros (at least one)."""
    nnz = max(1, int(round(density * dim)))
    idx = np.sort(rng.choice(dim, size=nnz, replace=False))
    return SparseVector(dim, idx, rng.normal(scale=scale, size=nnz))


@pytest.fixture
def xor_data():
    """The four XOR corners with labels +1 on the diagonal."""
    points = [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]
    labels = [1, 1, -1, -1]
    return TrainingSet(tuple(SparseVector.from_dense(p) for p in points), tuple(labels))


def blobs(rng, n_per_class=20, dim=5, separation=3.0):
    """Two Gaussian blobs, linearly separable with high probability."""
    vectors, labels = [], []
    for label, centre in ((1, separation / 2), (-1, -separation / 2)):
        for _ in range(n_per_class):
            vectors.append(SparseVector.from_dense(rng.normal(loc=centre, scale=0.5, size=dim)))
            labels.append(label)
    return TrainingSet(tuple(vectors), tuple(labels))


@pytest.fixture
def blob_data(rng):
    return blobs(rng)


TOY_DOCS = {
    "d1": ("apple banana apple", "fruit"),
    "d2": ("apple cherry", "fruit"),
    "d3": ("banana car", "fruit,vehicle"),
    "d4": ("car engine car engine", "vehicle"),
}


@pytest.fixture
def toy_corpus_dir(tmp_path):
    """Four tiny documents and their labels file; returns (text_dir, labels_file)."""
    text_dir = tmp_path / "texts"
    text_dir.mkdir()
    lines = []
    for doc_id, (text, cats) in TOY_DOCS.items():
        (text_dir / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        lines.append(f"{doc_id}\t{cats}")
    labels = tmp_path / "labels.tsv"
    labels.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return text_dir, labels


def write_corpus(corpus, directory):
    """Write a Corpus as text files plus labels file; returns (text_dir, labels_file)."""
    text_dir = directory / "texts"
    text_dir.mkdir(parents=True)
    lines = []
    for doc in corpus:
        (text_dir / f"{doc.doc_id}.txt").write_text(doc.text, encoding="utf-8")
        lines.append(f"{doc.doc_id}\t{','.join(sorted(doc.categories))}")
    labels = directory / "labels.tsv"
    labels.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return text_dir, labels


@pytest.fixture
def runner():
    """CliRunner keeping stdout (TSV) apart from stderr (logs)."""
    return CliRunner(mix_stderr=False)


@pytest.fixture(scope="session", autouse=True)
def _test_logging():
    """Quiet console logging for the whole run; yields the configured root handlers."""
    root = logging.getLogger()
    level = root.level
    handlers = list(setup_test_logging().handlers)
    yield handlers
    for handler in handlers:
        root.removeHandler(handler)
        handler.close()
    root.setLevel(level)


@pytest.fixture(autouse=True)
def _restore_logging(_test_logging):
    """CLI runs reconfigure the root logger; put the test-suite setup back after every test."""
    yield
    root = logging.getLogger()
    for handler in root.handlers:
        if handler not in _test_logging:
            handler.close()
    root.handlers[:] = _test_logging
    root.setLevel(logging.WARNING)
