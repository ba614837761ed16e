# app/textfeat/__init__.py

"""
Module: textfeat

Corpus ingestion and feature extraction for text categorisation.

Documents are tokenised into lowercase alphanumeric terms; a vocabulary and
per-category document counts are built from the training split only. A
document becomes a SparseVector over the vocabulary, weighted either by tfidf
alone or by the geometric mean of tfidf and the term's GSS coefficient for
the category at hand, and then L2-normalised.

    tfidf(t, d) = (count(t, d) / len(d)) * ln(N / df(t))
    GSS(t, c)   = P(t, c) P(~t, ~c) - P(t, ~c) P(~t, c)
"""

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from app.exceptions import DataFormatError, DataIOError, InvalidParameterError
from app.veccore import SparseVector

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FeatureMode = Literal["tfidf_only", "geometric_mean"]

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text: str, stopwords: FrozenSet[str] = frozenset()) -> List[str]:
    """
    Lowercase, split on any non-alphanumeric character, drop tokens shorter
    than two characters (and stopwords, if given).

    >>> tokenize("SVM-Kernel 2015")
    ['svm', 'kernel', '2015']
    """
    return [t for t in _SPLIT.split(text.lower()) if len(t) >= 2 and t not in stopwords]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    categories: FrozenSet[str]


@dataclass
class Corpus:
    """Documents with their category sets; doc ids are unique."""

    documents: List[Document] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise DataFormatError(f"duplicate document id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def categories(self) -> List[str]:
        found = set()
        for doc in self.documents:
            found.update(doc.categories)
        return sorted(found)

    def subset(self, doc_ids: Iterable[str]) -> "Corpus":
        by_id = {doc.doc_id: doc for doc in self.documents}
        return Corpus([by_id[i] for i in doc_ids])


def load_stopwords(path: PathLike) -> FrozenSet[str]:
    """One stopword per line; blank lines and ``#`` comments ignored."""
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"cannot read stopword file {path}")
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def parse_labels_file(path: PathLike, none_category: Optional[str] = None) -> Dict[str, FrozenSet[str]]:
    """
    Read ``doc_id<TAB>cat[,cat...]`` lines.

    An empty category field is only accepted when ``none_category`` names the
    artificial category for unassigned documents.
    """
    path = Path(path)
    if not path.is_file():
        logger.error(f"Labels file not found: {path}")
        raise DataIOError(f"cannot read labels file {path}")
    labels: Dict[str, FrozenSet[str]] = {}
    with path.open(encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            doc_id, sep, cats = line.partition("\t")
            doc_id = doc_id.strip()
            if not sep or not doc_id:
                raise DataFormatError("expected doc_id<TAB>categories", str(path), number)
            if doc_id in labels:
                raise DataFormatError(f"duplicate document id {doc_id!r}", str(path), number)
            categories = frozenset(c.strip() for c in cats.split(",") if c.strip())
            if not categories:
                if none_category is None:
                    raise DataFormatError(f"document {doc_id!r} has no category", str(path), number)
                categories = frozenset([none_category])
            labels[doc_id] = categories
    return labels


def load_corpus(text_dir: PathLike, labels_file: PathLike,
                none_category: Optional[str] = None) -> Corpus:
    """
    Load a directory of UTF-8 text files and its labels file.

    The document id is the file name without its extension. Documents are
    returned in labels-file order; text files without a label are skipped.
    """
    text_dir = Path(text_dir)
    if not text_dir.is_dir():
        logger.error(f"Corpus directory not found: {text_dir}")
        raise DataIOError(f"cannot read corpus directory {text_dir}")
    labels = parse_labels_file(labels_file, none_category)
    files = {p.stem: p for p in sorted(text_dir.iterdir()) if p.is_file()}

    documents = []
    for doc_id, categories in labels.items():
        if doc_id not in files:
            raise DataIOError(f"no text file for labelled document {doc_id!r} in {text_dir}")
        try:
            text = files[doc_id].read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise DataFormatError(f"not valid UTF-8: {exc}", str(files[doc_id])) from exc
        documents.append(Document(doc_id, text, categories))
    unlabelled = len(set(files) - set(labels))
    if unlabelled:
        logger.warning(f"{unlabelled} text files in {text_dir} have no labels and were skipped")
    logger.info(f"Loaded corpus: {len(documents)} documents from {text_dir}")
    return Corpus(documents)


@dataclass
class Vocabulary:
    """
    Term index and document frequencies of the training split.

    Attributes:
    -----------
    terms : dict
        term -> dense index 0..len-1
    doc_freq : list of int
        Document frequency per index, >= 1.
    n_docs : int
        Number of training documents.
    """

    terms: Dict[str, int]
    doc_freq: List[int]
    n_docs: int

    def __len__(self):
        return len(self.terms)

    def index(self, term: str) -> Optional[int]:
        return self.terms.get(term)

    def term_list(self) -> List[str]:
        out = [""] * len(self.terms)
        for term, i in self.terms.items():
            out[i] = term
        return out


def build_vocabulary(token_lists: Iterable[Sequence[str]], min_df: int = 1) -> Vocabulary:
    """Terms with document frequency >= ``min_df``, indexed in sorted order."""
    df: Counter = Counter()
    n_docs = 0
    for tokens in token_lists:
        n_docs += 1
        df.update(set(tokens))
    kept = sorted(t for t, n in df.items() if n >= min_df)
    vocab = Vocabulary({t: i for i, t in enumerate(kept)}, [df[t] for t in kept], n_docs)
    logger.debug(f"Vocabulary: {len(vocab)} terms from {n_docs} documents (min_df={min_df})")
    return vocab


def save_vocabulary(vocab: Vocabulary, path: PathLike) -> Path:
    """Write ``term<TAB>index<TAB>doc_freq`` lines after an ``# n_docs=N`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"# n_docs={vocab.n_docs}\n")
        for term in vocab.term_list():
            i = vocab.terms[term]
            handle.write(f"{term}\t{i}\t{vocab.doc_freq[i]}\n")
    return path


def load_vocabulary(path: PathLike) -> Vocabulary:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"cannot read vocabulary file {path}")
    terms, freqs, n_docs = {}, {}, None
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line.startswith("# n_docs="):
            n_docs = int(line.split("=", 1)[1])
            continue
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataFormatError("expected term<TAB>index<TAB>doc_freq", str(path), number)
        try:
            index, df = int(parts[1]), int(parts[2])
        except ValueError:
            raise DataFormatError("index and doc_freq must be integers", str(path), number) from None
        terms[parts[0]] = index
        freqs[index] = df
    if sorted(freqs) != list(range(len(freqs))):
        raise DataFormatError("vocabulary indices are not dense", str(path))
    if n_docs is None:
        raise DataFormatError("missing '# n_docs=' header", str(path))
    return Vocabulary(terms, [freqs[i] for i in range(len(freqs))], n_docs)


@dataclass
class CategoryStats:
    """
    Document-level term/category co-occurrence counts.

    For every (t, c) the four cells n(t,c), n(t,~c), n(~t,c), n(~t,~c) sum
    to ``n_docs``.
    """

    n_docs: int
    doc_freq: Dict[str, int]
    category_docs: Dict[str, int]
    joint: Dict[str, Counter]

    def categories(self) -> List[str]:
        return sorted(self.category_docs)

    def cells(self, term: str, category: str) -> Tuple[int, int, int, int]:
        n_tc = self.joint.get(term, Counter())[category]
        n_t = self.doc_freq.get(term, 0)
        n_c = self.category_docs.get(category, 0)
        return n_tc, n_t - n_tc, n_c - n_tc, self.n_docs - n_t - n_c + n_tc


def build_category_stats(token_lists: Sequence[Sequence[str]],
                         label_sets: Sequence[Iterable[str]]) -> CategoryStats:
    if len(token_lists) != len(label_sets):
        raise InvalidParameterError("one label set per document is required")
    doc_freq: Counter = Counter()
    category_docs: Counter = Counter()
    joint: Dict[str, Counter] = {}
    for tokens, labels in zip(token_lists, label_sets):
        labels = set(labels)
        category_docs.update(labels)
        for term in set(tokens):
            doc_freq[term] += 1
            joint.setdefault(term, Counter()).update(labels)
    return CategoryStats(len(token_lists), dict(doc_freq), dict(category_docs), joint)


def tfidf(term_count: int, doc_len: int, doc_freq: int, n_docs: float) -> float:
    """
    Relative term frequency times natural-log inverse document frequency.

    Raises:
    -------
    InvalidParameterError
        If ``doc_len`` is zero, ``doc_freq`` < 1 or ``n_docs`` < ``doc_freq``.
    """
    if doc_len <= 0:
        raise InvalidParameterError("doc_len must be positive")
    if doc_freq < 1 or n_docs < doc_freq:
        raise InvalidParameterError(f"invalid document frequency {doc_freq} for {n_docs} documents")
    return (term_count / doc_len) * math.log(n_docs / doc_freq)


def gss(stats: CategoryStats, term: str, category: str) -> float:
    """GSS coefficient in [-0.25, 0.25]; positive iff term and category are associated."""
    if stats.n_docs == 0:
        raise InvalidParameterError("GSS needs at least one document")
    n = float(stats.n_docs)
    n_tc, n_t_nc, n_nt_c, n_nt_nc = stats.cells(term, category)
    return (n_tc / n) * (n_nt_nc / n) - (n_t_nc / n) * (n_nt_c / n)


def featurize(doc: Union[str, Sequence[str]], vocab: Vocabulary, stats: Optional[CategoryStats],
              category: Optional[str], mode: FeatureMode = "tfidf_only",
              stopwords: FrozenSet[str] = frozenset()) -> SparseVector:
    """
    Turn a document (raw text or token list) into an L2-normalised SparseVector.

    In ``geometric_mean`` mode each weight is sqrt(tfidf * max(GSS, 0)) for
    the given category; in ``tfidf_only`` mode it is the tfidf value.
    Out-of-vocabulary terms are dropped and the vocabulary is never changed.

    Raises:
    -------
    InvalidParameterError
        If the category is unknown in ``geometric_mean`` mode.
    """
    if mode not in ("tfidf_only", "geometric_mean"):
        raise InvalidParameterError(f"unknown feature mode {mode!r}")
    if mode == "geometric_mean":
        if stats is None or category not in stats.category_docs:
            raise InvalidParameterError(f"unknown category {category!r} for geometric_mean features")
    if len(vocab) == 0:
        raise InvalidParameterError("empty vocabulary")

    tokens = tokenize(doc, stopwords) if isinstance(doc, str) else list(doc)
    counts = Counter(tokens)
    indices, weights = [], []
    for term, count in counts.items():
        idx = vocab.index(term)
        if idx is None:
            continue
        weight = tfidf(count, len(tokens), vocab.doc_freq[idx], vocab.n_docs)
        if mode == "geometric_mean":
            weight = math.sqrt(weight * max(gss(stats, term, category), 0.0))
        if weight != 0.0:
            indices.append(idx)
            weights.append(weight)

    if not indices:
        return SparseVector(len(vocab))
    order = np.argsort(indices)
    idx = np.asarray(indices)[order]
    val = np.asarray(weights)[order]
    return SparseVector(len(vocab), idx, val / np.linalg.norm(val))


@dataclass
class Featurizer:
    """Vocabulary, statistics and mode bundled for featurizing many documents."""

    vocab: Vocabulary
    stats: CategoryStats
    mode: FeatureMode = "tfidf_only"
    stopwords: FrozenSet[str] = frozenset()

    @classmethod
    def fit(cls, training: Corpus, mode: FeatureMode = "tfidf_only",
            stopwords: FrozenSet[str] = frozenset(), min_df: int = 1) -> "Featurizer":
        """Build vocabulary and statistics from the training corpus only."""
        token_lists = [tokenize(doc.text, stopwords) for doc in training]
        vocab = build_vocabulary(token_lists, min_df)
        stats = build_category_stats(token_lists, [doc.categories for doc in training])
        logger.info(f"Featurizer fitted: {len(vocab)} terms, {len(stats.category_docs)} categories, mode={mode}")
        return cls(vocab, stats, mode, stopwords)

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def transform(self, doc: Union[Document, str], category: Optional[str] = None) -> SparseVector:
        text = doc.text if isinstance(doc, Document) else doc
        return featurize(tokenize(text, self.stopwords), self.vocab, self.stats, category, self.mode)

    def transform_corpus(self, corpus: Corpus, category: Optional[str] = None) -> List[SparseVector]:
        return [self.transform(doc, category) for doc in corpus]
