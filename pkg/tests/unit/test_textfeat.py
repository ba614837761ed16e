# tests/unit/test_textfeat.py

import math

import pytest

from app.exceptions import DataFormatError, DataIOError, InvalidParameterError
from app.textfeat import (
    CategoryStats,
    Corpus,
    Document,
    Featurizer,
    Vocabulary,
    build_category_stats,
    build_vocabulary,
    featurize,
    gss,
    load_corpus,
    load_stopwords,
    load_vocabulary,
    parse_labels_file,
    save_vocabulary,
    tfidf,
    tokenize,
)
from tests.conftest import TOY_DOCS


@pytest.fixture
def toy_corpus(toy_corpus_dir):
    return load_corpus(*toy_corpus_dir)


@pytest.fixture
def toy_featurizer(toy_corpus):
    return Featurizer.fit(toy_corpus)


# ---------------------------------------------
# Tokens and corpus files
# ---------------------------------------------

@pytest.mark.parametrize(
    "text,expected",
    [
        ("SVM-Kernel 2015", ["svm", "kernel", "2015"]),
        ("a b_c  dd", ["dd"]),
        ("Ünïcode wörds", ["ünïcode", "wörds"]),
        ("", []),
    ],
    ids=["punctuation", "short_tokens", "unicode", "empty"],
)
def test_tokenize(text, expected):
    """Tokenization cases."""
    assert tokenize(text) == expected


def test_tokenize_with_stopwords(tmp_path):
    """Stopword files are lowercased and applied."""
    path = tmp_path / "stop.txt"
    path.write_text("# common words\nThe\n\nand\n", encoding="utf-8")
    stopwords = load_stopwords(path)
    assert stopwords == frozenset({"the", "and"})
    assert tokenize("The cat and the dog", stopwords) == ["cat", "dog"]
    with pytest.raises(DataIOError):
        load_stopwords(tmp_path / "missing.txt")


def test_load_corpus_keeps_labels_order(toy_corpus):
    """Documents come back in labels file order."""
    assert [doc.doc_id for doc in toy_corpus] == list(TOY_DOCS)
    assert toy_corpus.documents[2].categories == frozenset({"fruit", "vehicle"})
    assert toy_corpus.categories() == ["fruit", "vehicle"]
    assert [d.doc_id for d in toy_corpus.subset(["d4", "d1"])] == ["d4", "d1"]


def test_load_corpus_skips_unlabelled_files(toy_corpus_dir, caplog):
    """Text files without labels are ignored."""
    text_dir, labels = toy_corpus_dir
    (text_dir / "extra.txt").write_text("orphan text", encoding="utf-8")
    corpus = load_corpus(text_dir, labels)
    assert len(corpus) == 4
    assert any("no labels" in m for m in caplog.messages)


def test_load_corpus_missing_inputs(toy_corpus_dir, tmp_path):
    """Missing inputs are I/O errors."""
    text_dir, labels = toy_corpus_dir
    with pytest.raises(DataIOError):
        load_corpus(tmp_path / "nowhere", labels)
    with pytest.raises(DataIOError):
        load_corpus(text_dir, tmp_path / "missing.tsv")
    (text_dir / "d2.txt").unlink()
    with pytest.raises(DataIOError):
        load_corpus(text_dir, labels)


@pytest.mark.parametrize(
    "content,line_number",
    [
        ("d1\tfruit\nd2 fruit\n", 2),
        ("d1\tfruit\nd1\tvehicle\n", 2),
        ("# header\nd1\t \n", 2),
    ],
    ids=["missing_tab", "duplicate_id", "no_category"],
)
def test_parse_labels_file_errors(tmp_path, content, line_number):
    """Malformed labels file lines."""
    path = tmp_path / "labels.tsv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DataFormatError) as exc:
        parse_labels_file(path)
    assert exc.value.line_number == line_number


def test_parse_labels_file_none_category(tmp_path):
    """A document may have no category."""
    path = tmp_path / "labels.tsv"
    path.write_text("d1\t\nd2\ta, b\n", encoding="utf-8")
    labels = parse_labels_file(path, none_category="none")
    assert labels == {"d1": frozenset({"none"}), "d2": frozenset({"a", "b"})}


def test_corpus_rejects_duplicate_ids():
    """Duplicate document ids raise."""
    doc = Document("x", "text", frozenset({"a"}))
    with pytest.raises(DataFormatError):
        Corpus([doc, doc])


# ---------------------------------------------
# Vocabulary and statistics
# ---------------------------------------------

def test_vocabulary_is_sorted_with_document_frequencies(toy_featurizer):
    """Terms are sorted and carry their document frequencies."""
    vocab = toy_featurizer.vocab
    assert vocab.term_list() == ["apple", "banana", "car", "cherry", "engine"]
    assert vocab.doc_freq == [2, 2, 2, 1, 1]
    assert vocab.n_docs == 4
    assert vocab.index("zebra") is None
    assert toy_featurizer.dim == 5


def test_min_df_drops_rare_terms():
    """Terms below min_df are dropped."""
    vocab = build_vocabulary([["aa", "bb"], ["aa"], ["cc", "aa", "bb"]], min_df=2)
    assert vocab.terms == {"aa": 0, "bb": 1}
    assert vocab.doc_freq == [3, 2]


def test_vocabulary_file(tmp_path, toy_featurizer):
    """Vocabulary written and read back."""
    path = save_vocabulary(toy_featurizer.vocab, tmp_path / "vocab.tsv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# n_docs=4"
    assert lines[1] == "apple\t0\t2"
    loaded = load_vocabulary(path)
    assert loaded == toy_featurizer.vocab


@pytest.mark.parametrize(
    "content",
    ["# n_docs=2\naa\t0\t1\nbb\t2\t1\n", "aa\t0\t1\n", "# n_docs=2\naa\t0\n", "# n_docs=2\naa\tx\t1\n"],
    ids=["sparse_indices", "missing_header", "missing_column", "non_integer"],
)
def test_load_vocabulary_rejects(tmp_path, content):
    """Broken vocabulary files."""
    path = tmp_path / "vocab.tsv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DataFormatError):
        load_vocabulary(path)


def test_category_cells_cover_every_document(toy_featurizer):
    """The four contingency cells add up to the corpus size."""
    stats = toy_featurizer.stats
    for term in ("apple", "banana", "car", "cherry", "engine", "zebra"):
        for category in ("fruit", "vehicle"):
            cells = stats.cells(term, category)
            assert sum(cells) == stats.n_docs
            assert min(cells) >= 0


@pytest.mark.parametrize(
    "term,category,expected",
    [
        ("apple", "fruit", 0.125),
        ("car", "fruit", -0.125),
        ("banana", "vehicle", 0.0),
        ("car", "vehicle", 0.25),
        ("zebra", "fruit", 0.0),
    ],
    ids=["associated", "anti_associated", "independent", "perfect", "unseen_term"],
)
def test_gss_values(toy_featurizer, term, category, expected):
    """GSS by hand on the toy corpus."""
    assert gss(toy_featurizer.stats, term, category) == pytest.approx(expected)


def test_gss_is_bounded(rng):
    """GSS stays bounded on random data."""
    terms = [f"t{i}" for i in range(12)]
    token_lists = [list(rng.choice(terms, size=5)) for _ in range(40)]
    label_sets = [{"a"} if rng.random() < 0.4 else {"b"} for _ in range(40)]
    stats = build_category_stats(token_lists, label_sets)
    for term in terms:
        for category in ("a", "b"):
            assert -0.25 <= gss(stats, term, category) <= 0.25


def test_statistics_inputs_are_checked():
    """Mismatched inputs and empty statistics raise."""
    with pytest.raises(InvalidParameterError):
        build_category_stats([["aa"]], [])
    with pytest.raises(InvalidParameterError):
        gss(CategoryStats(0, {}, {}, {}), "aa", "a")


def test_tfidf_value():
    """tf-idf of a single term."""
    assert tfidf(2, 3, 2, 4) == pytest.approx(2 / 3 * math.log(2))
    assert tfidf(1, 5, 4, 4) == 0.0


@pytest.mark.parametrize(
    "args",
    [(1, 0, 1, 4), (1, 3, 0, 4), (1, 3, 5, 4)],
    ids=["empty_document", "zero_doc_freq", "doc_freq_above_n"],
)
def test_tfidf_rejects(args):
    """Non-positive document counts."""
    with pytest.raises(InvalidParameterError):
        tfidf(*args)


# ---------------------------------------------
# Featurization
# ---------------------------------------------

def test_tfidf_features_by_hand(toy_featurizer, toy_corpus):
    """tf-idf vector of a small document."""
    vectors = toy_featurizer.transform_corpus(toy_corpus)
    # d1: apple 2/3 ln2, banana 1/3 ln2
    assert vectors[0].indices.tolist() == [0, 1]
    assert vectors[0].values.tolist() == pytest.approx([2 / math.sqrt(5), 1 / math.sqrt(5)])
    # d2: apple 1/2 ln2, cherry 1/2 ln4
    assert vectors[1].indices.tolist() == [0, 3]
    assert vectors[1].values.tolist() == pytest.approx([1 / math.sqrt(5), 2 / math.sqrt(5)])
    for x in vectors:
        assert x.norm_sq() == pytest.approx(1.0)


def test_geometric_mean_features_by_hand(toy_corpus):
    """Geometric-mean features of a small document."""
    featurizer = Featurizer.fit(toy_corpus, mode="geometric_mean")
    d1, _, d3, _ = toy_corpus.documents
    # both d1 terms share GSS 0.125 with fruit, so weights scale with sqrt(tfidf)
    x = featurizer.transform(d1, "fruit")
    assert x.values.tolist() == pytest.approx([math.sqrt(2 / 3), math.sqrt(1 / 3)])
    # car is anti-associated with fruit and is dropped
    fruit = featurizer.transform(d3, "fruit")
    assert fruit.indices.tolist() == [1]
    assert fruit.values.tolist() == pytest.approx([1.0])
    # banana is independent of vehicle
    vehicle = featurizer.transform(d3, "vehicle")
    assert vehicle.indices.tolist() == [2]
    assert vehicle.values.tolist() == pytest.approx([1.0])


def test_unseen_document_uses_training_vocabulary(toy_featurizer):
    """Unknown terms in new documents are dropped."""
    before = dict(toy_featurizer.vocab.terms)
    x = toy_featurizer.transform("Apple zebra")
    assert x.indices.tolist() == [0]
    assert x.values.tolist() == pytest.approx([1.0])
    assert toy_featurizer.transform("zebra unicorn").nnz == 0
    assert toy_featurizer.vocab.terms == before


def test_featurize_rejects(toy_featurizer):
    """Unknown categories and missing statistics raise."""
    vocab, stats = toy_featurizer.vocab, toy_featurizer.stats
    with pytest.raises(InvalidParameterError):
        featurize("apple", vocab, stats, "boats", mode="geometric_mean")
    with pytest.raises(InvalidParameterError):
        featurize("apple", vocab, None, "fruit", mode="geometric_mean")
    with pytest.raises(InvalidParameterError):
        featurize("apple", vocab, stats, None, mode="bm25")
    with pytest.raises(InvalidParameterError):
        featurize("apple", Vocabulary({}, [], 0), stats, None)


def test_featurize_accepts_tokens(toy_featurizer):
    """Featurizing pre-tokenized input."""
    from_text = featurize("car engine", toy_featurizer.vocab, toy_featurizer.stats, None)
    from_tokens = featurize(["car", "engine"], toy_featurizer.vocab, toy_featurizer.stats, None)
    assert from_text == from_tokens
    assert from_text.indices.tolist() == [2, 4]
    assert from_text.values.tolist() == pytest.approx([1 / math.sqrt(5), 2 / math.sqrt(5)])
