# tests/integration/test_cli.py

import json

import pytest

from app.cli import cli
from app.modelio import read_model_file
from app.svm import decide_dual
from app.veccore.sparse_format import read_sparse_file, write_sparse_file
from tests.conftest import blobs


def _rows(text):
    return [line.split("\t") for line in text.splitlines()]


@pytest.fixture
def binary_file(tmp_path, rng):
    """Two separable blobs labelled +1/-1."""
    data = blobs(rng, n_per_class=15, dim=4)
    labels = ["+1" if y == 1 else "-1" for y in data.labels]
    return write_sparse_file(tmp_path / "binary.svm", labels, data.vectors)


@pytest.fixture
def multilabel_file(tmp_path, rng):
    """The same blobs labelled with categories ``a`` and ``b``."""
    data = blobs(rng, n_per_class=15, dim=4)
    labels = ["a" if y == 1 else "b" for y in data.labels]
    return write_sparse_file(tmp_path / "multi.svm", labels, data.vectors)


@pytest.fixture
def ndk_models(runner, tmp_path, multilabel_file):
    """One NDK model per category trained through the CLI."""
    models = tmp_path / "ndk_models"
    result = runner.invoke(cli, ["train", "--train", str(multilabel_file), "--models-dir", str(models),
                                 "--kernel", "ndk", "--a", "0.5", "-C", "10"])
    assert result.exit_code == 0, result.stderr
    return models


# ---------------------------------------------
# histogram and featurize
# ---------------------------------------------

def test_histogram_of_labels_file(runner, toy_corpus_dir):
    _, labels = toy_corpus_dir
    result = runner.invoke(cli, ["histogram", "--labels", str(labels)])
    assert result.exit_code == 0
    assert _rows(result.stdout) == [
        ["kind", "key", "documents"],
        ["assignments", "1", "3"],
        ["assignments", "2", "1"],
        ["category", "fruit", "3"],
        ["category", "vehicle", "2"],
    ]


def test_histogram_of_sparse_file(runner, multilabel_file, tmp_path):
    result = runner.invoke(cli, ["histogram", "--data", str(multilabel_file), "--out", str(tmp_path / "h")])
    assert result.exit_code == 0
    assert ["category", "a", "15"] in _rows(result.stdout)
    assert (tmp_path / "h.histogram.tsv").read_text(encoding="utf-8") == result.stdout
    assert json.loads((tmp_path / "h.run.json").read_text(encoding="utf-8"))["command"] == "histogram"


def test_histogram_needs_one_source(runner):
    assert runner.invoke(cli, ["histogram"]).exit_code == 1


def test_featurize_writes_splits(runner, toy_corpus_dir, tmp_path):
    text_dir, labels = toy_corpus_dir
    prefix = tmp_path / "out" / "toy"
    (tmp_path / "out").mkdir()
    result = runner.invoke(cli, ["--seed", "3", "featurize", "--corpus", str(text_dir), "--labels", str(labels),
                                 "--out", str(prefix), "--train", "0.5", "--validation", "0.25", "--test", "0.25"])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.stdout)
    assert rows[0] == ["split", "category", "documents", "file"]
    assert [(r[0], r[2]) for r in rows[1:]] == [("train", "2"), ("validation", "1"), ("test", "1")]

    vocab_lines = (tmp_path / "out" / "toy.vocab.tsv").read_text(encoding="utf-8").splitlines()
    dim = len(vocab_lines) - 1
    total = 0
    for name in ("train", "validation", "test"):
        data = read_sparse_file(tmp_path / "out" / f"toy.{name}.svm")
        assert data.dim == dim
        total += len(data)
    assert total == 4
    run = json.loads((tmp_path / "out" / "toy.run.json").read_text(encoding="utf-8"))
    assert run["seed"] == 3
    assert run["split"]["train"] == 0.5


def test_featurize_is_byte_stable_for_a_seed(runner, toy_corpus_dir, tmp_path):
    """Two runs with the same seed write identical split and vocabulary files."""
    text_dir, labels = toy_corpus_dir
    for name in ("first", "second"):
        result = runner.invoke(cli, ["--seed", "5", "featurize", "--corpus", str(text_dir), "--labels", str(labels),
                                     "--out", str(tmp_path / name / "toy"),
                                     "--train", "0.5", "--validation", "0.25", "--test", "0.25"])
        assert result.exit_code == 0, result.stderr
    for suffix in ("train.svm", "validation.svm", "test.svm", "vocab.tsv"):
        first = (tmp_path / "first" / f"toy.{suffix}").read_bytes()
        assert first
        assert first == (tmp_path / "second" / f"toy.{suffix}").read_bytes()


def test_featurize_geometric_mean_writes_one_file_per_category(runner, toy_corpus_dir, tmp_path):
    text_dir, labels = toy_corpus_dir
    prefix = tmp_path / "toy"
    result = runner.invoke(cli, ["featurize", "--corpus", str(text_dir), "--labels", str(labels),
                                 "--out", str(prefix), "--mode", "geometric_mean",
                                 "--train", "0.5", "--validation", "0.25", "--test", "0.25"])
    assert result.exit_code == 0, result.stderr
    categories = (tmp_path / "toy.categories.txt").read_text(encoding="utf-8").split()
    assert categories
    for category in categories:
        assert (tmp_path / f"toy.{category}.train.svm").is_file()
    assert len(_rows(result.stdout)) == 1 + 3 * len(categories)


def test_featurize_missing_labels_is_io_error(runner, toy_corpus_dir, tmp_path):
    text_dir, _ = toy_corpus_dir
    result = runner.invoke(cli, ["featurize", "--corpus", str(text_dir), "--labels", str(tmp_path / "nope.tsv"),
                                 "--out", str(tmp_path / "x")])
    assert result.exit_code == 2
    assert "Error" in result.stderr


# ---------------------------------------------
# train and predict
# ---------------------------------------------

def test_train_then_predict_binary(runner, binary_file, tmp_path):
    model_path = tmp_path / "blob.model"
    result = runner.invoke(cli, ["train", "--train", str(binary_file), "--out", str(model_path),
                                 "--kernel", "ndk", "--a", "0.5", "--c", "1"])
    assert result.exit_code == 0, result.stderr
    header, row = _rows(result.stdout)
    assert header == ["category", "kernel", "examples", "support_vectors", "bias", "file"]
    assert row[:3] == ["binary", "ndk", "30"]
    assert int(row[3]) >= 2
    assert (tmp_path / "blob.model.run.json").is_file()

    bundle = read_model_file(model_path)
    assert bundle.fast is not None and bundle.primal is not None
    data = read_sparse_file(binary_file)

    dual = runner.invoke(cli, ["predict", "--model", str(model_path), "--input", str(binary_file)])
    assert dual.exit_code == 0, dual.stderr
    rows = _rows(dual.stdout)
    assert rows[0] == ["index", "value", "label"]
    for (index, value, label), x in zip(rows[1:], data.vectors):
        expected = decide_dual(bundle.model, x)
        assert value == f"{expected.value:.17g}"
        assert label == f"{expected.label:+d}"

    primal = runner.invoke(cli, ["predict", "--model", str(model_path), "--input", str(binary_file),
                                 "--path", "primal"])
    assert primal.exit_code == 0, primal.stderr
    assert [r[2] for r in _rows(primal.stdout)] == [r[2] for r in rows]
    for fast_row, dual_row in zip(_rows(primal.stdout)[1:], rows[1:]):
        assert float(fast_row[1]) == pytest.approx(float(dual_row[1]), rel=1e-9, abs=1e-9)


def test_train_no_fast_forms(runner, binary_file, tmp_path):
    model_path = tmp_path / "plain.model"
    result = runner.invoke(cli, ["train", "--train", str(binary_file), "--out", str(model_path), "--no-fast"])
    assert result.exit_code == 0, result.stderr
    bundle = read_model_file(model_path)
    assert bundle.fast is None and bundle.primal is None


def test_fast_paths_need_ndk_model(runner, binary_file, tmp_path):
    model_path = tmp_path / "linear.model"
    assert runner.invoke(cli, ["train", "--train", str(binary_file), "--out", str(model_path),
                               "--kernel", "linear"]).exit_code == 0
    result = runner.invoke(cli, ["predict", "--model", str(model_path), "--input", str(binary_file),
                                 "--path", "precomputed"])
    assert result.exit_code == 1
    assert "NDK" in result.stderr


@pytest.mark.parametrize(
    "extra",
    [[], ["--out", "a.model", "--models-dir", "models"]],
    ids=["no_destination", "two_destinations"],
)
def test_train_needs_one_destination(runner, binary_file, extra):
    assert runner.invoke(cli, ["train", "--train", str(binary_file)] + extra).exit_code == 1


def test_training_budget_exhaustion_is_numeric_error(runner, binary_file, tmp_path):
    result = runner.invoke(cli, ["train", "--train", str(binary_file), "--out", str(tmp_path / "m.model"),
                                 "--max-iters", "1"])
    assert result.exit_code == 3
    assert "converge" in result.stderr


def test_invalid_kernel_parameter_is_usage_error(runner, binary_file, tmp_path):
    result = runner.invoke(cli, ["train", "--train", str(binary_file), "--out", str(tmp_path / "m.model"),
                                 "--kernel", "ndk", "--a", "-1"])
    assert result.exit_code == 1


def test_missing_training_file_is_io_error(runner, tmp_path):
    result = runner.invoke(cli, ["train", "--train", str(tmp_path / "none.svm"), "--out", str(tmp_path / "m")])
    assert result.exit_code == 2


def test_numeric_category_names_need_the_multi_header(runner, rng, tmp_path):
    """Categories called 1 and -1 look binary unless the file declares itself multi-label."""
    data = blobs(rng, n_per_class=10, dim=3)
    labels = ["1" if y == 1 else "-1" for y in data.labels]
    guessed = write_sparse_file(tmp_path / "guessed.svm", labels, data.vectors)
    result = runner.invoke(cli, ["train", "--train", str(guessed), "--models-dir", str(tmp_path / "guessed")])
    assert result.exit_code == 1
    assert "--out" in result.stderr

    declared = write_sparse_file(tmp_path / "declared.svm", labels, data.vectors, label_kind="multi")
    result = runner.invoke(cli, ["train", "--train", str(declared), "--models-dir", str(tmp_path / "declared")])
    assert result.exit_code == 0, result.stderr
    assert [row[0] for row in _rows(result.stdout)[1:]] == ["-1", "1"]
    assert (tmp_path / "declared" / "-1.model").is_file()


def test_predict_with_models_dir(runner, ndk_models, multilabel_file):
    result = runner.invoke(cli, ["predict", "--models-dir", str(ndk_models), "--input", str(multilabel_file),
                                 "--path", "precomputed"])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.stdout)
    assert rows[0] == ["index", "assigned", "a", "b"]
    truth = read_sparse_file(multilabel_file).labels
    assert [r[1] for r in rows[1:]] == list(truth)


# ---------------------------------------------
# eval, bench and gridsearch
# ---------------------------------------------

def test_eval_on_separable_data(runner, ndk_models, multilabel_file, tmp_path):
    prefix = tmp_path / "reports" / "ndk"
    result = runner.invoke(cli, ["eval", "--models-dir", str(ndk_models), "--test", str(multilabel_file),
                                 "--out", str(prefix)])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.stdout)
    assert rows[0] == ["category", "precision", "recall", "f1", "support"]
    assert rows[1] == ["a", "1.000000", "1.000000", "1.000000", "15"]
    assert rows[-1] == ["macro", "1.000000", "1.000000", "1.000000", "30"]
    assert (tmp_path / "reports" / "ndk.eval.tsv").read_text(encoding="utf-8") == result.stdout
    text = (tmp_path / "reports" / "ndk.eval.txt").read_text(encoding="utf-8")
    assert "ndk P" in text
    assert text.splitlines()[-1].split() == ["ndk", "1.000", "1.000", "1.000"]
    assert json.loads((tmp_path / "reports" / "ndk.report.json").read_text(encoding="utf-8"))["macro_f1"] == 1.0


def test_eval_needs_models(runner, multilabel_file, tmp_path):
    result = runner.invoke(cli, ["eval", "--models-dir", str(tmp_path), "--test", str(multilabel_file)])
    assert result.exit_code == 2


def test_bench_models_with_reference(runner, ndk_models, multilabel_file, tmp_path):
    rbf_models = tmp_path / "rbf_models"
    trained = runner.invoke(cli, ["train", "--train", str(multilabel_file), "--models-dir", str(rbf_models),
                                  "--kernel", "rbf", "--gamma", "0.5"])
    assert trained.exit_code == 0, trained.stderr

    result = runner.invoke(cli, ["bench", "--models-dir", str(ndk_models), "--probes", str(multilabel_file),
                                 "--reference", f"rbf={rbf_models}", "--out", str(tmp_path / "timing")])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.stdout)
    assert rows[0] == ["category", "ndk_primal", "ndk_dual", "square", "cubic", "rbf", "linear_dual",
                       "ndk_precomputed", "dual/primal"]
    assert [r[0] for r in rows[1:]] == ["a", "b", "all"]
    for row in rows[1:]:
        assert row[3] == row[4] == row[6] == "-"
        assert float(row[5]) > 0.0
        assert float(row[1]) > 0.0
    assert (tmp_path / "timing.bench.tsv").read_text(encoding="utf-8") == result.stdout


@pytest.mark.parametrize(
    "args",
    [["--reference", "sigmoid=x"], ["--reference", "rbf"]],
    ids=["unknown_column", "missing_directory"],
)
def test_bench_rejects_bad_reference(runner, ndk_models, multilabel_file, args):
    result = runner.invoke(cli, ["bench", "--models-dir", str(ndk_models), "--probes", str(multilabel_file)] + args)
    assert result.exit_code == 1


def test_bench_needs_models_without_synthetic(runner):
    assert runner.invoke(cli, ["bench"]).exit_code == 1


def test_bench_synthetic_text(runner):
    result = runner.invoke(cli, ["bench", "--synthetic", "--m", "20", "--dim", "100", "--n-probes", "10",
                                 "--format", "text"])
    assert result.exit_code == 0, result.stderr
    lines = result.stdout.splitlines()
    assert lines[0].split()[:3] == ["category", "ndk_primal", "ndk_dual"]
    assert set(lines[1]) <= {"-", " "}
    assert lines[2].startswith("synthetic_m20")


def test_gridsearch_then_train_with_best_point(runner, multilabel_file, tmp_path):
    prefix = tmp_path / "grid"
    result = runner.invoke(cli, ["gridsearch", "--train", str(multilabel_file), "--validation", str(multilabel_file),
                                 "--kernel", "ndk", "--C-values", "1,10", "--a-values", "0.5", "--c-offsets", "0",
                                 "--out", str(prefix)])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.stdout)
    assert rows[0] == ["kernel", "parameters", "C", "macro_f1", "converged"]
    assert [r[2] for r in rows[1:]] == ["1", "10"]
    best = json.loads((tmp_path / "grid.best.json").read_text(encoding="utf-8"))
    assert best["kernel"]["tag"] == "ndk"
    assert best["macro_f1"] == 1.0

    models = tmp_path / "best_models"
    trained = runner.invoke(cli, ["train", "--train", str(multilabel_file), "--models-dir", str(models),
                                  "--params", str(tmp_path / "grid.best.json")])
    assert trained.exit_code == 0, trained.stderr
    assert [r[1] for r in _rows(trained.stdout)[1:]] == ["ndk", "ndk"]
    assert json.loads((models / "run_config.json").read_text(encoding="utf-8"))["smo"]["C"] == best["smo"]["C"]


def test_gridsearch_rejects_bad_numbers(runner, multilabel_file):
    result = runner.invoke(cli, ["gridsearch", "--train", str(multilabel_file), "--validation", str(multilabel_file),
                                 "--C-values", "1,ten"])
    assert result.exit_code == 1


def test_train_params_file_must_exist(runner, multilabel_file, tmp_path):
    result = runner.invoke(cli, ["train", "--train", str(multilabel_file), "--models-dir", str(tmp_path / "m"),
                                 "--params", str(tmp_path / "missing.json")])
    assert result.exit_code == 2


def test_log_file_receives_diagnostics(runner, binary_file, tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    result = runner.invoke(cli, ["--log-level", "INFO", "--log-file", str(log_file), "train",
                                 "--train", str(binary_file), "--out", str(tmp_path / "m.model")])
    assert result.exit_code == 0, result.stderr
    assert "SMO converged" in log_file.read_text(encoding="utf-8")
