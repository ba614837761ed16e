# tests/e2e/test_e2e.py

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from app.config import BenchConfig
from app.evalbench.bench import run_synthetic_benchmark, time_path
from app.evalbench.synthetic import synthetic_corpus
from app.veccore import NdkParams, dot, sparse_mod_product
from tests.conftest import random_sparse, write_corpus

ROOT = Path(__file__).resolve().parents[2]


def run_main(*args, check=True):
    """Run ``python main.py`` in a fresh interpreter and return the completed process."""
    completed = subprocess.run([sys.executable, "main.py", *map(str, args)], cwd=ROOT,
                               capture_output=True, text=True, timeout=600)
    if check:
        assert completed.returncode == 0, completed.stderr
    return completed


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small two-category corpus written to disk."""
    root = tmp_path_factory.mktemp("e2e")
    corpus = synthetic_corpus(n_docs=80, n_categories=2, seed=2, signal=0.6, category_names=["earn", "grain"])
    write_corpus(corpus, root)
    return root


@pytest.mark.e2e
def test_help_lists_commands():
    out = run_main("--help").stdout
    for command in ("featurize", "train", "predict", "eval", "bench", "gridsearch", "histogram"):
        assert command in out


@pytest.mark.e2e
def test_full_run(workspace):
    prefix = workspace / "data"
    run_main("featurize", "--corpus", workspace / "texts", "--labels", workspace / "labels.tsv", "--out", prefix)
    models = workspace / "models"
    trained = run_main("--log-level", "INFO", "train", "--train", f"{prefix}.train.svm",
                       "--models-dir", models, "-C", "10")
    assert [line.split("\t")[0] for line in trained.stdout.splitlines()[1:]] == ["earn", "grain"]
    assert "SMO converged" in trained.stderr

    predicted = run_main("predict", "--models-dir", models, "--input", f"{prefix}.test.svm", "--path", "primal")
    assert predicted.stdout.splitlines()[0] == "index\tassigned\tearn\tgrain"

    evaluated = run_main("eval", "--models-dir", models, "--test", f"{prefix}.test.svm", "--path", "precomputed")
    macro = evaluated.stdout.splitlines()[-1].split("\t")
    assert macro[0] == "macro"
    assert float(macro[3]) >= 0.8


@pytest.mark.e2e
@pytest.mark.parametrize(
    "args,code",
    [
        (["train", "--train", "x.svm"], 1),
        (["eval", "--models-dir", "missing_models", "--test", "x.svm"], 2),
        (["bench", "--synthetic", "--repetitions", "2"], 1),
    ],
    ids=["usage", "io", "invalid_config"],
)
def test_exit_codes(workspace, args, code):
    completed = subprocess.run([sys.executable, str(ROOT / "main.py"), *args], cwd=workspace,
                               capture_output=True, text=True, timeout=120)
    assert completed.returncode == code
    assert completed.stdout == ""


# ---------------------------------------------
# Timing
# ---------------------------------------------

@pytest.mark.e2e
@pytest.mark.slow
def test_fast_paths_beat_dual():
    row = run_synthetic_benchmark(m=2000, dim=10_000, density=0.01, n_probes=1000,
                                  cfg=BenchConfig(repetitions=5), with_reference=False)
    dual = row.timings_ms["ndk_dual"]
    assert dual >= 3.0 * row.timings_ms["ndk_precomputed"]
    assert dual >= 3.0 * row.timings_ms["ndk_primal"]


@pytest.mark.e2e
@pytest.mark.slow
def test_primal_time_does_not_grow_with_support_vectors():
    cfg = BenchConfig(repetitions=7)
    small = run_synthetic_benchmark(m=100, dim=10_000, density=0.01, n_probes=1000, cfg=cfg, with_reference=False)
    large = run_synthetic_benchmark(m=2000, dim=10_000, density=0.01, n_probes=1000, cfg=cfg, with_reference=False)
    assert large.timings_ms["ndk_primal"] <= 1.2 * small.timings_ms["ndk_primal"]


@pytest.mark.e2e
@pytest.mark.slow
@pytest.mark.parametrize("operation", ["sparse_mod_product", "dot"], ids=["mod_product", "dot"])
def test_sparse_cost_follows_the_support(operation):
    rng = np.random.default_rng(7)
    params = NdkParams(a=1.0, c=1.0)
    operations = {
        "sparse_mod_product": lambda pair: sparse_mod_product(pair[0], pair[1], params),
        "dot": lambda pair: dot(pair[0], pair[1]),
    }

    def pairs(density):
        return [(random_sparse(rng, 10_000, density), random_sparse(rng, 10_000, density)) for _ in range(50)]

    cfg = BenchConfig(repetitions=7)
    sparse = time_path(operations[operation], pairs(0.01), cfg)
    dense = time_path(operations[operation], pairs(1.0), cfg)
    assert sparse <= 0.05 * dense
