# app/cli/__init__.py

"""
Command-line interface.

Subcommands: featurize, train, predict, eval, bench, gridsearch, histogram.
Machine-readable results go to stdout as TSV, diagnostics to stderr through
logging. Every run writes its resolved configuration as JSON next to its
outputs. Exit codes: 0 success, 1 usage, 2 input/output, 3 numeric.
"""

import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click
from pydantic import ValidationError

from app.config import BenchConfig, GridConfig, RunConfig, SmoConfig, SplitConfig, KERNEL_FAMILIES
from app.evalbench import (
    GridSearchResult,
    balance_categories,
    bundle_value,
    category_histogram,
    check_category_name,
    evaluate,
    grid_search,
    load_classifier,
    ordered,
    save_classifier,
    split_three_way,
    train_one_vs_rest,
)
from app.evalbench.bench import bench_categories, run_synthetic_benchmark
from app.evalbench.reports import fscore_table, grid_table, macro_table, precision_recall_table, timing_table
from app.exceptions import EXIT_USAGE, DataFormatError, DataIOError, KernelMismatchError, NdkSvmError
from app.kernels import KernelSpec, LinearKernel, NdkKernel, PolynomialKernel, RbfKernel
from app.logger_module import StructuredLogger, setup_logging
from app.modelio import read_model_file, write_model_file
from app.svm import TrainingSet, sign_label
from app.textfeat import Featurizer, load_corpus, load_stopwords, parse_labels_file, save_vocabulary
from app.veccore.sparse_format import SparseDataset, is_binary_file, read_sparse_file, write_sparse_file

logger = logging.getLogger(__name__)
structured = StructuredLogger(logger)

PATH_CHOICES = click.Choice(["dual", "precomputed", "primal"])
ASSIGNMENT_CHOICES = click.Choice(["independent_threshold", "signed_distance_argmax_fallback"])
CATEGORY_PLACEHOLDER = "{category}"


class ExitCodeGroup(click.Group):
    """Group that turns toolkit errors into the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except ValidationError as exc:
            click.echo(f"Error: invalid parameters\n{exc}", err=True)
            sys.exit(EXIT_USAGE)
        except NdkSvmError as exc:
            structured.log_error(type(exc).__name__, str(exc))
            click.echo(f"Error: {exc}", err=True)
            sys.exit(exc.exit_code)
        sys.exit(rv if isinstance(rv, int) else 0)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _expand(template: str, category: str) -> Path:
    return Path(template.replace(CATEGORY_PLACEHOLDER, category))


def _per_category(template: str) -> bool:
    return CATEGORY_PLACEHOLDER in template


def _parse_floats(text: Optional[str], what: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers for {what}, got {text!r}") from None


def kernel_from_options(family: str, a: Optional[float], c: Optional[float], d: Optional[int],
                        gamma: Optional[float], allow_negative_c: bool) -> KernelSpec:
    """Build a KernelSpec from command-line flags, filling family defaults."""
    if family == "linear":
        return LinearKernel()
    if family in ("square", "cubic", "polynomial"):
        degree = {"square": 2, "cubic": 3}.get(family, d if d is not None else 2)
        return PolynomialKernel(a=1.0 if a is None else a, c=1.0 if c is None else c, d=degree)
    if family == "rbf":
        return RbfKernel(gamma=1.0 if gamma is None else gamma)
    if family == "ndk":
        return NdkKernel(a=1.0 if a is None else a, c=0.0 if c is None else c,
                         allow_negative_c=allow_negative_c)
    raise click.BadParameter(f"unknown kernel family {family!r}")


def _read_dataset(template: str, categories: Sequence[str]) -> Dict[str, SparseDataset]:
    """One dataset per category; a path without placeholder is shared."""
    if not _per_category(template):
        shared = read_sparse_file(template)
        return {c: shared for c in categories}
    return {c: read_sparse_file(_expand(template, c)) for c in categories}


def _categories_of(template: str, requested: Sequence[str]) -> List[str]:
    if requested:
        return [check_category_name(c) for c in requested]
    if _per_category(template):
        raise click.UsageError("--category is required when the data path contains {category}")
    found = read_sparse_file(template).categories()
    if not found:
        raise DataFormatError(f"no categories in {template}")
    return found


def _training_sets(datasets: Dict[str, SparseDataset]) -> Dict[str, TrainingSet]:
    return {c: TrainingSet.from_labelled(ds.vectors, ds.labels, c) for c, ds in datasets.items()}


def _probes(template: str, categories: Sequence[str]) -> Tuple[list, List[frozenset]]:
    """Probe list (vector or per-category mapping) and true label sets."""
    datasets = _read_dataset(template, categories)
    first = datasets[categories[0]]
    if not _per_category(template):
        return list(first.vectors), first.label_sets()
    for c, ds in datasets.items():
        if ds.labels != first.labels:
            raise DataFormatError(f"per-category files disagree on documents ({c})")
    probes = [{c: datasets[c].vectors[i] for c in categories} for i in range(len(first))]
    return probes, first.label_sets()


def _smo_config(C: float, tol: float, max_passes: int, max_iters: int, seed: int, debug: bool) -> SmoConfig:
    return SmoConfig(C=C, tol=tol, max_passes=max_passes, max_iters=max_iters, seed=seed, debug=debug)


def _emit(lines: Sequence[str]):
    click.echo("\n".join(lines))


def kernel_options(f):
    """Shared kernel flags."""
    f = click.option("--allow-negative-c", is_flag=True, help="Permit an NDK offset c < 0 (dual path only)")(f)
    f = click.option("--gamma", type=float, default=None, help="RBF width (default 1)")(f)
    f = click.option("--d", "degree", type=int, default=None, help="Polynomial degree (family 'polynomial')")(f)
    f = click.option("--c", "offset", type=float, default=None, help="Kernel offset c")(f)
    f = click.option("--a", "scale", type=float, default=None, help="Kernel scale a")(f)
    f = click.option("--kernel", "family", type=click.Choice(list(KERNEL_FAMILIES)), default="ndk",
                     show_default=True)(f)
    return f


def smo_options(f):
    """Shared SMO flags."""
    f = click.option("--debug-objective", is_flag=True, help="Check the dual objective never decreases")(f)
    f = click.option("--max-iters", type=int, default=10**6, show_default=True)(f)
    f = click.option("--max-passes", type=int, default=10, show_default=True)(f)
    f = click.option("--tol", type=float, default=1e-3, show_default=True)(f)
    f = click.option("-C", "--C", "C", type=float, default=1.0, show_default=True, help="Box constraint")(f)
    return f


# ---------------------------------------------------------------------------
# group
# ---------------------------------------------------------------------------

@click.group(cls=ExitCodeGroup)
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default="WARNING", show_default=True)
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also log to this file")
@click.option("--seed", type=int, default=0, show_default=True, help="Run-level seed")
@click.pass_context
def cli(ctx: click.Context, log_level: str, log_file: Optional[str], seed: int):
    """Power-kernel SVM toolkit."""
    setup_logging(log_level=log_level, log_file=log_file, enable_colors=False)
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(file_okay=False))
@click.option("--labels", "labels_file", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "prefix", required=True, help="Output prefix")
@click.option("--mode", type=click.Choice(["tfidf_only", "geometric_mean"]), default="tfidf_only", show_default=True)
@click.option("--stopwords", type=click.Path(dir_okay=False), default=None)
@click.option("--min-df", type=int, default=1, show_default=True)
@click.option("--none-category", default=None, help="Category for documents without labels")
@click.option("--train", "train_frac", type=float, default=0.6, show_default=True)
@click.option("--validation", "val_frac", type=float, default=0.2, show_default=True)
@click.option("--test", "test_frac", type=float, default=0.2, show_default=True)
@click.pass_context
def featurize(ctx, corpus_dir, labels_file, prefix, mode, stopwords, min_df, none_category,
              train_frac, val_frac, test_frac):
    """Turn a text corpus into train/validation/test sparse files."""
    seed = ctx.obj["seed"]
    split = SplitConfig(train=train_frac, validation=val_frac, test=test_frac, seed=seed)
    run = RunConfig(command="featurize", seed=seed, split=split, feature_mode=mode,
                    paths={"corpus": str(corpus_dir), "labels": str(labels_file), "out": prefix},
                    options={"min_df": min_df, "none_category": none_category, "stopwords": stopwords})
    structured.log_run("featurize", run.model_dump(mode="json"))

    corpus = load_corpus(corpus_dir, labels_file, none_category)
    words = load_stopwords(stopwords) if stopwords else frozenset()
    ids = [doc.doc_id for doc in corpus]
    splits = dict(zip(("train", "validation", "test"), split_three_way(ids, split)))
    featurizer = Featurizer.fit(corpus.subset(splits["train"]), mode, words, min_df)
    categories = featurizer.stats.categories()
    unseen = sorted(set(corpus.categories()) - set(categories))
    if unseen:
        logger.warning(f"Categories without training documents: {unseen}")

    save_vocabulary(featurizer.vocab, Path(f"{prefix}.vocab.tsv"))
    Path(f"{prefix}.categories.txt").write_text("\n".join(categories) + "\n", encoding="utf-8")

    rows = ["split\tcategory\tdocuments\tfile"]
    for name, doc_ids in splits.items():
        part = corpus.subset(doc_ids)
        labels = [",".join(sorted(doc.categories)) for doc in part]
        targets = [None] if mode == "tfidf_only" else categories
        for category in targets:
            target = Path(f"{prefix}.{name}.svm" if category is None else f"{prefix}.{category}.{name}.svm")
            vectors = featurizer.transform_corpus(part, category)
            write_sparse_file(target, labels, vectors, dim=featurizer.dim, label_kind="multi")
            rows.append(f"{name}\t{category or '-'}\t{len(part)}\t{target}")
    run.write(Path(f"{prefix}.run.json"))
    logger.info(f"Featurized {len(corpus)} documents into {prefix}.* (dim={featurizer.dim})")
    _emit(rows)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--train", "train_path", required=True, help="Sparse file; may contain {category}")
@click.option("--category", "categories", multiple=True, help="Category to train (repeatable)")
@click.option("--out", "out", default=None, help="Model file for a single model; may contain {category}")
@click.option("--models-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for one model per category")
@click.option("--heldout", "heldout_path", default=None, help="Held-out sparse file for bias tuning")
@click.option("--params", "params_file", type=click.Path(dir_okay=False), default=None,
              help="Best-point JSON written by gridsearch")
@kernel_options
@smo_options
@click.option("--fast/--no-fast", default=True, show_default=True,
              help="Store precomputed and primal forms with NDK models")
@click.option("--balance", is_flag=True, help="Oversample positives to a common ratio")
@click.option("--target-ratio", type=float, default=None, help="Positive ratio for --balance")
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_context
def train(ctx, train_path, categories, out, models_dir, heldout_path, params_file, family, scale, offset,
          degree, gamma, allow_negative_c, C, tol, max_passes, max_iters, debug_objective, fast, balance,
          target_ratio, workers):
    """Train SVM models with SMO."""
    seed = ctx.obj["seed"]
    if (out is None) == (models_dir is None):
        raise click.UsageError("give exactly one of --out and --models-dir")
    if workers < 1:
        raise click.BadParameter("--workers must be >= 1")

    if params_file:
        if not Path(params_file).is_file():
            raise DataIOError(f"cannot read parameter file {params_file}")
        best = GridSearchResult.model_validate_json(Path(params_file).read_text(encoding="utf-8"))
        kernel, smo = best.kernel, best.smo.model_copy(update={"seed": seed})
    else:
        kernel = kernel_from_options(family, scale, offset, degree, gamma, allow_negative_c)
        smo = _smo_config(C, tol, max_passes, max_iters, seed, debug_objective)

    data = None if _per_category(train_path) or categories else read_sparse_file(train_path)
    if data is not None and is_binary_file(data.labels, data.label_kind):
        if out is None:
            raise click.UsageError("a binary training file needs --out")
        sets = {"binary": TrainingSet.from_labelled(data.vectors, data.labels)}
        heldout = None
        if heldout_path:
            hd = read_sparse_file(heldout_path, dim=data.dim)
            heldout = {"binary": TrainingSet.from_labelled(hd.vectors, hd.labels)}
        cats = ["binary"]
    else:
        cats = _categories_of(train_path, categories)
        sets = _training_sets(_read_dataset(train_path, cats))
        heldout = _training_sets(_read_dataset(heldout_path, cats)) if heldout_path else None
    if out is not None and len(cats) != 1 and not _per_category(out):
        raise click.UsageError("--out without {category} holds a single model; use --models-dir")
    if balance:
        sets = balance_categories(sets, target_ratio, seed)

    run = RunConfig(command="train", seed=seed, kernel=kernel, smo=smo, workers=workers,
                    paths={"train": train_path, "out": out or str(models_dir), "heldout": heldout_path or ""},
                    options={"fast": fast, "balance": balance, "target_ratio": target_ratio,
                             "categories": ",".join(cats)})
    structured.log_run("train", run.model_dump(mode="json"))

    clf = train_one_vs_rest(sets, kernel, smo, workers=workers, heldout=heldout,
                            build_fast=fast, build_primal=fast)
    rows = ["category\tkernel\texamples\tsupport_vectors\tbias\tfile"]
    if models_dir is not None:
        save_classifier(clf, models_dir)
        run.write(Path(models_dir) / "run_config.json")
        targets = {c: Path(models_dir) / f"{c}.model" for c in clf.categories}
    else:
        targets = {}
        for category in clf.categories:
            bundle = clf.models[category]
            target = _expand(out, category)
            write_model_file(target, bundle.model, bundle.fast, bundle.primal)
            targets[category] = target
        run.write(Path(f"{_expand(out, cats[0] if len(cats) == 1 else 'all')}.run.json"))
    for category in clf.categories:
        model = clf.models[category].model
        rows.append(f"{category}\t{kernel.name}\t{len(sets[category])}\t{model.m}\t{model.bias:.17g}\t{targets[category]}")
    _emit(rows)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--model", "model_file", type=click.Path(dir_okay=False), default=None)
@click.option("--models-dir", type=click.Path(file_okay=False), default=None)
@click.option("--input", "input_path", required=True, help="Sparse file; may contain {category}")
@click.option("--path", "path", type=PATH_CHOICES, default="dual", show_default=True)
@click.option("--assignment", type=ASSIGNMENT_CHOICES, default="signed_distance_argmax_fallback", show_default=True)
@click.pass_context
def predict(ctx, model_file, models_dir, input_path, path, assignment):
    """Decision values and labels for every input vector."""
    if (model_file is None) == (models_dir is None):
        raise click.UsageError("give exactly one of --model and --models-dir")
    run = RunConfig(command="predict", seed=ctx.obj["seed"], path=path, assignment_mode=assignment,
                    paths={"model": model_file or str(models_dir), "input": input_path})
    structured.log_run("predict", run.model_dump(mode="json"))

    if model_file is not None:
        bundle = read_model_file(model_file)
        if path != "dual" and bundle.model.kernel.tag != "ndk":
            raise KernelMismatchError(f"--path {path} needs an NDK model, got {bundle.model.kernel.tag}")
        data = read_sparse_file(input_path, dim=bundle.model.dim)
        rows = ["index\tvalue\tlabel"]
        for i, x in enumerate(data.vectors):
            value = bundle_value(bundle, x, path)
            rows.append(f"{i}\t{value:.17g}\t{sign_label(value):+d}")
        structured.log_prediction(path, len(data))
        run.write(Path(f"{model_file}.predict.run.json"))
        _emit(rows)
        return

    clf = load_classifier(models_dir, assignment, path)
    probes, _ = _probes(input_path, clf.categories)
    rows = ["index\tassigned\t" + "\t".join(clf.categories)]
    for i, x in enumerate(probes):
        values = clf.values(x)
        assigned = clf.assign(x)
        rows.append(f"{i}\t{','.join(ordered(clf.categories, assigned)) or '-'}\t"
                    + "\t".join(f"{v:.17g}" for v in values))
    structured.log_prediction(path, len(probes) * len(clf.categories))
    run.write(Path(models_dir) / "predict.run.json")
    _emit(rows)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@cli.command(name="eval")
@click.option("--models-dir", required=True, type=click.Path(file_okay=False))
@click.option("--test", "test_path", required=True, help="Sparse file; may contain {category}")
@click.option("--path", "path", type=PATH_CHOICES, default="dual", show_default=True)
@click.option("--assignment", type=ASSIGNMENT_CHOICES, default="signed_distance_argmax_fallback", show_default=True)
@click.option("--out", "prefix", default=None, help="Write <prefix>.eval.tsv and aligned tables")
@click.option("--name", "kernel_name", default=None, help="Column name in the tables (default: kernel)")
@click.pass_context
def evaluate_cmd(ctx, models_dir, test_path, path, assignment, prefix, kernel_name):
    """Per-category and macro precision, recall and F1."""
    run = RunConfig(command="eval", seed=ctx.obj["seed"], path=path, assignment_mode=assignment,
                    paths={"models_dir": str(models_dir), "test": test_path, "out": prefix or ""})
    structured.log_run("eval", run.model_dump(mode="json"))

    clf = load_classifier(models_dir, assignment, path)
    probes, label_sets = _probes(test_path, clf.categories)
    report = evaluate(clf, probes, label_sets)

    rows = ["category\tprecision\trecall\tf1\tsupport"]
    for entry in report.per_category:
        rows.append(f"{entry.category}\t{entry.precision:.6f}\t{entry.recall:.6f}\t{entry.f1:.6f}\t{entry.support}")
    rows.append(f"macro\t{report.macro_precision:.6f}\t{report.macro_recall:.6f}\t{report.macro_f1:.6f}\t"
                f"{report.n_documents}")
    if prefix:
        name = kernel_name or clf.models[clf.categories[0]].model.kernel.name
        Path(f"{prefix}.eval.tsv").parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.eval.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        tables = [precision_recall_table({name: report}), fscore_table({name: report}), macro_table({name: report})]
        Path(f"{prefix}.eval.txt").write_text("\n".join(t.to_text() for t in tables), encoding="utf-8")
        Path(f"{prefix}.report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        run.write(Path(f"{prefix}.run.json"))
    else:
        run.write(Path(models_dir) / "eval.run.json")
    _emit(rows)


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--models-dir", type=click.Path(file_okay=False), default=None, help="NDK models")
@click.option("--probes", "probes_path", default=None, help="Sparse file; may contain {category}")
@click.option("--reference", "references", multiple=True,
              help="column=DIR with models of a reference kernel (square, cubic, rbf, linear_dual)")
@click.option("--repetitions", type=int, default=5, show_default=True)
@click.option("--warmup", type=int, default=1, show_default=True)
@click.option("--synthetic", is_flag=True, help="Benchmark random models instead of model files")
@click.option("--m", "n_sv", type=int, default=2000, show_default=True)
@click.option("--dim", type=int, default=10_000, show_default=True)
@click.option("--density", type=float, default=0.01, show_default=True)
@click.option("--n-probes", type=int, default=1000, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["tsv", "text"]), default="tsv", show_default=True)
@click.option("--out", "prefix", default=None, help="Write <prefix>.bench.tsv and <prefix>.run.json")
@click.pass_context
def bench(ctx, models_dir, probes_path, references, repetitions, warmup, synthetic, n_sv, dim, density,
          n_probes, fmt, prefix):
    """Median prediction time per path (dual, precomputed, primal) and reference kernel."""
    seed = ctx.obj["seed"]
    cfg = BenchConfig(repetitions=repetitions, warmup=warmup)
    run = RunConfig(command="bench", seed=seed, bench=cfg, workers=1,
                    paths={"models_dir": str(models_dir or ""), "probes": probes_path or "", "out": prefix or ""},
                    options={"synthetic": synthetic, "m": n_sv, "dim": dim, "density": density,
                             "n_probes": n_probes, "references": ",".join(references)})
    structured.log_run("bench", run.model_dump(mode="json"))

    if synthetic:
        rows = [run_synthetic_benchmark(n_sv, dim, density, n_probes, cfg, seed)]
    else:
        if models_dir is None or probes_path is None:
            raise click.UsageError("--models-dir and --probes are required without --synthetic")
        clf = load_classifier(models_dir)
        for category in clf.categories:
            if clf.models[category].model.kernel.tag != "ndk":
                raise click.UsageError(f"--models-dir must hold NDK models ({category} does not)")
        ref: Dict[str, Dict] = {}
        for item in references:
            column, sep, directory = item.partition("=")
            if not sep or column not in ("square", "cubic", "rbf", "linear_dual"):
                raise click.BadParameter(f"expected column=DIR, got {item!r}")
            other = load_classifier(directory)
            ref[column] = {c: other.models[c].model for c in other.categories}
        probe_list, _ = _probes(probes_path, clf.categories)
        per_cat = {c: [p[c] if isinstance(p, dict) else p for p in probe_list] for c in clf.categories}
        rows = bench_categories({c: clf.models[c].model for c in clf.categories}, per_cat, ref, cfg)

    table = timing_table(rows)
    if prefix:
        Path(f"{prefix}.bench.tsv").parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.bench.tsv").write_text(table.to_tsv(), encoding="utf-8")
        run.write(Path(f"{prefix}.run.json"))
    elif models_dir is not None:
        run.write(Path(models_dir) / "bench.run.json")
    click.echo(table.to_tsv() if fmt == "tsv" else table.to_text(), nl=False)


# ---------------------------------------------------------------------------
# gridsearch
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--train", "train_path", required=True, help="Sparse file; may contain {category}")
@click.option("--validation", "val_path", required=True, help="Sparse file; may contain {category}")
@click.option("--category", "categories", multiple=True)
@click.option("--kernel", "family", type=click.Choice(list(KERNEL_FAMILIES)), default="ndk", show_default=True)
@click.option("--C-values", "c_values", default=None, help="Comma-separated C grid")
@click.option("--gamma-values", default=None, help="Comma-separated RBF gamma grid")
@click.option("--a-values", default=None, help="Comma-separated kernel scale grid")
@click.option("--c-offsets", default=None, help="Comma-separated kernel offset grid")
@click.option("--degrees", default=None, help="Comma-separated polynomial degrees")
@smo_options
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "prefix", default=None, help="Write <prefix>.grid.tsv, <prefix>.best.json")
@click.pass_context
def gridsearch(ctx, train_path, val_path, categories, family, c_values, gamma_values, a_values, c_offsets,
               degrees, C, tol, max_passes, max_iters, debug_objective, workers, prefix):
    """Exhaustive hyperparameter search scored by validation macro F1."""
    seed = ctx.obj["seed"]
    overrides = {}
    if c_values:
        overrides["C_values"] = _parse_floats(c_values, "--C-values")
    if gamma_values:
        overrides["rbf_gamma"] = _parse_floats(gamma_values, "--gamma-values")
    if a_values:
        key = "ndk_a" if family == "ndk" else "poly_a"
        overrides[key] = _parse_floats(a_values, "--a-values")
    if c_offsets:
        key = "ndk_c" if family == "ndk" else "poly_c"
        overrides[key] = _parse_floats(c_offsets, "--c-offsets")
    if degrees:
        overrides["poly_degrees"] = [int(v) for v in _parse_floats(degrees, "--degrees")]
    grid = GridConfig(**overrides)
    smo = _smo_config(C, tol, max_passes, max_iters, seed, debug_objective)
    run = RunConfig(command="gridsearch", seed=seed, smo=smo, grid=grid, workers=workers,
                    paths={"train": train_path, "validation": val_path, "out": prefix or ""},
                    options={"family": family})
    structured.log_run("gridsearch", run.model_dump(mode="json"))

    cats = _categories_of(train_path, categories)
    result = grid_search(_training_sets(_read_dataset(train_path, cats)),
                         _training_sets(_read_dataset(val_path, cats)),
                         family, grid, smo, workers=workers)
    table = grid_table(result)
    if prefix:
        Path(f"{prefix}.grid.tsv").parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.grid.tsv").write_text(table.to_tsv(), encoding="utf-8")
        Path(f"{prefix}.best.json").write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
        run.write(Path(f"{prefix}.run.json"))
    logger.info(f"Best: {result.kernel.model_dump()} C={result.smo.C} macro F1={result.macro_f1:.4f}")
    click.echo(table.to_tsv(), nl=False)


# ---------------------------------------------------------------------------
# histogram
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--labels", "labels_file", type=click.Path(dir_okay=False), default=None,
              help="doc_id<TAB>categories file")
@click.option("--data", "data_file", type=click.Path(dir_okay=False), default=None,
              help="Multi-label sparse file")
@click.option("--out", "prefix", default=None, help="Write <prefix>.histogram.tsv")
@click.pass_context
def histogram(ctx, labels_file, data_file, prefix):
    """Documents per number of categories and per category."""
    if (labels_file is None) == (data_file is None):
        raise click.UsageError("give exactly one of --labels and --data")
    if labels_file:
        label_sets = list(parse_labels_file(labels_file).values())
    else:
        label_sets = read_sparse_file(data_file).label_sets()
    tsv = category_histogram(label_sets).to_tsv()
    if prefix:
        run = RunConfig(command="histogram", seed=ctx.obj["seed"],
                        paths={"labels": labels_file or "", "data": data_file or "", "out": prefix})
        Path(f"{prefix}.histogram.tsv").parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.histogram.tsv").write_text(tsv, encoding="utf-8")
        run.write(Path(f"{prefix}.run.json"))
    click.echo(tsv, nl=False)
