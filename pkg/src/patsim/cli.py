"""Command-line surface: ingest, index, search, classify, evaluate, sample-pairs.

Every subcommand echoes its fully resolved configuration into the report it
prints, so a run is reproducible from its own output. Reports go to stdout
(or --output); diagnostics go to stderr; the exit code is 0 only when the
report was fully produced.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .ann import AnnIndex, load_index
from .classifier import predict
from .errors import PatsimError
from .metrics import evaluate_split, sweep_k, sweep_to_csv
from .pairs import SamplingPlan, TfidfPairScorer, export_sts, label_pairs, sample_pairs
from .similarity import top_k_exact
from .store import (
    filter_by_label_support,
    ingest_jsonl,
    label_distribution,
    load_binary,
    normalize,
    save_binary,
)


def _emit(report: dict, output: str | None, fmt: str, text_renderer=None) -> None:
    if fmt == "text" and text_renderer is not None:
        payload = text_renderer(report)
    else:
        payload = json.dumps(report, indent=2) + "\n"
    if output:
        Path(output).write_text(payload, encoding="utf-8")
    else:
        click.echo(payload, nl=False)


def _positive(ctx, param, value):
    if value is not None and value < 1:
        raise click.BadParameter("must be >= 1")
    return value


def _load_query(corpus, query_id: str | None, query_vector: str | None) -> tuple[np.ndarray, str | None]:
    if (query_id is None) == (query_vector is None):
        raise click.UsageError("provide exactly one of --query-id / --query-vector")
    if query_id is not None:
        if query_id not in corpus:
            raise click.ClickException(f"unknown patent_id: {query_id}")
        return corpus.matrix64[corpus.position_of(query_id)], query_id
    try:
        vec = np.asarray(json.loads(Path(query_vector).read_text()), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot read query vector: {exc}") from exc
    return vec, None


@click.group()
@click.version_option(__version__, prog_name="patsim")
def main():
    """Patent similarity search and CPC classification over claim embeddings."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--normalize", "do_normalize", is_flag=True, help="Scale vectors to unit length.")
@click.option("--min-support", default=0, show_default=True,
              help="Drop labels carried by fewer records (350 is the conventional cutoff).")
@click.option("--expected-dim", default=None, type=int, callback=_positive)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "text"]))
def ingest(input_path, output_path, do_normalize, min_support, expected_dim, fmt):
    """Read a JSONL record file, validate it, and write a binary corpus."""
    config = {
        "subcommand": "ingest",
        "input": input_path,
        "output": output_path,
        "normalize": do_normalize,
        "min_support": min_support,
        "expected_dim": expected_dim,
        "format": fmt,
    }
    try:
        store, ingest_report = ingest_jsonl(input_path, expected_dim=expected_dim)
        filter_report = None
        if min_support > 0:
            store, filter_report = filter_by_label_support(store, min_support)
        if do_normalize:
            store = normalize(store)
        save_binary(store, output_path)
        dist = label_distribution(store)
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc

    report = {
        "config": config,
        "n_records": len(store),
        "dim": store.dim,
        "n_labels": len(store.vocabulary),
        "duplicates_dropped": ingest_report.n_duplicates_dropped,
        "duplicate_ids": list(ingest_report.duplicate_ids),
        "normalized": store.normalized,
        "label_histogram_summary": {
            "n_labels": dist.n_labels,
            "total_assignments": dist.total_assignments,
            "min_support": dist.min_support,
            "max_support": dist.max_support,
            "mean_support": dist.mean_support,
            "median_support": dist.median_support,
        },
    }
    if filter_report is not None:
        report["filter"] = filter_report.to_dict()
    _emit(report, None, fmt, _render_ingest_text)


def _render_ingest_text(report: dict) -> str:
    lines = [
        f"records:    {report['n_records']}",
        f"dim:        {report['dim']}",
        f"labels:     {report['n_labels']}",
        f"duplicates: {report['duplicates_dropped']}",
        f"normalized: {report['normalized']}",
    ]
    return "\n".join(lines) + "\n"


@main.command("build-index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--n-trees", default=16, show_default=True, callback=_positive)
@click.option("--leaf-size", default=32, show_default=True, callback=_positive)
@click.option("--seed", default=0, show_default=True)
def build_index(corpus_path, output_path, n_trees, leaf_size, seed):
    """Build a random-projection index over a normalized corpus."""
    config = {
        "subcommand": "build-index",
        "corpus": corpus_path,
        "output": output_path,
        "n_trees": n_trees,
        "leaf_size": leaf_size,
        "seed": seed,
    }
    try:
        store = load_binary(corpus_path)
        started = time.perf_counter()
        index = AnnIndex.build(store, n_trees=n_trees, leaf_size=leaf_size, seed=seed)
        elapsed = time.perf_counter() - started
        index.save(output_path)
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc
    report = {
        "config": config,
        "n_records": index.n_records,
        "dim": index.dim,
        "nodes_per_tree": [tree.n_nodes for tree in index.trees],
        "runtime_seconds": elapsed,
    }
    _emit(report, None, "json")


def _ann_options(fn):
    fn = click.option("--search-k", default=None, type=int)(fn)
    fn = click.option("--seed", default=0, show_default=True)(fn)
    fn = click.option("--leaf-size", default=32, show_default=True, callback=_positive)(fn)
    fn = click.option("--n-trees", default=16, show_default=True, callback=_positive)(fn)
    fn = click.option("--index", "index_path", default=None, type=click.Path(exists=True),
                      help="Prebuilt index file (implies --ann).")(fn)
    fn = click.option("--ann", "use_ann", is_flag=True,
                      help="Search through a random-projection index instead of exactly.")(fn)
    return fn


def _resolve_backend(store, use_ann, index_path, n_trees, leaf_size, seed):
    if index_path is not None:
        return load_index(index_path, store)
    if use_ann:
        return AnnIndex.build(store, n_trees=n_trees, leaf_size=leaf_size, seed=seed)
    return store


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--query-id", default=None)
@click.option("--query-vector", default=None, type=click.Path(exists=True),
              help="File holding a JSON array of vector components.")
@click.option("--k", default=8, show_default=True, callback=_positive)
@click.option("--metric", default="cosine", type=click.Choice(["cosine", "euclidean"]))
@click.option("--output", default=None, type=click.Path())
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "text"]))
@_ann_options
def search(corpus_path, query_id, query_vector, k, metric, output, fmt,
           use_ann, index_path, n_trees, leaf_size, seed, search_k):
    """Find the k most similar patents to a query.

    A --query-id search excludes the query patent from its own results.
    """
    config = {
        "subcommand": "search",
        "corpus": corpus_path,
        "query_id": query_id,
        "query_vector": query_vector,
        "k": k,
        "metric": metric,
        "backend": "ann" if (use_ann or index_path) else "exact",
        "n_trees": n_trees,
        "leaf_size": leaf_size,
        "seed": seed,
        "search_k": search_k,
        "format": fmt,
    }
    try:
        store = load_binary(corpus_path)
        query, resolved_id = _load_query(store, query_id, query_vector)
        backend = _resolve_backend(store, use_ann, index_path, n_trees, leaf_size, seed)
        started = time.perf_counter()
        if isinstance(backend, AnnIndex):
            if metric != "cosine":
                raise click.ClickException("the index backend supports the cosine metric only")
            neighbors = backend.query(
                query, k, search_k=search_k, exclude_id=resolved_id, query_id=resolved_id
            )
        else:
            neighbors = top_k_exact(
                store, query, k, exclude_id=resolved_id, metric=metric, query_id=resolved_id
            )
        elapsed = time.perf_counter() - started
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc

    report = {"config": config, **neighbors.to_dict(runtime_seconds=elapsed)}
    _emit(report, output, fmt, _render_search_text)


def _render_search_text(report: dict) -> str:
    lines = [f"query: {report['query_id']}  metric: {report['metric']}"]
    for i, hit in enumerate(report["results"], start=1):
        lines.append(f"{i:3d}. {hit['patent_id']:<16} {hit['score']:.2f}")
    lines.append(f"runtime: {report['runtime_seconds']:.4f}s")
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--query-id", default=None)
@click.option("--query-vector", default=None, type=click.Path(exists=True))
@click.option("--k", default=8, show_default=True, callback=_positive)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--gamma", default=8.0, show_default=True)
@click.option("--weighting", default="similarity", type=click.Choice(["similarity", "uniform"]))
@click.option("--output", default=None, type=click.Path())
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "text"]))
@_ann_options
def classify(corpus_path, query_id, query_vector, k, threshold, gamma, weighting,
             output, fmt, use_ann, index_path, n_trees, leaf_size, seed, search_k):
    """Predict CPC subclass labels for a query from its nearest patents."""
    config = {
        "subcommand": "classify",
        "corpus": corpus_path,
        "query_id": query_id,
        "query_vector": query_vector,
        "k": k,
        "threshold": threshold,
        "gamma": gamma,
        "weighting": weighting,
        "backend": "ann" if (use_ann or index_path) else "exact",
        "n_trees": n_trees,
        "leaf_size": leaf_size,
        "seed": seed,
        "search_k": search_k,
        "format": fmt,
    }
    try:
        store = load_binary(corpus_path)
        query, resolved_id = _load_query(store, query_id, query_vector)
        backend = _resolve_backend(store, use_ann, index_path, n_trees, leaf_size, seed)
        started = time.perf_counter()
        result = predict(
            backend, query, k=k, weighting=weighting, threshold=threshold, gamma=gamma,
            exclude_id=resolved_id, search_k=search_k, query_id=resolved_id,
        )
        elapsed = time.perf_counter() - started
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc
    report = {"config": config, **result.to_dict(), "runtime_seconds": elapsed}
    _emit(report, output, fmt, _render_classify_text)


def _render_classify_text(report: dict) -> str:
    lines = [f"predicted: {', '.join(report['predicted'])}"]
    for entry in report["ranking"]:
        lines.append(
            f"  {entry['label']}  vote={entry['vote_fraction']:.2f}"
            f"  calibrated={entry['calibrated']:.2f}"
        )
    lines.append("neighbors:")
    for hit in report["neighbors"]:
        lines.append(
            f"  {hit['patent_id']:<16} {hit['score']:.2f}  {', '.join(hit['labels'])}"
        )
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=8, show_default=True, callback=_positive)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--gamma", default=8.0, show_default=True)
@click.option("--weighting", default="similarity", type=click.Choice(["similarity", "uniform"]))
@click.option("--backend", default="exact", type=click.Choice(["exact", "ann"]))
@click.option("--n-trees", default=16, show_default=True, callback=_positive)
@click.option("--leaf-size", default=32, show_default=True, callback=_positive)
@click.option("--seed", default=0, show_default=True)
@click.option("--search-k", default=None, type=int)
@click.option("--output", default=None, type=click.Path())
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]))
def evaluate(train_path, test_path, k, threshold, gamma, weighting, backend,
             n_trees, leaf_size, seed, search_k, output, fmt):
    """Classify a test corpus against a train corpus and report all metrics."""
    config = {
        "subcommand": "evaluate",
        "train": train_path,
        "test": test_path,
        "k": k,
        "threshold": threshold,
        "gamma": gamma,
        "weighting": weighting,
        "backend": backend,
        "n_trees": n_trees,
        "leaf_size": leaf_size,
        "seed": seed,
        "search_k": search_k,
        "format": fmt,
    }
    try:
        train_store = load_binary(train_path)
        test_store = load_binary(test_path)
        started = time.perf_counter()
        report = evaluate_split(
            train_store, test_store, k=k, weighting=weighting, threshold=threshold,
            gamma=gamma, backend=backend, n_trees=n_trees, leaf_size=leaf_size,
            seed=seed, search_k=search_k,
        )
        elapsed = time.perf_counter() - started
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc
    if fmt == "csv":
        payload = (
            "# config: " + json.dumps(config) + "\n"
            + report.csv_header() + "\n" + report.to_csv_row() + "\n"
        )
        if output:
            Path(output).write_text(payload, encoding="utf-8")
        else:
            click.echo(payload, nl=False)
        return
    _emit({"config": config, **report.to_dict(), "runtime_seconds": elapsed}, output, fmt)


@main.command("sweep-k")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--ks", required=True, help="Comma-separated k values, e.g. 1,8,20.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--gamma", default=8.0, show_default=True)
@click.option("--weighting", default="similarity", type=click.Choice(["similarity", "uniform"]))
@click.option("--output", default=None, type=click.Path())
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "json"]))
def sweep_k_command(train_path, test_path, ks, threshold, gamma, weighting, output, fmt):
    """Evaluate a range of k values and emit one table row per k."""
    try:
        k_values = [int(part) for part in ks.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter("--ks must be comma-separated integers")
    if not k_values:
        raise click.BadParameter("--ks must name at least one k")
    config = {
        "subcommand": "sweep-k",
        "train": train_path,
        "test": test_path,
        "ks": k_values,
        "threshold": threshold,
        "gamma": gamma,
        "weighting": weighting,
        "format": fmt,
    }
    try:
        train_store = load_binary(train_path)
        test_store = load_binary(test_path)
        reports = sweep_k(
            train_store, test_store, k_values, weighting=weighting,
            threshold=threshold, gamma=gamma,
        )
    except PatsimError as exc:
        raise click.ClickException(str(exc)) from exc
    if fmt == "json":
        payload_dict = {
            "config": config,
            "reports": {str(k): r.to_dict() for k, r in reports.items()},
        }
        _emit(payload_dict, output, "json")
        return
    payload = "# config: " + json.dumps(config) + "\n" + sweep_to_csv(reports)
    if output:
        Path(output).write_text(payload, encoding="utf-8")
    else:
        click.echo(payload, nl=False)


@main.command("sample-pairs")
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True),
              help="Binary corpus; pairs are scored by embedding cosine.")
@click.option("--texts", "texts_path", default=None, type=click.Path(exists=True),
              help="Plain-text file, one sentence per line; pairs are scored lexically.")
@click.option("--target", default=3432, show_default=True, callback=_positive)
@click.option("--bins", default=5, show_default=True, callback=_positive)
@click.option("--seed", default=0, show_default=True)
@click.option("--candidate-cap", default=2_000_000, show_default=True, callback=_positive)
@click.option("--export-sts", "sts_path", default=None, type=click.Path(),
              help="Also write the sampled pairs as a silver-labeled STS file (needs --texts).")
@click.option("--output", default=None, type=click.Path())
def sample_pairs_command(corpus_path, texts_path, target, bins, seed, candidate_cap,
                         sts_path, output):
    """Draw a score-balanced pair sample for fine-tuning data generation."""
    if (corpus_path is None) == (texts_path is None):
        raise click.UsageError("provide exactly one of --corpus / --texts")
    if sts_path is not None and texts_path is None:
        raise click.UsageError("--export-sts needs --texts (sentences to write out)")
    config = {
        "subcommand": "sample-pairs",
        "corpus": corpus_path,
        "texts": texts_path,
        "target": target,
        "bins": bins,
        "seed": seed,
        "candidate_cap": candidate_cap,
        "export_sts": sts_path,
    }
    try:
        if texts_path is not None:
            texts = [
                line.rstrip("\n")
                for line in Path(texts_path).read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            data = texts
            scorer_kind = "lexical_tfidf_cosine"
        else:
            data = load_binary(corpus_path)
            texts = None
            scorer_kind = "embedding_cosine"
        plan = SamplingPlan(
            target_count=target, bins=bins, scorer=scorer_kind, seed=seed,
            candidate_cap=candidate_cap,
        )
        pairs, report = sample_pairs(data, plan)
        if sts_path is not None:
            labeled = label_pairs(pairs, TfidfPairScorer(texts))
            export_sts(labeled, texts, sts_path)
    except (PatsimError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    _emit({"config": config, **report.to_dict()}, output, "json")


if __name__ == "__main__":
    main()
