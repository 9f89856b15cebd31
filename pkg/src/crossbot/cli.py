"""Command-line orchestration of the pipeline and its experiments."""

from __future__ import annotations

import csv
import json
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import experiments, gradcheck, graph, ingest, instruction, profile, summary
from .config import TrainConfig, load_benchmark, load_train_config
from .encoding import HashingTextEncoder, encode_corpus
from .errors import CrossbotError
from .estimator import DomainInvariantClassifier
from .llm import EmbeddingClient, SummaryClient
from .metrics import metrics
from .synthetic import generate_synthetic


def log(event: str, **fields) -> None:
    sys.stderr.write(json.dumps({"event": event, **fields}, ensure_ascii=False) + "\n")


def fail(message: str) -> None:
    log("error", message=message)
    raise SystemExit(1)


def write_csv(path, rows) -> None:
    rows = list(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


@click.group()
def main():
    """Cross-domain social bot detection pipeline."""


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

@main.command("ingest")
@click.option("--registry", required=True, type=click.Path(exists=True), help="Source registry TOML.")
@click.option("--out", required=True, type=click.Path(), help="Unified corpus JSON-lines output.")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--slack", default=2, show_default=True, type=int)
@click.option("--balance/--no-balance", "do_balance", default=True, show_default=True)
def ingest_cmd(registry, out, seed, slack, do_balance):
    """Parse all registered sources, dedupe, and class-balance the training records."""
    try:
        reg = ingest.load_registry(registry)
        records = []
        for dataset_id in sorted(reg):
            schema = reg[dataset_id]
            result = ingest.parse_source(schema.path, schema)
            ingest.log_diagnostics(result, dataset_id)
            log("parsed", dataset=dataset_id, records=len(result.records), skipped=result.skipped)
            records.extend(result.records)
        records = ingest.dedupe(records)
        if do_balance:
            training = [r for r in records if r.domain_id is not None]
            holdout = [r for r in records if r.domain_id is None]
            training = ingest.balance(training, seed=seed, slack=slack)
            records = sorted(training + holdout, key=lambda r: (r.dataset_id, r.user_id))
        n = ingest.write_records(records, out)
        log("ingested", total=n, **{k: v for k, v in ingest.corpus_counts(records).items() if k != "total"})
    except CrossbotError as exc:
        fail(str(exc))


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------

@main.command("featurize")
@click.option("--corpus", required=True, type=click.Path(exists=True), help="Unified corpus JSON-lines.")
@click.option("--out", required=True, type=click.Path(), help="Feature CSV output.")
def featurize_cmd(corpus, out):
    """Render profile features for every record into a CSV."""
    try:
        records = ingest.read_records(corpus)
    except CrossbotError as exc:
        fail(str(exc))
    rows = []
    for record in records:
        rendering = profile.render_profile(record.profile)
        row = {"user_id": record.user_id}
        row.update(profile.features_to_csv_row(rendering.features))
        rows.append(row)
    write_csv(out, rows)
    log("featurized", records=len(rows), out=str(out))


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------

@main.command("summarize")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Summary sidecar JSON-lines.")
@click.option("--summarizer", type=click.Choice(["fallback", "llm"]), default="fallback", show_default=True)
@click.option("--endpoint", default="", help="Chat-completion endpoint (llm mode).")
@click.option("--model", default="", help="Model name (llm mode).")
@click.option("--audit", default="", type=click.Path(), help="Raw-response audit log (llm mode).")
def summarize_cmd(corpus, out, summarizer, endpoint, model, audit):
    """Produce the five-dimension post summary for every record with history."""
    try:
        records = ingest.read_records(corpus)
    except CrossbotError as exc:
        fail(str(exc))
    client = None
    if summarizer == "llm":
        if not endpoint or not model:
            raise click.UsageError("llm summarizer requires --endpoint and --model")
        client = SummaryClient(endpoint, model, audit_path=audit or None)

    n_written = 0
    n_skipped = 0
    try:
        with open(out, "w", encoding="utf-8") as fh:
            with_posts = [r for r in records if r.posts]
            n_skipped = len(records) - len(with_posts)
            if client is not None:
                summaries = client.summarize_many([r.posts for r in with_posts])
            else:
                summaries = [summary.fallback_summarize(r.posts) for r in with_posts]
            for record, s in zip(with_posts, summaries):
                doc = {"user_id": record.user_id}
                doc.update(s.to_dict())
                doc["sentence"] = s.sentence
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
                n_written += 1
    except CrossbotError as exc:
        fail(str(exc))
    log("summarized", written=n_written, no_history=n_skipped)


def read_summaries(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            out[doc["user_id"]] = summary.PostSummary.from_dict(doc)
    return out


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

@main.command("build")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(["metadata", "meta-summary"]), default="meta-summary", show_default=True)
@click.option("--summaries", default="", type=click.Path(), help="Summary sidecar (meta-summary variant).")
@click.option("--out", required=True, type=click.Path(), help="Instruction corpus JSON-lines.")
@click.option("--manifest", default="", type=click.Path(), help="Corpus manifest JSON.")
def build_cmd(corpus, variant, summaries, out, manifest):
    """Assemble instruction documents from records (plus summaries, if given)."""
    try:
        records = sorted(ingest.read_records(corpus), key=lambda r: (r.dataset_id, r.user_id))
    except CrossbotError as exc:
        fail(str(exc))
    by_user = {}
    if variant == "meta-summary":
        if not summaries:
            raise click.UsageError("meta-summary variant requires --summaries")
        by_user = read_summaries(summaries)

    docs = []
    truncated = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", instruction.DocumentTruncated)
        for record in records:
            rendering = profile.render_profile(record.profile)
            s = by_user.get(record.user_id) if variant == "meta-summary" else None
            docs.append(instruction.build_instruction(record, rendering, s))
        truncated = sum(1 for w in caught if issubclass(w.category, instruction.DocumentTruncated))

    n = instruction.write_corpus(docs, out)
    info = instruction.corpus_manifest(records, variant, truncated=truncated)
    if manifest:
        Path(manifest).write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    log("built", total=n, variant=variant, truncated=truncated)


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------

def _encoder_from_options(encoder, encoder_dim, endpoint, model):
    if encoder == "hashing":
        return HashingTextEncoder(n_features=encoder_dim)
    if not endpoint or not model:
        raise click.UsageError("external encoder requires --endpoint and --model")
    client = EmbeddingClient(endpoint, model)

    class _ExternalEncoder:
        def transform(self, docs):
            return np.stack([client.encode(instruction.doc_text(d)) for d in docs])

    return _ExternalEncoder()


@main.command("train")
@click.option("--corpus", required=True, type=click.Path(exists=True), help="Instruction corpus JSON-lines.")
@click.option("--out", required=True, type=click.Path(), help="Checkpoint output path.")
@click.option("--history", default="", type=click.Path(), help="Training history CSV.")
@click.option("--config", "config_path", default="", type=click.Path(), help="TOML config with a [train] table.")
@click.option("--seed", default=None, type=int, help="Override the training seed.")
@click.option("--encoder", type=click.Choice(["hashing", "external"]), default="hashing", show_default=True)
@click.option("--endpoint", default="", help="Embedding endpoint (external encoder).")
@click.option("--model", default="", help="Embedding model name (external encoder).")
def train_cmd(corpus, out, history, config_path, seed, encoder, endpoint, model):
    """Train the domain-invariant classifier on an instruction corpus."""
    try:
        cfg = load_train_config(config_path or None)
        docs = instruction.read_corpus(corpus)
        enc = _encoder_from_options(encoder, cfg.encoder_dim, endpoint, model)
        X, y, domains = encode_corpus(docs, enc) if encoder == "hashing" else (
            enc.transform(docs),
            np.array([d.label for d in docs]),
            np.array([-1 if d.domain_id is None else d.domain_id for d in docs]),
        )
        clf = DomainInvariantClassifier(**cfg.estimator_kwargs(seed))
        clf.fit(X, y, domains=domains)
        clf.save(out)
        if history:
            write_csv(history, clf.history_)
        log("trained", out=str(out), best_epoch=clf.best_epoch_, val_acc=clf.history_[clf.best_epoch_]["val_acc"])
    except (CrossbotError, ValueError) as exc:
        fail(str(exc))


@main.command("eval")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="EvalReport CSV.")
@click.option("--encoder", type=click.Choice(["hashing", "external"]), default="hashing", show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", default="")
def eval_cmd(corpus, checkpoint, out, encoder, endpoint, model):
    """Score a labeled instruction corpus against a checkpoint."""
    try:
        clf = DomainInvariantClassifier.load(checkpoint)
        docs = instruction.read_corpus(corpus)
        enc = _encoder_from_options(encoder, clf.state_.input_dim, endpoint, model)
        X = enc.transform(docs)
        y = np.array([d.label for d in docs])
        report = metrics(y, clf.predict(X), seed=clf.seed)
        write_csv(out, [report.flat_row()])
        log("evaluated", accuracy=report.accuracy, macro_f1=report.macro_f1, n=report.n)
    except (CrossbotError, ValueError) as exc:
        fail(str(exc))


# ---------------------------------------------------------------------------
# benchmark experiments
# ---------------------------------------------------------------------------

def _benchmark(bench_path):
    spec, cfg = load_benchmark(bench_path or None)
    return generate_synthetic(spec), spec, cfg


def _base_kwargs(cfg: TrainConfig) -> dict:
    kwargs = cfg.estimator_kwargs()
    kwargs.pop("seed")
    return kwargs


@main.command("ablate")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--benchmark", "bench_path", default="", type=click.Path(), help="Benchmark TOML (default: shipped).")
@click.option("--seeds", default="", help="Comma-separated seed override.")
def ablate_cmd(out, bench_path, seeds):
    """Run the four-config ablation on the synthetic benchmark."""
    corpus, spec, cfg = _benchmark(bench_path)
    seed_list = tuple(int(s) for s in seeds.split(",")) if seeds else cfg.seeds
    rows = experiments.ablation_run(
        corpus, seed_list, validation_mode=cfg.validation_mode, **_base_kwargs(cfg)
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "ablation.csv", [r.flat_row() for r in rows])
    manifest = experiments.run_manifest(
        {"benchmark": spec.to_dict(), "train": cfg.to_dict()},
        seed_list,
        experiments.data_digest(corpus.x_source, corpus.x_target),
    )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for row in rows:
        log("ablation", config=row.name, mean_accuracy=row.mean_accuracy, std=row.std_accuracy)


@main.command("sweep")
@click.option("--which", type=click.Choice(["lambda_adv", "lambda_con"]), required=True)
@click.option("--values", required=True, help="Comma-separated weight values.")
@click.option("--fixed", default=0.2, show_default=True, type=float, help="Pinned value of the other weight.")
@click.option("--out", required=True, type=click.Path())
@click.option("--benchmark", "bench_path", default="", type=click.Path())
@click.option("--seeds", default="", help="Comma-separated seed override.")
def sweep_cmd(which, values, fixed, out, bench_path, seeds):
    """Sweep one loss weight with the other pinned."""
    corpus, spec, cfg = _benchmark(bench_path)
    seed_list = tuple(int(s) for s in seeds.split(",")) if seeds else cfg.seeds
    value_list = [float(v) for v in values.split(",")]
    base = _base_kwargs(cfg)
    base.pop("lambda_adv", None)
    base.pop("lambda_con", None)
    rows = experiments.sweep(
        corpus, which, value_list, seed_list, fixed=fixed,
        validation_mode=cfg.validation_mode, **base,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / f"sweep_{which}.csv", [r.flat_row() for r in rows])
    log("sweep", which=which, points=len(rows))


@main.command("probe")
@click.option("--out", required=True, type=click.Path())
@click.option("--benchmark", "bench_path", default="", type=click.Path())
@click.option("--checkpoint", default="", type=click.Path(), help="Probe a real corpus instead of the benchmark.")
@click.option("--corpus", "corpus_path", default="", type=click.Path(), help="Instruction corpus (with --checkpoint).")
@click.option("--seeds", default="", help="Comma-separated seed override.")
def probe_cmd(out, bench_path, checkpoint, corpus_path, seeds):
    """Linear domain-probe accuracy on latent representations."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if checkpoint:
            if not corpus_path:
                raise click.UsageError("--checkpoint requires --corpus")
            clf = DomainInvariantClassifier.load(checkpoint)
            docs = instruction.read_corpus(corpus_path)
            enc = HashingTextEncoder(n_features=clf.state_.input_dim)
            X, _, domains = encode_corpus(docs, enc)
            keep = domains >= 0
            acc = experiments.domain_probe(clf.transform(X[keep]), domains[keep], seed=clf.seed)
            result = {"probe_accuracy": acc, "n": int(keep.sum())}
        else:
            corpus, spec, cfg = _benchmark(bench_path)
            seed_list = tuple(int(s) for s in seeds.split(",")) if seeds else cfg.seeds
            result = experiments.probe_gap(
                corpus, seed_list, validation_mode=cfg.validation_mode, **_base_kwargs(cfg)
            )
        (out_dir / "probe.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        log("probe", **{k: v for k, v in result.items() if not isinstance(v, list)})
    except (CrossbotError, ValueError) as exc:
        fail(str(exc))


@main.command("report")
@click.option("--summaries", required=True, type=click.Path(exists=True))
@click.option("--corpus", required=True, type=click.Path(exists=True), help="Unified record corpus (labels, datasets).")
@click.option("--out", required=True, type=click.Path(), help="Distribution report CSV.")
def report_cmd(summaries, corpus, out):
    """Per-dataset distribution tables of the summary dimensions."""
    try:
        records = {r.user_id: r for r in ingest.read_records(corpus)}
        entries = []
        for user_id, s in read_summaries(summaries).items():
            record = records.get(user_id)
            if record is None:
                continue
            entries.append((s, instruction.LABEL_NAMES[record.label], record.dataset_id))
        rows = experiments.distribution_report(entries)
        write_csv(out, rows)
        log("report", rows=len(rows), users=len(entries))
    except CrossbotError as exc:
        fail(str(exc))


@main.command("gradcheck")
@click.option("--batches", default=20, show_default=True, type=int)
@click.option("--seed", default=1000, show_default=True, type=int)
def gradcheck_cmd(batches, seed):
    """Verify every analytic gradient against central finite differences."""
    results = gradcheck.run_suite(n_batches=batches, base_seed=seed)
    worst = {}
    for r in results:
        key = (r.loss, r.group)
        worst[key] = max(worst.get(key, 0.0), r.rel_error)
    ok = True
    for (loss_name, group), err in sorted(worst.items()):
        status = "ok" if err < gradcheck.TOLERANCE else "FAIL"
        ok &= err < gradcheck.TOLERANCE
        click.echo(f"{status:4s} {loss_name:12s} {group:12s} max_rel_err={err:.3e}")
    if not ok:
        raise SystemExit(1)
    log("gradcheck", checks=len(results), ok=True)


# ---------------------------------------------------------------------------
# graph stage
# ---------------------------------------------------------------------------

def _graph_inputs(checkpoint, corpus_path, edges_path, add_reverse):
    clf = DomainInvariantClassifier.load(checkpoint)
    docs = instruction.read_corpus(corpus_path)
    enc = HashingTextEncoder(n_features=clf.state_.input_dim)
    X, y, _ = encode_corpus(docs, enc)
    latents = clf.transform(X)
    node_ids = [d.user_id for d in docs]
    triples = graph.read_edge_csv(edges_path)
    g = graph.build_graph(node_ids, latents, triples, add_reverse=add_reverse)
    return g, y


@main.command("graph-train")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Graph-head checkpoint.")
@click.option("--layers", default=2, show_default=True, type=int)
@click.option("--agg", type=click.Choice(["mean", "sum"]), default="mean", show_default=True)
@click.option("--add-reverse/--no-add-reverse", default=False, show_default=True)
@click.option("--epochs", default=100, show_default=True, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
def graph_train_cmd(checkpoint, corpus_path, edges_path, out, layers, agg, add_reverse, epochs, seed):
    """Train the relation-aware graph head on frozen latents."""
    try:
        g, y = _graph_inputs(checkpoint, corpus_path, edges_path, add_reverse)
        gnn = graph.RelationGraphClassifier(n_layers=layers, agg=agg, epochs=epochs, seed=seed)
        gnn.fit(g, y)
        from .checkpoint import save_arrays

        save_arrays(
            out,
            gnn.params_,
            {
                "kind": "graph-classifier",
                "config": gnn.get_params(),
                "relations": list(g.relation_types),
                "add_reverse": add_reverse,
            },
        )
        log("graph-trained", nodes=g.n_nodes, edges=len(g.edges), dropped=g.dropped_edges, loss=gnn.history_[-1])
    except (CrossbotError, ValueError) as exc:
        fail(str(exc))


@main.command("graph-eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--gnn", "gnn_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def graph_eval_cmd(checkpoint, gnn_path, corpus_path, edges_path, out):
    """Score the graph head on a labeled corpus plus edge list."""
    try:
        from .checkpoint import load_arrays

        params, meta = load_arrays(gnn_path)
        g, y = _graph_inputs(checkpoint, corpus_path, edges_path, meta.get("add_reverse", False))
        cfg = meta["config"]
        Z, _ = graph.message_pass(g, params, n_layers=cfg["n_layers"], agg=cfg["agg"])
        pred = graph.graph_classify(Z, params).argmax(axis=1)
        report = metrics(y, pred)
        write_csv(out, [report.flat_row()])
        log("graph-evaluated", accuracy=report.accuracy, macro_f1=report.macro_f1)
    except (CrossbotError, ValueError, KeyError) as exc:
        fail(str(exc))


if __name__ == "__main__":
    main()
