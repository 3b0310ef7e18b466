"""Command-line entry points for the full pipeline: corpus filtering, synthetic
generation, training, evaluation with rendered figures, agreement reporting,
dataset statistics, and the annotation service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_io
from . import evaluation, plots, refresd
from .scorer import Objective, ScorerParams, TrainConfig, calibrate_bias, train
from .service import AnnotationStore, create_app, plan_sessions
from .synth import (
    DivergenceType,
    GeneratorSuite,
    LexicalResource,
    PosNgramIndex,
    SamplingStrategy,
    UnigramScorer,
    build_contrastive_set,
    read_items_jsonl,
    write_items_jsonl,
)


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _cfg(config, key, flag_value, default=None):
    # explicit flags win over the config file, which wins over defaults
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


@click.group()
def main():
    """Cross-lingual semantic divergence toolkit."""


@main.command("filter")
@click.option("--bitext", required=True, type=click.Path(exists=True),
              help="TSV bitext: id\\tsrc\\ttgt")
@click.option("--out", required=True, type=click.Path(), help="kept pairs TSV")
@click.option("--rejected-out", type=click.Path(), help="rejected pairs TSV with reasons")
@click.option("--min-tokens", default=5, show_default=True)
@click.option("--max-tokens", default=80, show_default=True)
@click.option("--max-numeric-ratio", default=0.5, show_default=True)
@click.option("--min-edit-ratio", default=0.15, show_default=True)
def filter_cmd(bitext, out, rejected_out, min_tokens, max_tokens,
               max_numeric_ratio, min_edit_ratio):
    """Apply curation filters to a parallel corpus."""
    pairs = corpus_io.load_bitext_tsv(bitext)
    cfg = corpus_io.FilterConfig(
        min_tokens=min_tokens,
        max_tokens=max_tokens,
        max_numeric_ratio=max_numeric_ratio,
        min_edit_ratio=min_edit_ratio,
    )
    kept, rejected = corpus_io.filter_corpus(pairs, cfg)
    with open(out, "w", encoding="utf-8") as f:
        for p in kept:
            f.write(f"{p.id}\t{p.src_raw}\t{p.tgt_raw}\n")
    if rejected_out:
        with open(rejected_out, "w", encoding="utf-8") as f:
            for p, reason in rejected:
                f.write(f"{p.id}\t{reason}\t{p.src_raw}\t{p.tgt_raw}\n")
    click.echo(json.dumps({"kept": len(kept), "rejected": len(rejected)}))


@main.command("generate")
@click.option("--bitext", required=True, type=click.Path(exists=True))
@click.option("--conllu", required=True, type=click.Path(exists=True),
              help="CoNLL-U parses of the source side, same order as the bitext")
@click.option("--alignments", required=True, type=click.Path(exists=True),
              help="Pharaoh alignment file, one line per pair")
@click.option("--lexicon", required=True, type=click.Path(exists=True),
              help="lexical resource TSV: lemma\\tpos\\thyper|hypo\\tcandidate")
@click.option("--strategy", type=click.Choice([s.value for s in SamplingStrategy]),
              default=None)
@click.option("--single-type", type=click.Choice([t.value for t in DivergenceType]),
              default=None)
@click.option("--scores", type=click.Path(exists=True),
              help="similarity score TSV for seed selection")
@click.option("--top-k", type=int, default=None, help="seed pool size (needs --scores)")
@click.option("--dev-n", type=int, default=None, help="dev split size (needs --scores)")
@click.option("--seeds", type=int, default=None, help="cap on the number of seeds used")
@click.option("--rng-seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--dev-out", type=click.Path(), help="where to write dev items (needs --scores)")
@click.option("--config", type=click.Path(exists=True), help="JSON config file")
def generate_cmd(bitext, conllu, alignments, lexicon, strategy, single_type,
                 scores, top_k, dev_n, seeds, rng_seed, out, dev_out, config):
    """Generate contrastive training items from seed equivalents."""
    cfg = _load_config(config)
    strategy = SamplingStrategy(_cfg(cfg, "strategy", strategy, "divergence_ranking"))
    rng_seed = int(_cfg(cfg, "rng_seed", rng_seed, 0))
    single = _cfg(cfg, "single_type", single_type)
    single = DivergenceType(single) if single else None

    pairs = corpus_io.load_bitext_tsv(bitext)
    with open(conllu, encoding="utf-8") as f:
        parsed = corpus_io.parse_conllu(f.read())
    with open(alignments, encoding="utf-8") as f:
        align_lines = f.read().splitlines()
    if len(parsed) != len(pairs) or len(align_lines) != len(pairs):
        raise click.ClickException(
            f"input sizes disagree: {len(pairs)} pairs, {len(parsed)} parses, "
            f"{len(align_lines)} alignment lines"
        )
    trees, aligns, src_upos = {}, {}, {}
    for pair, (tokens, tree), line in zip(pairs, parsed, align_lines):
        if tuple(tokens) != pair.src_tokens:
            raise click.ClickException(
                f"CoNLL-U tokens disagree with bitext for pair {pair.id}"
            )
        trees[pair.id] = tree
        aligns[pair.id] = corpus_io.validate_alignment(
            corpus_io.parse_pharaoh(line), pair
        )
        src_upos[pair.id] = tree.upos

    dev_pairs = []
    if scores:
        sims = corpus_io.load_scores_tsv(scores)
        k = int(_cfg(cfg, "top_k", top_k, min(5500, len(pairs))))
        dn = int(_cfg(cfg, "dev_n", dev_n, max(1, k // 11)))
        train_pairs, dev_pairs = corpus_io.select_seed(pairs, sims, k, dn, split_seed=rng_seed)
    else:
        train_pairs = pairs
    if seeds is not None:
        train_pairs = train_pairs[:seeds]

    donor_pool = PosNgramIndex.from_sentences(
        (p.id, p.src_tokens, src_upos[p.id]) for p in pairs
    )
    resource = LexicalResource.from_tsv(lexicon)
    unigram = UnigramScorer(t for p in pairs for t in p.src_tokens)
    suite = GeneratorSuite(
        trees=trees, alignments=aligns, src_upos=src_upos, tgt_upos={},
        donor_pool=donor_pool, resource=resource, scorer=unigram,
    )
    skip_log = []
    items = build_contrastive_set(
        train_pairs, strategy, suite, rng_seed=rng_seed,
        single_type=single, skip_log=skip_log,
    )
    write_items_jsonl(items, out)
    summary = {"items": len(items), "seeds": len(train_pairs), "skipped": len(skip_log)}
    if dev_pairs and dev_out:
        dev_items = build_contrastive_set(
            dev_pairs, strategy, suite, rng_seed=rng_seed, single_type=single
        )
        write_items_jsonl(dev_items, dev_out)
        summary["dev_items"] = len(dev_items)
    click.echo(json.dumps(summary))


@main.command("train")
@click.option("--items", required=True, type=click.Path(exists=True),
              help="contrastive items JSONL")
@click.option("--dev-items", required=True, type=click.Path(exists=True))
@click.option("--objective", type=click.Choice([o.value for o in Objective]), default=None)
@click.option("--margin", type=float, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--rng-seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(), help="model checkpoint path")
@click.option("--log", type=click.Path(), help="per-epoch training log JSONL")
@click.option("--config", type=click.Path(exists=True), help="JSON config file")
def train_cmd(items, dev_items, objective, margin, lr, epochs, batch_size,
              rng_seed, out, log, config):
    """Train the divergence scorer on contrastive items."""
    cfg_file = _load_config(config)
    objective = Objective(_cfg(cfg_file, "objective", objective, "multitask"))
    cfg = TrainConfig(
        margin=float(_cfg(cfg_file, "margin", margin, 5.0)),
        learning_rate=float(_cfg(cfg_file, "learning_rate", lr, 1e-3)),
        max_epochs=int(_cfg(cfg_file, "max_epochs", epochs, 5)),
        batch_size=int(
            _cfg(cfg_file, "batch_size", batch_size,
                 32 if objective == Objective.CE_RANDOM else 16)
        ),
        objective=objective,
        rng_seed=int(_cfg(cfg_file, "rng_seed", rng_seed, 0)),
    )
    train_items = read_items_jsonl(items)
    dev = read_items_jsonl(dev_items)
    if objective == Objective.CE_RANDOM:
        from .corpus import SentencePair

        def labeled(items_):
            out_ = []
            for it in items_:
                if isinstance(it.higher, SentencePair):
                    out_.append((it.higher, True))
                out_.append((it.lower_pair, False))
            return out_

        dataset, dev_set = labeled(train_items), labeled(dev)
    else:
        dataset, dev_set = train_items, dev
    params, history = train(dataset, dev_set, cfg, log_path=log)
    if objective in (Objective.MARGIN, Objective.MULTITASK):
        from .corpus import SentencePair

        labeled_dev = [
            (it.higher_pair, isinstance(it.higher, SentencePair)) for it in dev
        ] + [(it.lower_pair, False) for it in dev]
        params = calibrate_bias(params, labeled_dev)
    params.save(out)
    click.echo(json.dumps({"epochs": len(history),
                           "best_dev_metric": max(h["dev_metric"] for h in history)}))


@main.command("evaluate")
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True),
              help="annotated dataset JSONL")
@click.option("--out-dir", required=True, type=click.Path())
def evaluate_cmd(model, dataset, out_dir):
    """Evaluate a trained model on an annotated dataset; writes the JSON report,
    the plot-data CSV, and SVG figures."""
    params = ScorerParams.load(model)
    data = refresd.load_refresd(dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, predictions = evaluation.evaluate_dataset(params, data)
    with open(out / "report.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    csv_path = out / "plot_data.csv"
    evaluation.write_plot_data_csv(data, predictions, csv_path)
    plot_data = plots.read_plot_data_csv(csv_path)
    plots.render_score_histograms(plot_data, out / "score_distributions.svg")
    plots.render_divpct_distributions(plot_data, out / "divpct_distributions.svg")
    click.echo(json.dumps({"report": str(out / "report.json"),
                           "weighted_f1": report["sentence"]["weighted"]["f1"]}))


@main.command("iaa")
@click.option("--dataset", required=True, type=click.Path(exists=True))
def iaa_cmd(dataset):
    """Inter-annotator agreement summary for an annotated dataset."""
    data = refresd.load_refresd(dataset)
    click.echo(json.dumps(evaluation.iaa_summary(data), indent=2))


@main.command("stats")
@click.option("--dataset", required=True, type=click.Path(exists=True))
def stats_cmd(dataset):
    """Adjudicated class counts and headline percentages."""
    data = refresd.load_refresd(dataset)
    click.echo(json.dumps(refresd.dataset_stats(data), indent=2))


@main.command("serve")
@click.option("--bitext", required=True, type=click.Path(exists=True),
              help="pairs to annotate (TSV)")
@click.option("--annotators", required=True,
              help="comma-separated annotator ids (>= 3)")
@click.option("--journal", required=True, type=click.Path(),
              help="append-only annotation journal (JSONL)")
@click.option("--dataset", type=click.Path(exists=True),
              help="preloaded annotated dataset for /api/iaa and /api/dataset/stats")
@click.option("--session-size", default=120, show_default=True)
@click.option("--duplicates-per-session", default=0, show_default=True)
@click.option("--session-seed", default=0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_cmd(bitext, annotators, journal, dataset, session_size,
              duplicates_per_session, session_seed, host, port):
    """Run the annotation HTTP service."""
    import uvicorn

    pairs = corpus_io.load_bitext_tsv(bitext)
    sessions = plan_sessions(
        pairs,
        [a.strip() for a in annotators.split(",") if a.strip()],
        session_size=session_size,
        duplicates_per_session=duplicates_per_session,
        seed=session_seed,
    )
    preloaded = refresd.load_refresd(dataset) if dataset else None
    app = create_app(pairs, sessions, store=AnnotationStore(journal),
                     preloaded_dataset=preloaded)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
