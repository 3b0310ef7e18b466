import json

import numpy as np
import pytest
from click.testing import CliRunner

from semdiv.cli import main
from semdiv.refresd import AnnotatedPair, AnnotationRecord, SentenceClass, save_refresd
from semdiv.synth import read_items_jsonl

from toycorpus import make_corpus, write_corpus_files


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    pairs, suite = make_corpus(20, rng_seed=13)
    paths = write_corpus_files(pairs, suite, tmp_path_factory.mktemp("corpus"))
    return pairs, suite, paths


def _run(args):
    runner = CliRunner()
    return runner.invoke(main, args, catch_exceptions=False)


def test_filter_command(tmp_path):
    bitext = tmp_path / "bitext.tsv"
    rows = [
        ("ok1", "alpha beta gamma delta eps", "un deux trois quatre cinq"),
        ("short", "one two", "un deux"),
        ("copy", "same same same same same", "same same same same same"),
    ]
    bitext.write_text("".join(f"{i}\t{s}\t{t}\n" for i, s, t in rows))
    out = tmp_path / "kept.tsv"
    rej = tmp_path / "rejected.tsv"
    res = _run(["filter", "--bitext", str(bitext), "--out", str(out),
                "--rejected-out", str(rej)])
    assert res.exit_code == 0
    summary = json.loads(res.output)
    assert summary == {"kept": 1, "rejected": 2}
    assert out.read_text().startswith("ok1\t")
    reasons = {line.split("\t")[0]: line.split("\t")[1]
               for line in rej.read_text().splitlines()}
    assert reasons == {"short": "length", "copy": "edit"}


def test_generate_concatenation_counts(tmp_path, corpus_files):
    pairs, _suite, paths = corpus_files
    out = tmp_path / "items.jsonl"
    res = _run([
        "generate",
        "--bitext", str(paths["bitext"]),
        "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]),
        "--lexicon", str(paths["lexicon"]),
        "--strategy", "concatenation",
        "--rng-seed", "3",
        "--out", str(out),
    ])
    assert res.exit_code == 0
    summary = json.loads(res.output)
    assert summary["seeds"] == len(pairs)
    assert summary["items"] + summary["skipped"] == 4 * len(pairs)
    items = read_items_jsonl(out)
    assert len(items) == summary["items"]


def test_generate_config_file_and_flag_override(tmp_path, corpus_files):
    _pairs, _suite, paths = corpus_files
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"strategy": "concatenation", "rng_seed": 3}))
    out1 = tmp_path / "a.jsonl"
    res1 = _run([
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]), "--lexicon", str(paths["lexicon"]),
        "--config", str(config), "--out", str(out1),
    ])
    n_concat = json.loads(res1.output)["items"]
    out2 = tmp_path / "b.jsonl"
    res2 = _run([
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]), "--lexicon", str(paths["lexicon"]),
        "--config", str(config), "--strategy", "balanced", "--out", str(out2),
    ])
    n_balanced = json.loads(res2.output)["items"]
    # the flag overrides the config file: balanced makes one item per seed
    assert n_balanced <= 20 < n_concat


def test_generate_seed_selection(tmp_path, corpus_files):
    pairs, _suite, paths = corpus_files
    rng = np.random.default_rng(0)
    scores = tmp_path / "scores.tsv"
    scores.write_text(
        "".join(f"{p.id}\t{rng.normal():.4f}\n" for p in pairs)
    )
    out = tmp_path / "train.jsonl"
    dev_out = tmp_path / "dev.jsonl"
    res = _run([
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]), "--lexicon", str(paths["lexicon"]),
        "--strategy", "divergence_ranking",
        "--scores", str(scores), "--top-k", "11", "--dev-n", "2",
        "--out", str(out), "--dev-out", str(dev_out),
    ])
    assert res.exit_code == 0
    summary = json.loads(res.output)
    assert summary["seeds"] == 9
    dev_items = read_items_jsonl(dev_out)
    assert {it.lower.seed_id for it in dev_items} <= {p.id for p in pairs}
    assert len({it.lower.seed_id for it in dev_items}) <= 2


def test_generate_rejects_mismatched_inputs(tmp_path, corpus_files):
    _pairs, _suite, paths = corpus_files
    truncated = tmp_path / "short.pharaoh"
    lines = paths["alignments"].read_text().splitlines()
    truncated.write_text("\n".join(lines[:-1]) + "\n")
    res = CliRunner().invoke(main, [
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(truncated), "--lexicon", str(paths["lexicon"]),
        "--out", str(tmp_path / "x.jsonl"),
    ])
    assert res.exit_code != 0
    assert "disagree" in res.output


@pytest.fixture(scope="module")
def trained_model(tmp_path_factory, corpus_files):
    _pairs, _suite, paths = corpus_files
    work = tmp_path_factory.mktemp("train")
    items = work / "items.jsonl"
    dev = work / "dev.jsonl"
    _run([
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]), "--lexicon", str(paths["lexicon"]),
        "--strategy", "concatenation", "--rng-seed", "1", "--out", str(items),
    ])
    _run([
        "generate", "--bitext", str(paths["bitext"]), "--conllu", str(paths["conllu"]),
        "--alignments", str(paths["alignments"]), "--lexicon", str(paths["lexicon"]),
        "--strategy", "concatenation", "--rng-seed", "2", "--out", str(dev),
    ])
    model = work / "model.json"
    log = work / "train.log"
    res = _run([
        "train", "--items", str(items), "--dev-items", str(dev),
        "--objective", "multitask", "--epochs", "1", "--out", str(model),
        "--log", str(log),
    ])
    assert res.exit_code == 0
    return model, log


def test_train_outputs(trained_model):
    model, log = trained_model
    assert model.exists()
    entries = [json.loads(l) for l in log.read_text().splitlines()]
    assert len(entries) == 1
    assert set(entries[0]) == {"epoch", "train_loss", "dev_metric", "wallclock_s"}


def test_train_ce_random(tmp_path, trained_model, corpus_files):
    _pairs, _suite, paths = corpus_files
    items = trained_model[0].parent / "items.jsonl"
    dev = trained_model[0].parent / "dev.jsonl"
    model = tmp_path / "ce.json"
    res = _run([
        "train", "--items", str(items), "--dev-items", str(dev),
        "--objective", "ce_random", "--epochs", "1", "--out", str(model),
    ])
    assert res.exit_code == 0
    assert model.exists()


def _annotated_dataset(pairs, path):
    classes = [
        SentenceClass.NO_MEANING_DIFFERENCE,
        SentenceClass.SOME_MEANING_DIFFERENCE,
        SentenceClass.UNRELATED,
    ]
    annotated = []
    for i, p in enumerate(pairs):
        cls = classes[i % 3]
        spans = ((0, 2, "Changed"),) if cls != SentenceClass.NO_MEANING_DIFFERENCE else ()
        records = tuple(
            AnnotationRecord(
                annotator_id=f"a{k}", pair_id=p.id, src_spans=spans, tgt_spans=(),
                sentence_class=cls,
            )
            for k in range(3)
        )
        annotated.append(AnnotatedPair(pair=p, records=records))
    save_refresd(annotated, path)
    return annotated


def test_evaluate_writes_report_and_figures(tmp_path, trained_model, corpus_files):
    pairs, _suite, _paths = corpus_files
    dataset = tmp_path / "dataset.jsonl"
    _annotated_dataset(pairs, dataset)
    out_dir = tmp_path / "eval"
    res = _run([
        "evaluate", "--model", str(trained_model[0]), "--dataset", str(dataset),
        "--out-dir", str(out_dir),
    ])
    assert res.exit_code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert set(report) == {"sentence", "token", "divpct"}
    assert set(report["divpct"]["thresholds"]) == {"10", "20", "30", "40"}
    csv_lines = (out_dir / "plot_data.csv").read_text().splitlines()
    assert csv_lines[0] == "pair_id,class,score,div_pct"
    assert len(csv_lines) == len(pairs) + 1
    for name in ("score_distributions.svg", "divpct_distributions.svg"):
        assert "<svg" in (out_dir / name).read_text()


def test_iaa_and_stats_commands(tmp_path, corpus_files):
    pairs, _suite, _paths = corpus_files
    dataset = tmp_path / "dataset.jsonl"
    _annotated_dataset(pairs, dataset)
    res = _run(["iaa", "--dataset", str(dataset)])
    assert res.exit_code == 0
    iaa = json.loads(res.output)
    assert iaa["krippendorff_alpha"] == 1.0
    assert iaa["n_pairs"] == len(pairs)

    res2 = _run(["stats", "--dataset", str(dataset)])
    stats = json.loads(res2.output)
    assert stats["total"] == len(pairs)
    assert stats["excluded"] == 0
    counts = stats["counts"]
    assert sum(counts.values()) == len(pairs)
