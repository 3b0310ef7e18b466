"""Dataset-level evaluation: runs the scorer over an annotated dataset and
assembles sentence-level, token-level, and DIV%-threshold reports plus the
plot-data tables behind the rendered figures."""

from __future__ import annotations

import csv

from . import metrics
from .metrics import AggregationMode
from .refresd import SentenceClass, adjudicate
from .scorer import predict
from .synth import DIV, EQ

__all__ = [
    "iaa_summary",
    "sentence_report",
    "token_report",
    "divpct_report",
    "evaluate_dataset",
    "write_plot_data_csv",
]

DIVPCT_THRESHOLDS = (10, 20, 30, 40)


def _iaa_items(pairs):
    return [
        {
            "token_counts": (len(p.pair.src_tokens), len(p.pair.tgt_tokens)),
            "annotations": [
                {"src": r.src_spans, "tgt": r.tgt_spans} for r in p.records
            ],
        }
        for p in pairs
    ]


def iaa_summary(pairs):
    """Krippendorff's alpha on sentence classes plus span- and token-level
    pairwise macro-F1 agreement."""
    ratings = {}
    for p in pairs:
        for r in p.records:
            ratings.setdefault(r.annotator_id, {})[p.pair.id] = r.sentence_class.value
    alpha = metrics.krippendorff_alpha(list(ratings.values()))
    items = _iaa_items(pairs)
    span_mean, span_std = metrics.pairwise_iaa(items, level="span")
    token_mean, token_std = metrics.pairwise_iaa(items, level="token")
    return {
        "krippendorff_alpha": alpha,
        "span_macro_f1": {"mean": span_mean, "stdev": span_std},
        "token_macro_f1": {"mean": token_mean, "stdev": token_std},
        "n_pairs": len(pairs),
    }


def _gold_binary(pair):
    return (
        "Equivalent"
        if pair.adjudicated == SentenceClass.NO_MEANING_DIFFERENCE
        else "Divergent"
    )


def sentence_report(dataset, predictions):
    """Binary equivalent-vs-divergent report over adjudicated pairs.

    `predictions` maps pair_id -> Prediction (or a sentence label string).
    """
    kept, _ = adjudicate(dataset)
    gold, pred = [], []
    for p in kept:
        y = predictions[p.pair.id]
        label = y if isinstance(y, str) else y.sentence_label
        gold.append(_gold_binary(p))
        pred.append(label)
    return metrics.classification_report(gold, pred).to_dict()


def _gold_tokens(pair, mode):
    src = metrics.aggregate_rationales(
        [r.src_spans for r in pair.records], len(pair.pair.src_tokens), mode
    )
    tgt = metrics.aggregate_rationales(
        [r.tgt_spans for r in pair.records], len(pair.pair.tgt_tokens), mode
    )
    return src + tgt


def token_report(dataset, predictions, sentence_class=SentenceClass.SOME_MEANING_DIFFERENCE):
    """Token-level F1/F1-Mul under the three aggregation policies, computed over
    pairs of the given adjudicated class (the fine-grained class by default)."""
    kept, _ = adjudicate(dataset)
    selected = [p for p in kept if p.adjudicated == sentence_class]
    out = {}
    for mode in AggregationMode:
        gold_all, pred_all = [], []
        for p in selected:
            gold_all.extend(_gold_tokens(p, mode))
            y = predictions[p.pair.id]
            pred_all.extend(y.src_token_labels + y.tgt_token_labels)
        out[mode.value] = (
            metrics.token_f1(gold_all, pred_all) if gold_all else None
        )
    out["n_pairs"] = len(selected)
    return out


def divpct_report(dataset, predictions, thresholds=DIVPCT_THRESHOLDS):
    """SomeMeaningDifference-vs-Unrelated classification from predicted DIV%
    across a threshold sweep."""
    kept, _ = adjudicate(dataset)
    divergent = [
        p
        for p in kept
        if p.adjudicated
        in (SentenceClass.SOME_MEANING_DIFFERENCE, SentenceClass.UNRELATED)
    ]
    rows = {}
    for thr in thresholds:
        gold, pred = [], []
        for p in divergent:
            y = predictions[p.pair.id]
            gold.append(p.adjudicated.value)
            pred.append(
                metrics.divpct_classify(y.src_token_labels, y.tgt_token_labels, thr)
            )
        rows[str(thr)] = (
            metrics.classification_report(gold, pred).to_dict() if gold else None
        )
    return {"thresholds": rows, "n_pairs": len(divergent)}


def evaluate_dataset(params, dataset, threshold=0.5):
    """Run the scorer over every pair and assemble the full report."""
    predictions = {
        p.pair.id: predict(params, p.pair, threshold=threshold) for p in dataset
    }
    report = {
        "sentence": sentence_report(dataset, predictions),
        "token": token_report(dataset, predictions),
        "divpct": divpct_report(dataset, predictions),
    }
    return report, predictions


def write_plot_data_csv(dataset, predictions, path):
    """Per-pair plot data: model score and DIV% by adjudicated class."""
    kept, _ = adjudicate(dataset)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["pair_id", "class", "score", "div_pct"])
        for p in kept:
            y = predictions[p.pair.id]
            pct = metrics.divpct(y.src_token_labels, y.tgt_token_labels)
            writer.writerow(
                [p.pair.id, p.adjudicated.value, f"{y.score:.6f}", f"{pct:.4f}"]
            )
