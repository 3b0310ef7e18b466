"""Evaluation machinery: per-class and weighted P/R/F1, token F1 / F1-Mul under
rationale aggregation policies, IoU-thresholded span macro-F1, pairwise
inter-annotator agreement, Krippendorff's alpha, and threshold classifiers."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .synth import DIV, EQ

__all__ = [
    "AggregationMode",
    "ClassificationReport",
    "classification_report",
    "token_f1",
    "aggregate_rationales",
    "span_macro_f1",
    "span_iou",
    "pairwise_iaa",
    "krippendorff_alpha",
    "divpct",
    "divpct_classify",
    "score_threshold_classify",
    "LASER_DEFAULT_CUTOFF",
]

LASER_DEFAULT_CUTOFF = 1.04


class AggregationMode(str, Enum):
    UNION = "union"  # highlighted by >= 1 annotator
    PAIRWISE_UNION = "pairwise_union"  # >= 2 annotators
    INTERSECTION = "intersection"  # all 3

    @property
    def min_votes(self):
        return {"union": 1, "pairwise_union": 2, "intersection": 3}[self.value]


@dataclass
class ClassReport:
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False


@dataclass
class ClassificationReport:
    per_class: dict  # label -> ClassReport
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    def to_dict(self):
        return {
            "per_class": {
                c: {
                    "precision": r.precision,
                    "recall": r.recall,
                    "f1": r.f1,
                    "support": r.support,
                }
                for c, r in self.per_class.items()
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
        }


def classification_report(gold, pred):
    """Per-class precision/recall/F1 plus support-weighted aggregates.

    Zero-division cases yield 0 with the report's zero_division flag set.
    """
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    if not gold:
        raise ValueError("need at least one example")
    labels = sorted(set(gold) | set(pred))
    per_class = {}
    n = len(gold)
    wp = wr = wf = 0.0
    for c in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        support = tp + fn
        zero = False
        if tp + fp == 0:
            precision, zero = 0.0, True
        else:
            precision = tp / (tp + fp)
        if support == 0:
            recall, zero = 0.0, True
        else:
            recall = tp / support
        if precision + recall == 0:
            f1, zero = 0.0, True
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[c] = ClassReport(precision, recall, f1, support, zero)
        wp += precision * support / n
        wr += recall * support / n
        wf += f1 * support / n
    return ClassificationReport(
        per_class=per_class,
        weighted_precision=wp,
        weighted_recall=wr,
        weighted_f1=wf,
    )


def token_f1(gold_labels, pred_labels):
    """Class-wise token F1 and their product F1-Mul over aligned EQ/DIV labels."""
    gold, pred = list(gold_labels), list(pred_labels)
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    out = {}
    for cls in (EQ, DIV):
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        denom = 2 * tp + fp + fn
        out[f"F1_{cls}"] = 2 * tp / denom if denom else 0.0
    out["F1_Mul"] = out["F1_EQ"] * out["F1_DIV"]
    return out


# ---------------------------------------------------------------------------
# Rationales

# A span set is represented per side as a list of (start, end, label) half-open
# token intervals; label is one of "Added"/"Changed"/"Other" and is ignored by
# token-level aggregation.


def _validate_spans(spans, token_count, who=""):
    for span in spans:
        start, end = span[0], span[1]
        if not (0 <= start < end <= token_count):
            raise ValueError(
                f"span ({start},{end}) out of bounds for {token_count} tokens {who}"
            )


def _coverage(spans, token_count):
    covered = np.zeros(token_count, dtype=bool)
    for span in spans:
        covered[span[0] : span[1]] = True
    return covered


def aggregate_rationales(annotations, token_count, mode):
    """Token-level gold from three annotators' span sets over one side.

    `annotations` is a list of three span lists; a token is DIV iff covered by
    at least mode.min_votes annotators.
    """
    mode = AggregationMode(mode)
    if len(annotations) != 3:
        raise ValueError(f"expected 3 annotators, got {len(annotations)}")
    votes = np.zeros(token_count, dtype=int)
    for i, spans in enumerate(annotations):
        _validate_spans(spans, token_count, who=f"(annotator {i})")
        votes += _coverage(spans, token_count)
    return tuple(DIV if v >= mode.min_votes else EQ for v in votes)


def span_iou(a, b):
    """Token-level intersection-over-union of two half-open spans."""
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union else 0.0


def span_macro_f1(reference, predicted, iou_threshold=0.5):
    """F1 of span matching: a predicted span matches a reference span when
    their IoU strictly exceeds the threshold; each reference span is consumed
    at most once, greedily by descending IoU."""
    if not reference and not predicted:
        return 1.0
    if not reference or not predicted:
        return 0.0
    candidates = []
    for pi, p in enumerate(predicted):
        for ri, r in enumerate(reference):
            iou = span_iou(p, r)
            if iou > iou_threshold:
                candidates.append((iou, pi, ri))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p, used_r = set(), set()
    matches = 0
    for _iou, pi, ri in candidates:
        if pi in used_p or ri in used_r:
            continue
        used_p.add(pi)
        used_r.add(ri)
        matches += 1
    precision = matches / len(predicted)
    recall = matches / len(reference)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _item_span_f1(ref_record, pred_record, iou_threshold):
    # Spans from both sides; side-tag the intervals so spans never match
    # across sides.
    def flat(record):
        out = []
        for side in ("src", "tgt"):
            for s in record[side]:
                out.append((s[0], s[1], side))
        return out

    # offset target spans beyond the source side so sides cannot overlap
    offset = 10**6
    ref = [
        (s + (offset if side == "tgt" else 0), e + (offset if side == "tgt" else 0))
        for (s, e, side) in flat(ref_record)
    ]
    pred = [
        (s + (offset if side == "tgt" else 0), e + (offset if side == "tgt" else 0))
        for (s, e, side) in flat(pred_record)
    ]
    return span_macro_f1(ref, pred, iou_threshold)


def _item_token_f1(ref_record, pred_record, token_counts):
    gold, pred = [], []
    for side, count in zip(("src", "tgt"), token_counts):
        ref_cov = _coverage(ref_record[side], count)
        pred_cov = _coverage(pred_record[side], count)
        gold.extend(DIV if c else EQ for c in ref_cov)
        pred.extend(DIV if c else EQ for c in pred_cov)
    # macro over the two classes; a class absent from both annotators is
    # vacuous perfect agreement, not a zero
    f1s = []
    for cls in (EQ, DIV):
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 1.0)
    return sum(f1s) / 2


def pairwise_iaa(items, level="span", iou_threshold=0.5):
    """Agreement between annotators' rationales.

    `items` is a list of dicts with keys "token_counts" (src, tgt) and
    "annotations": a list of per-annotator records {"src": spans, "tgt": spans}.
    For every ordered annotator pair, one is treated as reference and the other
    as prediction; per-item macro-F1 values are averaged per ordered pair, and
    the mean and population stdev across ordered pairs are returned (percent).
    """
    if level not in ("span", "token"):
        raise ValueError(f"unknown level {level!r}")
    pair_scores = {}
    for item in items:
        annots = item["annotations"]
        if len(annots) < 2:
            raise ValueError("need at least 2 annotators per item")
        for i in range(len(annots)):
            for j in range(len(annots)):
                if i == j:
                    continue
                if level == "span":
                    score = _item_span_f1(annots[i], annots[j], iou_threshold)
                else:
                    score = _item_token_f1(annots[i], annots[j], item["token_counts"])
                pair_scores.setdefault((i, j), []).append(score)
    means = [np.mean(v) for _k, v in sorted(pair_scores.items())]
    return 100.0 * float(np.mean(means)), 100.0 * float(np.std(means))


# ---------------------------------------------------------------------------
# Krippendorff's alpha (nominal, coincidence-matrix form, missing data allowed)


def krippendorff_alpha(ratings):
    """Nominal-metric alpha over `ratings`: one dict (or list with None gaps)
    of item -> label per annotator. Items with fewer than two ratings are
    excluded from coincidence counting."""
    units = {}
    for coder in ratings:
        entries = coder.items() if isinstance(coder, dict) else enumerate(coder)
        for item, value in entries:
            if value is None:
                continue
            units.setdefault(item, []).append(value)
    units = {k: v for k, v in units.items() if len(v) >= 2}
    if len(units) < 2:
        raise ValueError("need at least 2 items with 2+ ratings each")

    coincidence = Counter()
    n_total = 0
    for values in units.values():
        m = len(values)
        for i, a in enumerate(values):
            for j, b in enumerate(values):
                if i != j:
                    coincidence[(a, b)] += 1.0 / (m - 1)
        n_total += m

    categories = sorted({v for vals in units.values() for v in vals})
    n_c = {c: sum(coincidence[(c, k)] for k in categories) for c in categories}
    d_o = sum(coincidence[(a, b)] for a in categories for b in categories if a != b)
    d_e = sum(
        n_c[a] * n_c[b] for a in categories for b in categories if a != b
    ) / (n_total - 1)
    if d_e == 0:
        if d_o == 0:
            return 1.0  # everything identical
        raise ValueError("expected disagreement is zero but observed disagreement is not")
    return 1.0 - d_o / d_e


# ---------------------------------------------------------------------------
# Threshold classifiers


def divpct(src_labels, tgt_labels, per_side=False):
    """Percentage of DIV tokens; both sides combined by default."""
    if per_side:
        out = []
        for labels in (src_labels, tgt_labels):
            if not labels:
                raise ValueError("empty token sequence")
            out.append(100.0 * sum(1 for z in labels if z == DIV) / len(labels))
        return tuple(out)
    total = len(src_labels) + len(tgt_labels)
    if total == 0:
        raise ValueError("empty token sequence")
    n_div = sum(1 for z in src_labels if z == DIV) + sum(
        1 for z in tgt_labels if z == DIV
    )
    return 100.0 * n_div / total


def divpct_classify(src_labels, tgt_labels, threshold_pct):
    """Separate coarse from fine divergences: Unrelated iff DIV% strictly
    exceeds the threshold, else SomeMeaningDifference."""
    if not 0 < threshold_pct < 100:
        raise ValueError("threshold_pct must lie in (0, 100)")
    pct = divpct(src_labels, tgt_labels)
    return "Unrelated" if pct > threshold_pct else "SomeMeaningDifference"


def score_threshold_classify(score, cutoff=LASER_DEFAULT_CUTOFF):
    """Equivalent iff the similarity score strictly exceeds the cutoff."""
    if not np.isfinite(score):
        raise ValueError("score must be finite")
    return "Equivalent" if score > cutoff else "Divergent"
