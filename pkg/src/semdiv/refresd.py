"""Data model, storage, and adjudication for rationale-annotated divergence
datasets in the REFreSD style.

Canonical on-disk format is JSONL, one annotated pair per line:

    {"schema_version": 1,
     "id": "...", "src_tokens": [...], "tgt_tokens": [...],
     "annotations": [
        {"annotator_id": "...",
         "spans": {"src": [[start, end, "Added"], ...], "tgt": [...]},
         "sentence_class": "SomeMeaningDifference",
         "notes": null},
        ... exactly 3 ...],
     "adjudicated": "SomeMeaningDifference" | null,
     "excluded": false, "exclusion_reason": null}
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .corpus import SentencePair

__all__ = [
    "SentenceClass",
    "SpanLabel",
    "AnnotationRecord",
    "AnnotatedPair",
    "Excluded",
    "majority_vote",
    "adjudicate",
    "load_refresd",
    "save_refresd",
    "import_release_tsv",
    "dataset_stats",
    "annotator_quality_report",
]

SCHEMA_VERSION = 1

SPAN_LABELS = ("Added", "Changed", "Other")


class SentenceClass(str, Enum):
    NO_MEANING_DIFFERENCE = "NoMeaningDifference"
    SOME_MEANING_DIFFERENCE = "SomeMeaningDifference"
    UNRELATED = "Unrelated"


EXTREMES = {SentenceClass.NO_MEANING_DIFFERENCE, SentenceClass.UNRELATED}


class SpanLabel(str, Enum):
    ADDED = "Added"
    CHANGED = "Changed"
    OTHER = "Other"


@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    pair_id: str
    src_spans: tuple  # ((start, end, label), ...)
    tgt_spans: tuple
    sentence_class: SentenceClass
    notes: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "src_spans", tuple(tuple(s) for s in self.src_spans))
        object.__setattr__(self, "tgt_spans", tuple(tuple(s) for s in self.tgt_spans))
        object.__setattr__(self, "sentence_class", SentenceClass(self.sentence_class))
        for spans in (self.src_spans, self.tgt_spans):
            for start, end, label in spans:
                if label not in SPAN_LABELS:
                    raise ValueError(f"unknown span label {label!r}")
                if not 0 <= start < end:
                    raise ValueError(f"bad span interval ({start},{end})")

    def validate_bounds(self, pair):
        for start, end, _label in self.src_spans:
            if end > len(pair.src_tokens):
                raise ValueError(
                    f"src span ({start},{end}) out of bounds for pair {pair.id}"
                )
        for start, end, _label in self.tgt_spans:
            if end > len(pair.tgt_tokens):
                raise ValueError(
                    f"tgt span ({start},{end}) out of bounds for pair {pair.id}"
                )

    def to_dict(self):
        return {
            "annotator_id": self.annotator_id,
            "spans": {
                "src": [list(s) for s in self.src_spans],
                "tgt": [list(s) for s in self.tgt_spans],
            },
            "sentence_class": self.sentence_class.value,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d, pair_id):
        return cls(
            annotator_id=d["annotator_id"],
            pair_id=pair_id,
            src_spans=tuple(tuple(s) for s in d["spans"]["src"]),
            tgt_spans=tuple(tuple(s) for s in d["spans"]["tgt"]),
            sentence_class=SentenceClass(d["sentence_class"]),
            notes=d.get("notes"),
        )


@dataclass(frozen=True)
class Excluded:
    reason: str  # "tridisagreement" | "extreme bidisagreement"


def majority_vote(classes):
    """Adjudicate three sentence-class votes.

    Plain 3-0 or 2-1 majorities win, except: all-distinct votes and 2-1 splits
    whose two classes are the extremes (NoMeaningDifference vs Unrelated) are
    excluded.
    """
    classes = [SentenceClass(c) for c in classes]
    if len(classes) != 3:
        raise ValueError(f"majority vote needs exactly 3 records, got {len(classes)}")
    counts = Counter(classes)
    if len(counts) == 3:
        return Excluded("tridisagreement")
    if len(counts) == 1:
        return classes[0]
    if set(counts) == EXTREMES:
        return Excluded("extreme bidisagreement")
    return counts.most_common(1)[0][0]


@dataclass(frozen=True)
class AnnotatedPair:
    pair: SentencePair
    records: tuple  # exactly 3 AnnotationRecord from distinct annotators

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) != 3:
            raise ValueError(
                f"pair {self.pair.id}: expected 3 annotation records, got {len(self.records)}"
            )
        annotators = {r.annotator_id for r in self.records}
        if len(annotators) != 3:
            raise ValueError(f"pair {self.pair.id}: annotators must be distinct")
        for r in self.records:
            r.validate_bounds(self.pair)

    @property
    def vote(self):
        return majority_vote([r.sentence_class for r in self.records])

    @property
    def adjudicated(self):
        v = self.vote
        return None if isinstance(v, Excluded) else v

    @property
    def excluded(self):
        return isinstance(self.vote, Excluded)

    @property
    def exclusion_reason(self):
        v = self.vote
        return v.reason if isinstance(v, Excluded) else None

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.pair.id,
            "src_tokens": list(self.pair.src_tokens),
            "tgt_tokens": list(self.pair.tgt_tokens),
            "annotations": [r.to_dict() for r in self.records],
            "adjudicated": self.adjudicated.value if self.adjudicated else None,
            "excluded": self.excluded,
            "exclusion_reason": self.exclusion_reason,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {d.get('schema_version')}")
        pair = SentencePair(
            id=d["id"], src_tokens=tuple(d["src_tokens"]), tgt_tokens=tuple(d["tgt_tokens"])
        )
        records = tuple(
            AnnotationRecord.from_dict(r, pair.id) for r in d["annotations"]
        )
        return cls(pair=pair, records=records)


def adjudicate(pairs):
    """Split annotated pairs into (adjudicated, excluded)."""
    kept, excluded = [], []
    for p in pairs:
        (excluded if p.excluded else kept).append(p)
    return kept, excluded


def load_refresd(path):
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pairs.append(AnnotatedPair.from_dict(json.loads(line)))
            except (ValueError, KeyError) as e:
                raise ValueError(f"{path}:{line_no}: {e}") from None
    return pairs


def save_refresd(pairs, path):
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def import_release_tsv(path):
    """Import adapter for the published release TSV.

    Expected columns (header row required): ``id``, ``en``, ``fr``, and per
    annotator k in 1..3: ``annotator{k}_class``, ``annotator{k}_en_spans``,
    ``annotator{k}_fr_spans``. Span cells are ``start-end:Label`` items
    separated by ``;`` over whitespace token indices, empty for no spans.
    Class cells accept the release's surface names ("no_meaning_difference",
    "some_meaning_difference", "unrelated") or the canonical enum values.
    """
    class_map = {
        "no_meaning_difference": SentenceClass.NO_MEANING_DIFFERENCE,
        "some_meaning_difference": SentenceClass.SOME_MEANING_DIFFERENCE,
        "unrelated": SentenceClass.UNRELATED,
    }

    def parse_class(cell):
        cell = cell.strip()
        key = cell.lower().replace(" ", "_")
        if key in class_map:
            return class_map[key]
        return SentenceClass(cell)

    def parse_spans(cell):
        spans = []
        for item in cell.split(";"):
            item = item.strip()
            if not item:
                continue
            rng, _, label = item.partition(":")
            start, end = rng.split("-")
            spans.append((int(start), int(end), label or "Other"))
        return tuple(spans)

    pairs = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        col = {name: i for i, name in enumerate(header)}
        for line_no, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            pid = cells[col["id"]]
            pair = SentencePair(
                id=pid,
                src_tokens=tuple(cells[col["en"]].split()),
                tgt_tokens=tuple(cells[col["fr"]].split()),
            )
            records = []
            for k in (1, 2, 3):
                records.append(
                    AnnotationRecord(
                        annotator_id=f"annotator{k}",
                        pair_id=pid,
                        src_spans=parse_spans(cells[col[f"annotator{k}_en_spans"]]),
                        tgt_spans=parse_spans(cells[col[f"annotator{k}_fr_spans"]]),
                        sentence_class=parse_class(cells[col[f"annotator{k}_class"]]),
                    )
                )
            try:
                pairs.append(AnnotatedPair(pair=pair, records=tuple(records)))
            except ValueError as e:
                raise ValueError(f"{path}:{line_no}: {e}") from None
    return pairs


def dataset_stats(pairs):
    """Class counts over adjudicated (non-excluded) pairs plus headline shares:
    divergent = SomeMeaningDifference + Unrelated; fine-grained = SomeMeaningDifference."""
    kept, excluded = adjudicate(pairs)
    counts = Counter(p.adjudicated for p in kept)
    n = len(kept)
    divergent = counts[SentenceClass.SOME_MEANING_DIFFERENCE] + counts[
        SentenceClass.UNRELATED
    ]
    fine = counts[SentenceClass.SOME_MEANING_DIFFERENCE]
    return {
        "total": n,
        "excluded": len(excluded),
        "counts": {c.value: counts.get(c, 0) for c in SentenceClass},
        "pct_divergent": 100.0 * divergent / n if n else 0.0,
        "pct_fine_grained": 100.0 * fine / n if n else 0.0,
    }


def annotator_quality_report(
    pairs, reference_by_pair=None, min_reference_agreement=60.0
):
    """Session-style quality check: per-annotator consistency on duplicated
    pair contents and agreement with reference annotations, flagging annotators
    below the agreement threshold.

    `reference_by_pair` maps pair_id -> SentenceClass for reference items.
    Duplicates are detected by identical (src_tokens, tgt_tokens) contents
    under distinct ids.
    """
    by_annotator = {}
    content_seen = {}
    for p in pairs:
        key = (p.pair.src_tokens, p.pair.tgt_tokens)
        content_seen.setdefault(key, []).append(p)
        for r in p.records:
            by_annotator.setdefault(r.annotator_id, []).append(r)

    report = {}
    for aid, records in sorted(by_annotator.items()):
        consistent = total_dups = 0
        for dup_group in content_seen.values():
            votes = [
                r.sentence_class
                for p in dup_group
                for r in p.records
                if r.annotator_id == aid
            ]
            if len(votes) >= 2:
                total_dups += 1
                consistent += len(set(votes)) == 1
        ref_hits = ref_total = 0
        if reference_by_pair:
            for r in records:
                if r.pair_id in reference_by_pair:
                    ref_total += 1
                    ref_hits += r.sentence_class == SentenceClass(
                        reference_by_pair[r.pair_id]
                    )
        ref_agreement = 100.0 * ref_hits / ref_total if ref_total else None
        report[aid] = {
            "annotated": len(records),
            "duplicate_groups": total_dups,
            "duplicate_consistent": consistent,
            "reference_agreement_pct": ref_agreement,
            "flagged": ref_agreement is not None
            and ref_agreement < min_reference_agreement,
        }
    return report
