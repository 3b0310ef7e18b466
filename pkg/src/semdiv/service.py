"""HTTP annotation service: hosts annotation sessions for the companion UI and
exposes live agreement and dataset statistics.

Persistence is an append-only JSONL journal plus an in-memory index; accepted
records are never mutated or deleted.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import SentencePair
from .evaluation import iaa_summary
from .refresd import (
    AnnotatedPair,
    AnnotationRecord,
    SentenceClass,
    dataset_stats,
    majority_vote,
)

__all__ = ["SessionState", "AnnotationStore", "plan_sessions", "create_app"]

DEFAULT_SESSION_SIZE = 120
ANNOTATORS_PER_PAIR = 3


@dataclass
class SessionState:
    session_id: str
    annotator_id: str
    queue: list  # served pair ids, duplicates under fresh ids
    completed: set = field(default_factory=set)
    injected_ids: dict = field(default_factory=dict)  # served id -> canonical id

    def canonical_id(self, served_id):
        return self.injected_ids.get(served_id, served_id)

    def next_pending(self):
        for pid in self.queue:
            if pid not in self.completed:
                return pid
        return None


def plan_sessions(
    pairs,
    annotators,
    session_size=DEFAULT_SESSION_SIZE,
    duplicates_per_session=0,
    seed=0,
):
    """Assign every pair to exactly three distinct annotators and chunk each
    annotator's queue into fixed-size sessions, optionally injecting duplicate
    items (re-served under fresh ids) for quality control."""
    if len(annotators) < ANNOTATORS_PER_PAIR:
        raise ValueError(f"need at least {ANNOTATORS_PER_PAIR} annotators")
    queues = {a: [] for a in annotators}
    for i, pair in enumerate(pairs):
        for k in range(ANNOTATORS_PER_PAIR):
            queues[annotators[(i + k) % len(annotators)]].append(pair.id)

    rng = np.random.default_rng(seed)
    sessions = []
    for annotator in annotators:
        ids = queues[annotator]
        for chunk_no, start in enumerate(range(0, len(ids), session_size)):
            chunk = list(ids[start : start + session_size])
            injected = {}
            if duplicates_per_session and chunk:
                picks = rng.choice(len(chunk), size=min(duplicates_per_session, len(chunk)), replace=False)
                for n, idx in enumerate(sorted(int(i) for i in picks)):
                    dup_id = f"{chunk[idx]}#dup{n}"
                    injected[dup_id] = chunk[idx]
                    pos = int(rng.integers(0, len(chunk) + 1))
                    chunk.insert(pos, dup_id)
            sessions.append(
                SessionState(
                    session_id=f"{annotator}-s{chunk_no}",
                    annotator_id=annotator,
                    queue=chunk,
                    injected_ids=injected,
                )
            )
    return sessions


class AnnotationStore:
    """Single-writer append-only record store backed by a JSONL journal."""

    def __init__(self, journal_path=None):
        self.journal_path = journal_path
        self._lock = threading.Lock()
        self._records = []
        self._by_key = {}  # (annotator_id, pair_id) -> record
        if journal_path is not None:
            self._replay()

    def _replay(self):
        try:
            f = open(self.journal_path, encoding="utf-8")
        except FileNotFoundError:
            return
        with f:
            for line in f:
                line = line.strip()
                if line:
                    d = json.loads(line)
                    rec = AnnotationRecord.from_dict(d, d["pair_id"])
                    self._records.append(rec)
                    self._by_key[(rec.annotator_id, rec.pair_id)] = rec

    def has(self, annotator_id, pair_id):
        return (annotator_id, pair_id) in self._by_key

    def append(self, record):
        with self._lock:
            key = (record.annotator_id, record.pair_id)
            if key in self._by_key:
                raise KeyError(f"duplicate submission for {key}")
            if self.journal_path is not None:
                payload = record.to_dict()
                payload["pair_id"] = record.pair_id
                with open(self.journal_path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(payload, ensure_ascii=False) + "\n")
            self._records.append(record)
            self._by_key[key] = record
        return record

    def records_for_pair(self, pair_id):
        return [r for r in self._records if r.pair_id == pair_id]

    def all_records(self):
        return list(self._records)


class AnnotationIn(BaseModel):
    annotator_id: str
    pair_id: str
    spans: dict  # {"src": [[start, end, label], ...], "tgt": [...]}
    sentence_class: str
    notes: str | None = None


def _completed_triples(store, pairs_by_id):
    triples = []
    for pid, pair in pairs_by_id.items():
        records = store.records_for_pair(pid)
        if len(records) >= ANNOTATORS_PER_PAIR:
            records = records[:ANNOTATORS_PER_PAIR]
            if len({r.annotator_id for r in records}) == ANNOTATORS_PER_PAIR:
                triples.append(AnnotatedPair(pair=pair, records=tuple(records)))
    return triples


def create_app(pairs, sessions, store=None, preloaded_dataset=None):
    """Build the FastAPI app.

    `pairs` are the SentencePairs to annotate, `sessions` come from
    plan_sessions, `preloaded_dataset` optionally adds already-annotated pairs
    (e.g. an existing release) to /api/iaa and /api/dataset/stats.
    """
    store = store if store is not None else AnnotationStore()
    pairs_by_id = {p.id: p for p in pairs}
    sessions_by_id = {s.session_id: s for s in sessions}
    preloaded = list(preloaded_dataset or [])

    app = FastAPI(title="divergence annotation service")

    def error(status, message, field=None):
        detail = {"message": message}
        if field:
            detail["field"] = field
        return JSONResponse(status_code=status, content={"detail": detail})

    @app.get("/api/session/{session_id}/next")
    def next_pair(session_id: str):
        session = sessions_by_id.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id!r}")
        # refresh completion from the store so restarts resume correctly
        for served in session.queue:
            if store.has(session.annotator_id, served):
                session.completed.add(served)
        served = session.next_pending()
        if served is None:
            return Response(status_code=204)
        pair = pairs_by_id[session.canonical_id(served)]
        return {
            "pair_id": served,
            "src_tokens": list(pair.src_tokens),
            "tgt_tokens": list(pair.tgt_tokens),
            "remaining": sum(1 for p in session.queue if p not in session.completed),
        }

    @app.post("/api/session/{session_id}/annotation")
    def submit(session_id: str, body: AnnotationIn):
        session = sessions_by_id.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id!r}")
        if body.annotator_id != session.annotator_id:
            return error(400, "annotator does not own this session", field="annotator_id")
        canonical = session.canonical_id(body.pair_id)
        pair = pairs_by_id.get(canonical)
        if pair is None:
            return error(400, f"unknown pair {body.pair_id!r}", field="pair_id")
        try:
            cls = SentenceClass(body.sentence_class)
        except ValueError:
            return error(400, f"unknown sentence class {body.sentence_class!r}",
                         field="sentence_class")
        try:
            record = AnnotationRecord(
                annotator_id=body.annotator_id,
                pair_id=body.pair_id,
                src_spans=tuple(tuple(s) for s in body.spans.get("src", [])),
                tgt_spans=tuple(tuple(s) for s in body.spans.get("tgt", [])),
                sentence_class=cls,
                notes=body.notes,
            )
            record.validate_bounds(pair)
        except (ValueError, TypeError) as e:
            return error(400, str(e), field="spans")
        try:
            store.append(record)
        except KeyError:
            return error(409, f"annotation for pair {body.pair_id!r} by "
                              f"{body.annotator_id!r} already exists")
        session.completed.add(body.pair_id)
        payload = record.to_dict()
        payload["pair_id"] = record.pair_id
        return payload

    @app.get("/api/iaa")
    def iaa():
        triples = preloaded + _completed_triples(store, pairs_by_id)
        if len(triples) < 2:
            return {"n_pairs": len(triples), "detail": "not enough completed pairs"}
        summary = iaa_summary(triples)
        summary["votes"] = {
            t.pair.id: (t.adjudicated.value if t.adjudicated else t.exclusion_reason)
            for t in triples
        }
        return summary

    @app.get("/api/progress")
    def progress():
        return {
            "sessions": {
                s.session_id: {
                    "annotator_id": s.annotator_id,
                    "queue": len(s.queue),
                    "completed": sum(
                        1 for served in s.queue if store.has(s.annotator_id, served)
                    ),
                }
                for s in sessions_by_id.values()
            },
            "records": len(store.all_records()),
        }

    @app.get("/api/dataset/stats")
    def stats():
        triples = preloaded + _completed_triples(store, pairs_by_id)
        full = dataset_stats(triples) if triples else {"total": 0, "counts": {}}
        counts = full.get("counts", {})
        return {
            "nd": counts.get(SentenceClass.NO_MEANING_DIFFERENCE.value, 0),
            "sd": counts.get(SentenceClass.SOME_MEANING_DIFFERENCE.value, 0),
            "un": counts.get(SentenceClass.UNRELATED.value, 0),
            "detail": full,
        }

    app.state.store = store
    app.state.sessions = sessions_by_id
    return app
