"""Corpus ingestion: parallel text, CoNLL-U parses, Pharaoh alignments, similarity
scores, curation filters, and seed selection."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SentencePair",
    "DependencyTree",
    "Alignment",
    "SimilarityScore",
    "FilterConfig",
    "CorpusError",
    "parse_conllu",
    "serialize_conllu",
    "parse_pharaoh",
    "validate_alignment",
    "filter_corpus",
    "select_seed",
    "normalize_text",
    "load_bitext_tsv",
    "load_bitext_files",
    "load_scores_tsv",
    "token_edit_ratio",
]

CONLLU_COLUMNS = 10


class CorpusError(ValueError):
    """Raised for malformed corpus inputs; carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class SentencePair:
    """An English/French sentence pair with whitespace tokenizations."""

    id: str
    src_tokens: tuple
    tgt_tokens: tuple
    src_raw: str = ""
    tgt_raw: str = ""

    def __post_init__(self):
        object.__setattr__(self, "src_tokens", tuple(self.src_tokens))
        object.__setattr__(self, "tgt_tokens", tuple(self.tgt_tokens))
        if not self.src_raw:
            object.__setattr__(self, "src_raw", " ".join(self.src_tokens))
        if not self.tgt_raw:
            object.__setattr__(self, "tgt_raw", " ".join(self.tgt_tokens))

    def to_dict(self):
        return {
            "id": self.id,
            "src_tokens": list(self.src_tokens),
            "tgt_tokens": list(self.tgt_tokens),
            "src_raw": self.src_raw,
            "tgt_raw": self.tgt_raw,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=d["id"],
            src_tokens=tuple(d["src_tokens"]),
            tgt_tokens=tuple(d["tgt_tokens"]),
            src_raw=d.get("src_raw", ""),
            tgt_raw=d.get("tgt_raw", ""),
        )


@dataclass(frozen=True)
class DependencyTree:
    """Single-rooted dependency tree: heads[i] is the 1-based parent of token i+1, 0 = root."""

    heads: tuple
    upos: tuple

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        object.__setattr__(self, "upos", tuple(self.upos))
        n = len(self.heads)
        if len(self.upos) != n:
            raise CorpusError("heads and upos length mismatch")
        roots = [i for i, h in enumerate(self.heads) if h == 0]
        if len(roots) != 1:
            raise CorpusError(f"tree must have exactly one root, found {len(roots)}")
        for i, h in enumerate(self.heads):
            if not 0 <= h <= n:
                raise CorpusError(f"head index {h} out of range for {n} tokens")
        _check_acyclic(self.heads)

    @property
    def token_count(self):
        return len(self.heads)

    def children(self):
        """Map from 1-based node index to its 1-based children."""
        kids = {i: [] for i in range(1, len(self.heads) + 1)}
        for i, h in enumerate(self.heads, start=1):
            if h != 0:
                kids[h].append(i)
        return kids

    def subtree(self, node):
        """All 1-based indices in the subtree rooted at `node`, including it."""
        kids = self.children()
        out, stack = [], [node]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(kids[n])
        return sorted(out)


def _check_acyclic(heads):
    n = len(heads)
    for start in range(1, n + 1):
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise CorpusError(f"cycle in heads involving token {start}")
            seen.add(node)
            node = heads[node - 1]


@dataclass(frozen=True)
class Alignment:
    """Set of 0-based (src_index, tgt_index) word alignment links."""

    links: frozenset

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))

    def tgt_for_src(self, src_indices):
        src_indices = set(src_indices)
        return {j for i, j in self.links if i in src_indices}

    def src_for_tgt(self, tgt_indices):
        tgt_indices = set(tgt_indices)
        return {i for i, j in self.links if j in tgt_indices}


@dataclass(frozen=True)
class SimilarityScore:
    """Externally computed cross-lingual similarity for one pair."""

    pair_id: str
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise CorpusError(f"non-finite similarity score for pair {self.pair_id}")


@dataclass(frozen=True)
class FilterConfig:
    min_tokens: int = 5
    max_tokens: int = 80
    max_numeric_ratio: float = 0.5
    min_edit_ratio: float = 0.15

    def __post_init__(self):
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be >= 1")
        if self.min_tokens > self.max_tokens:
            raise ValueError("min_tokens must not exceed max_tokens")


# ---------------------------------------------------------------------------
# CoNLL-U


def parse_conllu(text):
    """Parse CoNLL-U text into a list of (tokens, DependencyTree) per sentence.

    Multiword-token ranges (``1-2``) and empty nodes (``1.1``) are skipped.
    Raises CorpusError naming the offending line on malformed input.
    """
    sentences = []
    tokens, upos, heads = [], [], []
    expected_id = 1
    start_line = None

    def flush(line_no):
        nonlocal tokens, upos, heads, expected_id, start_line
        if tokens:
            try:
                tree = DependencyTree(heads=tuple(heads), upos=tuple(upos))
            except CorpusError as e:
                raise CorpusError(str(e), line=start_line) from None
            sentences.append((tuple(tokens), tree))
        tokens, upos, heads = [], [], []
        expected_id = 1
        start_line = None

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip():
            flush(line_no)
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != CONLLU_COLUMNS:
            raise CorpusError(
                f"expected {CONLLU_COLUMNS} tab-separated columns, got {len(cols)}",
                line=line_no,
            )
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range or empty node
        try:
            idx = int(tok_id)
        except ValueError:
            raise CorpusError(f"non-integer token id {tok_id!r}", line=line_no) from None
        if idx != expected_id:
            raise CorpusError(f"token id {idx} out of sequence", line=line_no)
        try:
            head = int(cols[6])
        except ValueError:
            raise CorpusError(f"non-integer HEAD {cols[6]!r}", line=line_no) from None
        if head < 0:
            raise CorpusError(f"negative HEAD {head}", line=line_no)
        if start_line is None:
            start_line = line_no
        tokens.append(cols[1])
        upos.append(cols[3])
        heads.append(head)
        expected_id += 1
    flush(None)
    return sentences


def serialize_conllu(sentences):
    """Serialize (tokens, DependencyTree) sentences back to CoNLL-U text.

    Inverse of parse_conllu for the FORM/UPOS/HEAD columns; other columns
    are written as ``_``.
    """
    blocks = []
    for tokens, tree in sentences:
        lines = []
        for i, (form, pos, head) in enumerate(zip(tokens, tree.upos, tree.heads), start=1):
            lines.append(f"{i}\t{form}\t_\t{pos}\t_\t_\t{head}\t_\t_\t_")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Pharaoh alignments


def parse_pharaoh(line):
    """Parse one Pharaoh-format line (``i-j`` items, 0-based) into an Alignment."""
    links = set()
    for item in line.split():
        parts = item.split("-")
        if len(parts) != 2:
            raise CorpusError(f"malformed alignment item {item!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise CorpusError(f"non-numeric alignment item {item!r}") from None
        if i < 0 or j < 0:
            raise CorpusError(f"negative index in alignment item {item!r}")
        links.add((i, j))
    return Alignment(links=frozenset(links))


def validate_alignment(align, pair):
    """Check every link is within the pair's token bounds."""
    ns, nt = len(pair.src_tokens), len(pair.tgt_tokens)
    for i, j in align.links:
        if i >= ns or j >= nt:
            raise CorpusError(
                f"alignment link ({i},{j}) out of bounds for pair {pair.id} "
                f"({ns} src / {nt} tgt tokens)"
            )
    return align


# ---------------------------------------------------------------------------
# Filtering

_NUMERIC_CHARS = set("0123456789.,%/:-")


def _is_numeric_token(tok):
    return any(c.isdigit() for c in tok) and all(c in _NUMERIC_CHARS for c in tok)


def _numeric_ratio(tokens):
    if not tokens:
        return 0.0
    return sum(_is_numeric_token(t) for t in tokens) / len(tokens)


def token_edit_ratio(a, b):
    """Token-level Levenshtein distance normalized by max(len(a), len(b))."""
    if not a and not b:
        return 0.0
    la, lb = len(a), len(b)
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[lb] / max(la, lb)


def filter_corpus(pairs, cfg=FilterConfig()):
    """Apply curation rules; returns (kept, rejected) where rejected entries are
    (pair, reason) with reason in {"length", "numeric", "edit"}."""
    kept, rejected = [], []
    for pair in pairs:
        ns, nt = len(pair.src_tokens), len(pair.tgt_tokens)
        if not (cfg.min_tokens <= ns <= cfg.max_tokens) or not (
            cfg.min_tokens <= nt <= cfg.max_tokens
        ):
            rejected.append((pair, "length"))
            continue
        if (
            _numeric_ratio(pair.src_tokens) > cfg.max_numeric_ratio
            or _numeric_ratio(pair.tgt_tokens) > cfg.max_numeric_ratio
        ):
            rejected.append((pair, "numeric"))
            continue
        if token_edit_ratio(pair.src_tokens, pair.tgt_tokens) < cfg.min_edit_ratio:
            rejected.append((pair, "edit"))
            continue
        kept.append(pair)
    return kept, rejected


# ---------------------------------------------------------------------------
# Seed selection


def select_seed(pairs, scores, k, dev_n, split_seed=0):
    """Take the top-k pairs by descending similarity score (ties by id ascending)
    and split them deterministically into (k - dev_n) train + dev_n dev."""
    if dev_n >= k:
        raise ValueError("dev_n must be smaller than k")
    if k > len(pairs):
        raise ValueError(f"k={k} exceeds corpus size {len(pairs)}")
    score_by_id = {s.pair_id: s.score for s in scores}
    missing = sorted(p.id for p in pairs if p.id not in score_by_id)
    if missing:
        raise CorpusError(f"missing similarity scores for pairs: {', '.join(missing)}")
    ranked = sorted(pairs, key=lambda p: (-score_by_id[p.id], p.id))
    top = ranked[:k]
    rng = np.random.default_rng(split_seed)
    order = rng.permutation(k)
    dev_idx = set(order[:dev_n].tolist())
    train = [p for i, p in enumerate(top) if i not in dev_idx]
    dev = [p for i, p in enumerate(top) if i in dev_idx]
    return train, dev


# ---------------------------------------------------------------------------
# Light normalization and file loading


def normalize_text(text):
    """Minimal normalization pre-pass: NFC plus whitespace squashing around tokens."""
    text = unicodedata.normalize("NFC", text)
    return " ".join(text.split())


def load_bitext_tsv(path):
    """Load parallel text from a TSV with lines ``id \\t src \\t tgt``."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise CorpusError("expected 3 tab-separated columns", line=line_no)
            pid, src, tgt = cols
            pairs.append(
                SentencePair(
                    id=pid,
                    src_tokens=tuple(src.split()),
                    tgt_tokens=tuple(tgt.split()),
                    src_raw=src,
                    tgt_raw=tgt,
                )
            )
    return pairs


def load_bitext_files(src_path, tgt_path, id_prefix="pair"):
    """Load parallel text from two line-aligned files."""
    with open(src_path, encoding="utf-8") as f:
        src_lines = f.read().splitlines()
    with open(tgt_path, encoding="utf-8") as f:
        tgt_lines = f.read().splitlines()
    if len(src_lines) != len(tgt_lines):
        raise CorpusError(
            f"bitext line count mismatch: {len(src_lines)} vs {len(tgt_lines)}"
        )
    return [
        SentencePair(
            id=f"{id_prefix}-{i}",
            src_tokens=tuple(s.split()),
            tgt_tokens=tuple(t.split()),
            src_raw=s,
            tgt_raw=t,
        )
        for i, (s, t) in enumerate(zip(src_lines, tgt_lines))
    ]


def load_scores_tsv(path):
    """Load similarity scores from a TSV with lines ``pair_id \\t score``."""
    scores = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise CorpusError("expected 2 tab-separated columns", line=line_no)
            try:
                score = float(cols[1])
            except ValueError:
                raise CorpusError(f"non-numeric score {cols[1]!r}", line=line_no) from None
            scores.append(SimilarityScore(pair_id=cols[0], score=score))
    return scores
