"""Synthetic divergence generation: subtree deletion, phrase replacement, lexical
substitution, token-level EQ/DIV labels, and contrastive set assembly."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import Alignment, DependencyTree, SentencePair

__all__ = [
    "EQ",
    "DIV",
    "DivergenceType",
    "SamplingStrategy",
    "DivergentExample",
    "ContrastiveItem",
    "LexicalResource",
    "UnigramScorer",
    "PosNgramIndex",
    "NoEligibleEdit",
    "eligible_subtrees",
    "subtree_deletion",
    "phrase_replacement",
    "lexical_substitution",
    "build_contrastive_set",
    "write_items_jsonl",
    "read_items_jsonl",
]

EQ = "EQ"
DIV = "DIV"

CONTENT_POS = {"NOUN", "VERB", "ADJ"}


class DivergenceType(str, Enum):
    SUBTREE_DELETION = "subtree_deletion"
    PHRASE_REPLACEMENT = "phrase_replacement"
    LEXSUB_GENERALIZE = "lexsub_generalize"
    LEXSUB_PARTICULARIZE = "lexsub_particularize"


# Granularity rank: lower value = finer-grained (closer to equivalent).
# Phrase replacement and subtree deletion share the coarse level and are
# never ranked against each other.
GRANULARITY = {
    DivergenceType.LEXSUB_GENERALIZE: 1,
    DivergenceType.LEXSUB_PARTICULARIZE: 1,
    DivergenceType.PHRASE_REPLACEMENT: 2,
    DivergenceType.SUBTREE_DELETION: 2,
}


class SamplingStrategy(str, Enum):
    SINGLE_TYPE = "single_type"
    BALANCED = "balanced"
    CONCATENATION = "concatenation"
    DIVERGENCE_RANKING = "divergence_ranking"


class NoEligibleEdit(Exception):
    """No valid perturbation exists for this seed; caller skips the seed."""


@dataclass(frozen=True)
class DivergentExample:
    """A perturbed pair with per-token EQ/DIV labels and its originating seed."""

    base: SentencePair
    dtype: DivergenceType
    src_labels: tuple
    tgt_labels: tuple
    seed_id: str

    def __post_init__(self):
        object.__setattr__(self, "src_labels", tuple(self.src_labels))
        object.__setattr__(self, "tgt_labels", tuple(self.tgt_labels))
        if len(self.src_labels) != len(self.base.src_tokens):
            raise ValueError("src_labels length mismatch")
        if len(self.tgt_labels) != len(self.base.tgt_tokens):
            raise ValueError("tgt_labels length mismatch")
        if DIV not in self.src_labels and DIV not in self.tgt_labels:
            raise ValueError("divergent example must carry at least one DIV label")

    def to_dict(self):
        return {
            "pair": self.base.to_dict(),
            "dtype": self.dtype.value,
            "src_labels": list(self.src_labels),
            "tgt_labels": list(self.tgt_labels),
            "seed_id": self.seed_id,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            base=SentencePair.from_dict(d["pair"]),
            dtype=DivergenceType(d["dtype"]),
            src_labels=tuple(d["src_labels"]),
            tgt_labels=tuple(d["tgt_labels"]),
            seed_id=d["seed_id"],
        )


@dataclass(frozen=True)
class ContrastiveItem:
    """Ordered training pair: `higher` is finer-grained than `lower`.

    `higher` is a SentencePair (seed equivalent) or a DivergentExample; `lower`
    is always a DivergentExample. The token labels of `lower` drive the
    multi-task token objective.
    """

    higher: object
    lower: DivergentExample
    rank_relation: tuple

    def __post_init__(self):
        hi = self.higher_granularity()
        lo = GRANULARITY[self.lower.dtype]
        if hi >= lo:
            raise ValueError(
                f"contrastive order violated: {self.rank_relation[0]} vs "
                f"{self.lower.dtype.value}"
            )

    def higher_granularity(self):
        if isinstance(self.higher, SentencePair):
            return 0
        return GRANULARITY[self.higher.dtype]

    @property
    def higher_pair(self):
        return self.higher if isinstance(self.higher, SentencePair) else self.higher.base

    @property
    def lower_pair(self):
        return self.lower.base

    @property
    def token_labels(self):
        """Labels of `lower`, source side then target side."""
        return self.lower.src_labels + self.lower.tgt_labels

    def to_dict(self):
        if isinstance(self.higher, SentencePair):
            x = {"pair": self.higher.to_dict(), "dtype": "equivalent"}
        else:
            x = self.higher.to_dict()
        return {
            "x": x,
            "y": self.lower.to_dict(),
            "z": list(self.token_labels),
            "dtype": self.lower.dtype.value,
            "seed_id": self.lower.seed_id,
            "rank_relation": list(self.rank_relation),
        }

    @classmethod
    def from_dict(cls, d):
        x = d["x"]
        if x.get("dtype") == "equivalent":
            higher = SentencePair.from_dict(x["pair"])
        else:
            higher = DivergentExample.from_dict(x)
        return cls(
            higher=higher,
            lower=DivergentExample.from_dict(d["y"]),
            rank_relation=tuple(d["rank_relation"]),
        )


# ---------------------------------------------------------------------------
# Lexical resource and LM scorer


class LexicalResource:
    """Candidate hypernyms/hyponyms keyed by (lemma, POS).

    Loadable from a TSV export with lines ``lemma \\t pos \\t hyper|hypo \\t candidate``.
    """

    def __init__(self):
        self._hyper = {}
        self._hypo = {}

    def add(self, lemma, pos, relation, candidate):
        if not candidate or candidate == lemma:
            return
        table = {"hyper": self._hyper, "hypo": self._hypo}[relation]
        table.setdefault((lemma, pos), [])
        if candidate not in table[(lemma, pos)]:
            table[(lemma, pos)].append(candidate)

    def candidates(self, lemma, pos, direction):
        """Candidates for one direction: 'generalize' -> hypernyms, 'particularize' -> hyponyms."""
        table = self._hyper if direction == "generalize" else self._hypo
        return list(table.get((lemma, pos), ()))

    @classmethod
    def from_tsv(cls, path):
        res = cls()
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 4 or cols[2] not in ("hyper", "hypo"):
                    raise ValueError(f"{path}:{line_no}: malformed lexical resource line")
                res.add(cols[0], cols[1], cols[2], cols[3])
        return res


class UnigramScorer:
    """Fallback in-context scorer: corpus unigram log-frequency with add-one smoothing.

    Pluggable stand-in for a masked-LM scoring service; deterministic for fixed
    inputs.
    """

    def __init__(self, corpus_tokens):
        self.counts = {}
        self.total = 0
        for tok in corpus_tokens:
            self.counts[tok] = self.counts.get(tok, 0) + 1
            self.total += 1

    def score_in_context(self, tokens, position, candidate):
        return math.log(self.counts.get(candidate, 0) + 1) - math.log(self.total + 1)


class PosNgramIndex:
    """Donor index from POS-tag n-grams to token spans in a tagged corpus."""

    def __init__(self, min_len=2, max_len=8):
        self.min_len = min_len
        self.max_len = max_len
        self._index = {}

    def add_sentence(self, sent_id, tokens, upos):
        for length in range(self.min_len, min(self.max_len, len(tokens)) + 1):
            for start in range(len(tokens) - length + 1):
                sig = tuple(upos[start : start + length])
                span = tuple(tokens[start : start + length])
                self._index.setdefault(sig, []).append((sent_id, span))

    def donors(self, pos_signature):
        return self._index.get(tuple(pos_signature), [])

    @classmethod
    def from_sentences(cls, sentences, min_len=2, max_len=8):
        """Build from an iterable of (sent_id, tokens, upos)."""
        idx = cls(min_len=min_len, max_len=max_len)
        for sent_id, tokens, upos in sentences:
            idx.add_sentence(sent_id, tokens, upos)
        return idx


# ---------------------------------------------------------------------------
# Perturbations


def _seed_rng(rng_seed, pair_id, salt):
    # Per-seed stream so generation depends only on (seed sentence, rng_seed).
    return np.random.default_rng(
        (int(rng_seed), zlib.crc32(pair_id.encode("utf-8")), zlib.crc32(salt.encode("utf-8")))
    )


def eligible_subtrees(tree, align, pair, side):
    """1-based subtree roots usable for deletion: non-leaf, spanning fewer than
    ceil(n/2) source tokens, and leaving at least one DIV-labelable survivor."""
    n = tree.token_count
    half = math.ceil(n / 2)
    kids = tree.children()
    out = []
    for node in range(1, n + 1):
        sub = tree.subtree(node)
        if len(sub) < 2 or not kids[node]:
            continue  # leaf
        if len(sub) >= half:
            continue
        removed_src = {i - 1 for i in sub}
        if side == "src":
            if len(removed_src) >= len(pair.src_tokens):
                continue
            # survivors on the target side aligned to removed source tokens
            div_tgt = align.tgt_for_src(removed_src)
            if not div_tgt:
                continue
        else:
            removed_tgt = align.tgt_for_src(removed_src)
            if not removed_tgt or len(removed_tgt) >= len(pair.tgt_tokens):
                continue
            # survivors on the source side are the subtree tokens themselves
        out.append(node)
    return out


def subtree_deletion(pair, tree, align, side="src", rng_seed=0):
    """Delete a random eligible dependency subtree (side='src') or the target
    tokens aligned to it (side='tgt'); label surviving opposite-side tokens
    aligned to the removed material as DIV."""
    if side not in ("src", "tgt"):
        raise ValueError(f"side must be 'src' or 'tgt', got {side!r}")
    if tree.token_count != len(pair.src_tokens):
        raise ValueError("tree must span the source tokens")
    candidates = eligible_subtrees(tree, align, pair, side)
    if not candidates:
        raise NoEligibleEdit(f"no deletable subtree in pair {pair.id} (side={side})")
    rng = _seed_rng(rng_seed, pair.id, f"subtree:{side}")
    node = candidates[int(rng.integers(len(candidates)))]
    removed_src = {i - 1 for i in tree.subtree(node)}

    if side == "src":
        new_src = tuple(t for i, t in enumerate(pair.src_tokens) if i not in removed_src)
        new_tgt = pair.tgt_tokens
        src_labels = tuple(EQ for _ in new_src)
        div_tgt = align.tgt_for_src(removed_src)
        tgt_labels = tuple(DIV if j in div_tgt else EQ for j in range(len(new_tgt)))
    else:
        removed_tgt = align.tgt_for_src(removed_src)
        new_src = pair.src_tokens
        new_tgt = tuple(t for j, t in enumerate(pair.tgt_tokens) if j not in removed_tgt)
        surviving_div_src = removed_src & align.src_for_tgt(removed_tgt)
        src_labels = tuple(DIV if i in surviving_div_src else EQ for i in range(len(new_src)))
        tgt_labels = tuple(EQ for _ in new_tgt)

    edited = SentencePair(
        id=f"{pair.id}#subtree_deletion", src_tokens=new_src, tgt_tokens=new_tgt
    )
    return DivergentExample(
        base=edited,
        dtype=DivergenceType.SUBTREE_DELETION,
        src_labels=src_labels,
        tgt_labels=tgt_labels,
        seed_id=pair.id,
    )


def phrase_replacement(
    pair, upos, donor_pool, align, side="src", rng_seed=0, max_tries=50
):
    """Replace a random contiguous span with a donor span whose POS signature
    matches exactly and whose surface differs; DIV-label the new span and the
    opposite-side tokens aligned to the original span."""
    if side not in ("src", "tgt"):
        raise ValueError(f"side must be 'src' or 'tgt', got {side!r}")
    tokens = pair.src_tokens if side == "src" else pair.tgt_tokens
    n = len(tokens)
    if len(upos) != n:
        raise ValueError("upos must tag the edited side")
    max_len = max(2, math.ceil(n / 2))
    rng = _seed_rng(rng_seed, pair.id, f"phrase:{side}")
    for _ in range(max_tries):
        length = int(rng.integers(2, max_len + 1))
        if length > n:
            continue
        start = int(rng.integers(0, n - length + 1))
        sig = tuple(upos[start : start + length])
        original = tuple(tokens[start : start + length])
        donors = [
            span
            for _sid, span in donor_pool.donors(sig)
            if span != original
        ]
        if not donors:
            continue
        donor = donors[int(rng.integers(len(donors)))]
        return _apply_phrase_replacement(pair, align, side, start, length, donor)
    raise NoEligibleEdit(
        f"no POS-matched donor found for pair {pair.id} after {max_tries} tries"
    )


def _apply_phrase_replacement(pair, align, side, start, length, donor):
    span_idx = set(range(start, start + length))
    if side == "src":
        new_src = pair.src_tokens[:start] + tuple(donor) + pair.src_tokens[start + length :]
        new_tgt = pair.tgt_tokens
        src_labels = tuple(DIV if i in span_idx else EQ for i in range(len(new_src)))
        div_tgt = align.tgt_for_src(span_idx)
        tgt_labels = tuple(DIV if j in div_tgt else EQ for j in range(len(new_tgt)))
    else:
        new_src = pair.src_tokens
        new_tgt = pair.tgt_tokens[:start] + tuple(donor) + pair.tgt_tokens[start + length :]
        tgt_labels = tuple(DIV if j in span_idx else EQ for j in range(len(new_tgt)))
        div_src = align.src_for_tgt(span_idx)
        src_labels = tuple(DIV if i in div_src else EQ for i in range(len(new_src)))
    edited = SentencePair(
        id=f"{pair.id}#phrase_replacement", src_tokens=new_src, tgt_tokens=new_tgt
    )
    return DivergentExample(
        base=edited,
        dtype=DivergenceType.PHRASE_REPLACEMENT,
        src_labels=src_labels,
        tgt_labels=tgt_labels,
        seed_id=pair.id,
    )


def lexical_substitution(pair, upos, resource, scorer, direction, align, rng_seed=0):
    """Substitute a random content-word source token with its best-scoring
    hypernym (generalize) or hyponym (particularize); DIV-label the new token
    and its aligned target tokens."""
    if direction not in ("generalize", "particularize"):
        raise ValueError(f"unknown direction {direction!r}")
    if len(upos) != len(pair.src_tokens):
        raise ValueError("upos must tag the source side")
    eligible = [
        i
        for i, (tok, pos) in enumerate(zip(pair.src_tokens, upos))
        if pos in CONTENT_POS and resource.candidates(tok.lower(), pos, direction)
    ]
    if not eligible:
        raise NoEligibleEdit(
            f"no content token with {direction} candidates in pair {pair.id}"
        )
    rng = _seed_rng(rng_seed, pair.id, f"lexsub:{direction}")
    pos_idx = eligible[int(rng.integers(len(eligible)))]
    tok, pos = pair.src_tokens[pos_idx], upos[pos_idx]
    candidates = resource.candidates(tok.lower(), pos, direction)
    best = max(
        candidates,
        key=lambda c: (scorer.score_in_context(pair.src_tokens, pos_idx, c), c),
    )
    new_src = (
        pair.src_tokens[:pos_idx] + (best,) + pair.src_tokens[pos_idx + 1 :]
    )
    dtype = (
        DivergenceType.LEXSUB_GENERALIZE
        if direction == "generalize"
        else DivergenceType.LEXSUB_PARTICULARIZE
    )
    src_labels = tuple(DIV if i == pos_idx else EQ for i in range(len(new_src)))
    div_tgt = align.tgt_for_src({pos_idx})
    tgt_labels = tuple(DIV if j in div_tgt else EQ for j in range(len(pair.tgt_tokens)))
    edited = SentencePair(
        id=f"{pair.id}#{dtype.value}", src_tokens=new_src, tgt_tokens=pair.tgt_tokens
    )
    return DivergentExample(
        base=edited,
        dtype=dtype,
        src_labels=src_labels,
        tgt_labels=tgt_labels,
        seed_id=pair.id,
    )


# ---------------------------------------------------------------------------
# Contrastive set assembly


@dataclass
class GeneratorSuite:
    """Everything needed to perturb one seed: parse, alignment, tags, resources."""

    trees: dict  # pair_id -> DependencyTree over the source side
    alignments: dict  # pair_id -> Alignment
    src_upos: dict  # pair_id -> tuple of UPOS tags (source side)
    tgt_upos: dict  # pair_id -> tuple of UPOS tags (target side)
    donor_pool: PosNgramIndex
    resource: LexicalResource
    scorer: object

    def generate(self, pair, dtype, rng_seed):
        tree = self.trees[pair.id]
        align = self.alignments[pair.id]
        if dtype == DivergenceType.SUBTREE_DELETION:
            # Alternate deletion sides 50/50 per seed.
            side_rng = _seed_rng(rng_seed, pair.id, "subtree-side")
            side = "src" if side_rng.integers(2) == 0 else "tgt"
            try:
                return subtree_deletion(pair, tree, align, side=side, rng_seed=rng_seed)
            except NoEligibleEdit:
                other = "tgt" if side == "src" else "src"
                return subtree_deletion(pair, tree, align, side=other, rng_seed=rng_seed)
        if dtype == DivergenceType.PHRASE_REPLACEMENT:
            return phrase_replacement(
                pair, self.src_upos[pair.id], self.donor_pool, align,
                side="src", rng_seed=rng_seed,
            )
        if dtype == DivergenceType.LEXSUB_GENERALIZE:
            return lexical_substitution(
                pair, self.src_upos[pair.id], self.resource, self.scorer,
                "generalize", align, rng_seed=rng_seed,
            )
        if dtype == DivergenceType.LEXSUB_PARTICULARIZE:
            return lexical_substitution(
                pair, self.src_upos[pair.id], self.resource, self.scorer,
                "particularize", align, rng_seed=rng_seed,
            )
        raise ValueError(f"unknown divergence type {dtype}")


def _item(higher, lower):
    hi_name = (
        "equivalent" if isinstance(higher, SentencePair) else higher.dtype.value
    )
    return ContrastiveItem(
        higher=higher, lower=lower, rank_relation=(hi_name, lower.dtype.value)
    )


def build_contrastive_set(
    seeds, strategy, generators, rng_seed=0, single_type=None, skip_log=None
):
    """Assemble contrastive items from seed equivalents under one of the four
    sampling strategies. Seeds failing a generator are skipped for that pair
    type and recorded in `skip_log` (a list of (seed_id, dtype, reason))."""
    items = []
    log = skip_log if skip_log is not None else []
    all_types = list(DivergenceType)

    def gen(pair, dtype):
        try:
            return generators.generate(pair, dtype, rng_seed)
        except NoEligibleEdit as e:
            log.append((pair.id, dtype.value, str(e)))
            return None

    for pair in seeds:
        if strategy == SamplingStrategy.SINGLE_TYPE:
            if single_type is None:
                raise ValueError("single_type strategy requires a divergence type")
            ex = gen(pair, single_type)
            if ex is not None:
                items.append(_item(pair, ex))
        elif strategy == SamplingStrategy.BALANCED:
            rng = _seed_rng(rng_seed, pair.id, "balanced")
            dtype = all_types[int(rng.integers(len(all_types)))]
            ex = gen(pair, dtype)
            if ex is not None:
                items.append(_item(pair, ex))
        elif strategy == SamplingStrategy.CONCATENATION:
            for dtype in all_types:
                ex = gen(pair, dtype)
                if ex is not None:
                    items.append(_item(pair, ex))
        elif strategy == SamplingStrategy.DIVERGENCE_RANKING:
            lex_gen = gen(pair, DivergenceType.LEXSUB_GENERALIZE)
            lex_part = gen(pair, DivergenceType.LEXSUB_PARTICULARIZE)
            phrase = gen(pair, DivergenceType.PHRASE_REPLACEMENT)
            subtree = gen(pair, DivergenceType.SUBTREE_DELETION)
            if lex_gen is not None:
                items.append(_item(pair, lex_gen))
            if lex_part is not None:
                items.append(_item(pair, lex_part))
            # Lexical substitution outranks the two coarse types; phrase
            # replacement and subtree deletion are never ranked against
            # each other.
            if lex_gen is not None and phrase is not None:
                items.append(_item(lex_gen, phrase))
            if lex_part is not None and subtree is not None:
                items.append(_item(lex_part, subtree))
        else:
            raise ValueError(f"unknown strategy {strategy}")
    return items


def write_items_jsonl(items, path):
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")


def read_items_jsonl(path):
    items = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                items.append(ContrastiveItem.from_dict(json.loads(line)))
    return items
