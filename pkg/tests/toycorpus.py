"""Deterministic toy parallel corpus for tests.

Each pair is a random token sequence over a small POS-typed vocabulary with a
random single-rooted dependency tree; the target side is a token-wise identity
pseudo-translation (same surface forms, identity alignment), so a mean-pooled
scorer can detect edits as a mismatch between the two sides. Content words
carry one hypernym ("<w>_gen") and one hyponym ("<w>_spec") in the lexical
resource, so every perturbation type is applicable to (almost) every pair.
"""

from __future__ import annotations

import numpy as np

from semdiv.corpus import Alignment, DependencyTree, SentencePair
from semdiv.synth import (
    GeneratorSuite,
    LexicalResource,
    PosNgramIndex,
    UnigramScorer,
    eligible_subtrees,
)

_POS_VOCAB = {
    "DET": ["the", "a", "this", "that", "some"],
    "PRON": ["he", "she", "they", "it", "we"],
    "NOUN": [f"noun{i}" for i in range(60)],
    "VERB": [f"verb{i}" for i in range(40)],
    "ADJ": [f"adj{i}" for i in range(30)],
    "ADV": [f"adv{i}" for i in range(15)],
}
_POS_TAGS = list(_POS_VOCAB)
_POS_WEIGHTS = np.array([0.12, 0.08, 0.33, 0.25, 0.14, 0.08])


def _random_tree(n, rng):
    # attach each node (in a random order) to a previously placed node
    order = rng.permutation(n)
    heads = [0] * n
    for pos, node in enumerate(order):
        if pos == 0:
            heads[node] = 0
        else:
            parent = order[int(rng.integers(0, pos))]
            heads[node] = int(parent) + 1
    return tuple(heads)


def _make_sentence(rng, min_len=8, max_len=14):
    n = int(rng.integers(min_len, max_len + 1))
    tags, tokens = [], []
    for _ in range(n):
        tag = _POS_TAGS[int(rng.choice(len(_POS_TAGS), p=_POS_WEIGHTS))]
        tags.append(tag)
        tokens.append(_POS_VOCAB[tag][int(rng.integers(len(_POS_VOCAB[tag])))])
    return tuple(tokens), tuple(tags), _random_tree(n, rng)


def build_lexical_resource():
    # candidates are ordinary same-POS vocabulary items, so substituted
    # tokens look like natural text and only the src/tgt mismatch gives
    # the edit away
    res = LexicalResource()
    for pos in ("NOUN", "VERB", "ADJ"):
        words = _POS_VOCAB[pos]
        for k, w in enumerate(words):
            res.add(w, pos, "hyper", words[(k + 7) % len(words)])
            res.add(w, pos, "hypo", words[(k + 13) % len(words)])
    return res


def make_corpus(n_pairs, rng_seed=0):
    """Build (pairs, suite) where suite is ready for build_contrastive_set."""
    rng = np.random.default_rng(rng_seed)
    pairs, trees, aligns, src_upos = [], {}, {}, {}
    i = 0
    while len(pairs) < n_pairs:
        tokens, tags, heads = _make_sentence(rng)
        tree = DependencyTree(heads=heads, upos=tags)
        pair = SentencePair(
            id=f"toy-{i:05d}",
            src_tokens=tokens,
            tgt_tokens=tokens,
        )
        i += 1
        align = Alignment(frozenset((j, j) for j in range(len(tokens))))
        # require every perturbation type to be applicable
        if not eligible_subtrees(tree, align, pair, "src"):
            continue
        if not any(t in ("NOUN", "VERB", "ADJ") for t in tags):
            continue
        pairs.append(pair)
        trees[pair.id] = tree
        aligns[pair.id] = align
        src_upos[pair.id] = tags

    donor_pool = PosNgramIndex.from_sentences(
        (p.id, p.src_tokens, src_upos[p.id]) for p in pairs
    )
    suite = GeneratorSuite(
        trees=trees,
        alignments=aligns,
        src_upos=src_upos,
        tgt_upos={},
        donor_pool=donor_pool,
        resource=build_lexical_resource(),
        scorer=UnigramScorer(t for p in pairs for t in p.src_tokens),
    )
    return pairs, suite


def write_corpus_files(pairs, suite, dirpath):
    """Write the toy corpus in the CLI's input formats; returns the paths."""
    from semdiv.corpus import serialize_conllu

    dirpath.mkdir(parents=True, exist_ok=True)
    bitext = dirpath / "bitext.tsv"
    with open(bitext, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(f"{p.id}\t{p.src_raw}\t{p.tgt_raw}\n")
    conllu = dirpath / "parses.conllu"
    with open(conllu, "w", encoding="utf-8") as f:
        f.write(
            serialize_conllu(
                [(p.src_tokens, suite.trees[p.id]) for p in pairs]
            )
        )
    align = dirpath / "alignments.pharaoh"
    with open(align, "w", encoding="utf-8") as f:
        for p in pairs:
            links = sorted(suite.alignments[p.id].links)
            f.write(" ".join(f"{i}-{j}" for i, j in links) + "\n")
    lexicon = dirpath / "lexicon.tsv"
    with open(lexicon, "w", encoding="utf-8") as f:
        for pos in ("NOUN", "VERB", "ADJ"):
            words = _POS_VOCAB[pos]
            for k, w in enumerate(words):
                f.write(f"{w}\t{pos}\thyper\t{words[(k + 7) % len(words)]}\n")
                f.write(f"{w}\t{pos}\thypo\t{words[(k + 13) % len(words)]}\n")
    return {"bitext": bitext, "conllu": conllu, "alignments": align, "lexicon": lexicon}
