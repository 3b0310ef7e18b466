"""Trainable sentence-pair divergence scorer.

Mean-pooled trainable embeddings per side feed a two-layer sentence head
producing a scalar score F(x); a token head over each token embedding plus a
side flag produces per-token EQ/DIV logits. Training objectives: binary
cross-entropy, margin ranking over contrastive pairs, and the multi-task sum
of the margin term and mean token-level cross-entropy. All gradients are
hand-derived and verified against finite differences.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import SentencePair
from .synth import DIV, EQ

__all__ = [
    "UNK",
    "Objective",
    "ScorerParams",
    "TrainConfig",
    "Prediction",
    "build_vocab",
    "forward",
    "margin_loss",
    "ce_loss",
    "multitask_loss",
    "grad_check",
    "predict",
    "train",
    "calibrate_bias",
    "pairwise_ranking_accuracy",
    "word_labels_from_subwords",
]

UNK = "<unk>"
TOKEN_CLASSES = (EQ, DIV)  # logit order: index 0 = EQ, index 1 = DIV

CHECKPOINT_VERSION = 1


class Objective(str, Enum):
    CE_RANDOM = "ce_random"
    CE_CONTRASTIVE = "ce_contrastive"
    MARGIN = "margin"
    MULTITASK = "multitask"


def build_vocab(token_iterables):
    """Token -> index map over training tokens, with UNK at index 0."""
    vocab = {UNK: 0}
    for tokens in token_iterables:
        for tok in tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


@dataclass
class ScorerParams:
    """All trainable parameters plus the vocabulary that indexes the embeddings."""

    vocab: dict
    emb: np.ndarray  # |V| x d
    W1: np.ndarray  # h x 2d   sentence head layer 1
    b1: np.ndarray  # h
    w2: np.ndarray  # h        sentence head layer 2
    b2: float
    U1: np.ndarray  # h x (d+1) token head layer 1 (embedding + side flag)
    c1: np.ndarray  # h
    U2: np.ndarray  # 2 x h    token head layer 2
    c2: np.ndarray  # 2

    @classmethod
    def init(cls, vocab, d=64, h=128, rng_seed=0, scale=0.1):
        rng = np.random.default_rng(rng_seed)
        v = len(vocab)
        return cls(
            vocab=dict(vocab),
            emb=rng.normal(0.0, scale, (v, d)),
            W1=rng.normal(0.0, scale, (h, 2 * d)),
            b1=np.zeros(h),
            w2=rng.normal(0.0, scale, h),
            b2=0.0,
            U1=rng.normal(0.0, scale, (h, d + 1)),
            c1=np.zeros(h),
            U2=rng.normal(0.0, scale, (2, h)),
            c2=np.zeros(2),
        )

    @property
    def d(self):
        return self.emb.shape[1]

    @property
    def h(self):
        return self.W1.shape[0]

    _ARRAY_FIELDS = ("emb", "W1", "b1", "w2", "U1", "c1", "U2", "c2")
    _SCALAR_FIELDS = ("b2",)

    def token_ids(self, tokens):
        unk = self.vocab[UNK]
        return np.array([self.vocab.get(t, unk) for t in tokens], dtype=np.int64)

    def zero_grads(self):
        g = {name: np.zeros_like(getattr(self, name)) for name in self._ARRAY_FIELDS}
        g["b2"] = 0.0
        return g

    def copy(self):
        return ScorerParams(
            vocab=dict(self.vocab),
            **{name: getattr(self, name).copy() for name in self._ARRAY_FIELDS},
            b2=float(self.b2),
        )

    def flat(self):
        parts = [getattr(self, name).ravel() for name in self._ARRAY_FIELDS]
        parts.append(np.array([self.b2]))
        return np.concatenate(parts)

    def set_flat(self, vec):
        offset = 0
        for name in self._ARRAY_FIELDS:
            arr = getattr(self, name)
            size = arr.size
            arr[...] = vec[offset : offset + size].reshape(arr.shape)
            offset += size
        self.b2 = float(vec[offset])

    def save(self, path):
        payload = {
            "version": CHECKPOINT_VERSION,
            "vocab": self.vocab,
            "dims": {"d": int(self.d), "h": int(self.h)},
            "b2": float(self.b2),
        }
        for name in self._ARRAY_FIELDS:
            payload[name] = getattr(self, name).tolist()
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        arrays = {
            name: np.asarray(payload[name], dtype=np.float64)
            for name in cls._ARRAY_FIELDS
        }
        return cls(vocab=payload["vocab"], b2=float(payload["b2"]), **arrays)


@dataclass
class TrainConfig:
    margin: float = 5.0
    learning_rate: float = 1e-3
    max_epochs: int = 5
    batch_size: int = 16
    objective: Objective = Objective.MULTITASK
    rng_seed: int = 0
    token_loss_weight: float = 1.0  # literal objective uses 1:1 weighting
    d: int = 64
    h: int = 128

    def __post_init__(self):
        self.objective = Objective(self.objective)
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.objective in (Objective.MARGIN, Objective.MULTITASK) and self.margin <= 0:
            raise ValueError("margin must be positive for margin objectives")


@dataclass
class Prediction:
    score: float
    p_equivalent: float
    sentence_label: str  # "Equivalent" | "Divergent"
    src_token_labels: tuple
    tgt_token_labels: tuple


# ---------------------------------------------------------------------------
# Forward / backward


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _forward_cache(params, pair):
    if not pair.src_tokens or not pair.tgt_tokens:
        raise ValueError(f"pair {pair.id} has an empty side")
    ids_s = params.token_ids(pair.src_tokens)
    ids_t = params.token_ids(pair.tgt_tokens)
    Es = params.emb[ids_s]  # Ts x d
    Et = params.emb[ids_t]  # Tt x d
    ms = Es.mean(axis=0)
    mt = Et.mean(axis=0)
    u = np.concatenate([ms, mt])
    a1 = params.W1 @ u + params.b1
    h1 = np.tanh(a1)
    score = float(params.w2 @ h1 + params.b2)

    def token_head(E, flag):
        X = np.concatenate([E, np.full((E.shape[0], 1), flag)], axis=1)  # T x (d+1)
        A = X @ params.U1.T + params.c1  # T x h
        H = np.tanh(A)
        logits = H @ params.U2.T + params.c2  # T x 2
        return X, H, logits

    Xs, Hs, logits_s = token_head(Es, 0.0)
    Xt, Ht, logits_t = token_head(Et, 1.0)
    return {
        "ids_s": ids_s,
        "ids_t": ids_t,
        "u": u,
        "h1": h1,
        "score": score,
        "Xs": Xs,
        "Hs": Hs,
        "logits_s": logits_s,
        "Xt": Xt,
        "Ht": Ht,
        "logits_t": logits_t,
    }


def forward(params, pair):
    """Score a pair; returns (score, (src_token_logits, tgt_token_logits))."""
    c = _forward_cache(params, pair)
    return c["score"], (c["logits_s"], c["logits_t"])


def _backward_score(params, cache, dscore, grads):
    grads["w2"] += dscore * cache["h1"]
    grads["b2"] += dscore
    da1 = dscore * params.w2 * (1.0 - cache["h1"] ** 2)
    grads["W1"] += np.outer(da1, cache["u"])
    grads["b1"] += da1
    du = params.W1.T @ da1
    d = params.d
    ids_s, ids_t = cache["ids_s"], cache["ids_t"]
    np.add.at(grads["emb"], ids_s, du[:d] / len(ids_s))
    np.add.at(grads["emb"], ids_t, du[d:] / len(ids_t))


def _backward_token_head(params, cache, dlogits_s, dlogits_t, grads):
    d = params.d
    for X, H, dlogits, ids in (
        (cache["Xs"], cache["Hs"], dlogits_s, cache["ids_s"]),
        (cache["Xt"], cache["Ht"], dlogits_t, cache["ids_t"]),
    ):
        grads["U2"] += dlogits.T @ H
        grads["c2"] += dlogits.sum(axis=0)
        dH = dlogits @ params.U2
        dA = dH * (1.0 - H**2)
        grads["U1"] += dA.T @ X
        grads["c1"] += dA.sum(axis=0)
        dX = dA @ params.U1
        np.add.at(grads["emb"], ids, dX[:, :d])


# ---------------------------------------------------------------------------
# Losses


def margin_loss(score_x, score_y, margin):
    """Hinge on the score difference: max{0, margin - F(x) + F(y)}.

    Accepts scalars or equal-length arrays; array inputs return the batch mean.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    vals = np.maximum(0.0, margin - np.asarray(score_x) + np.asarray(score_y))
    return float(np.mean(vals))


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _token_ce(logits_s, logits_t, labels):
    """Mean token cross-entropy over both sides; labels run src then tgt."""
    logits = np.concatenate([logits_s, logits_t], axis=0)
    if len(labels) != logits.shape[0]:
        raise ValueError(
            f"label sequence length {len(labels)} does not match {logits.shape[0]} tokens"
        )
    targets = np.array([TOKEN_CLASSES.index(z) for z in labels])
    probs = _softmax(logits)
    ce = -np.log(probs[np.arange(len(targets)), targets])
    return float(ce.mean()), probs, targets


def _ce_from_score(score, label_equivalent):
    p = _sigmoid(score)
    y = 1.0 if label_equivalent else 0.0
    # clamp for numerical safety at saturated scores
    p = min(max(p, 1e-15), 1.0 - 1e-15)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    dscore = p - y
    return float(loss), dscore


def ce_loss(params, pair, label_equivalent):
    """Binary cross-entropy of logistic(F(x)) against the sentence label."""
    score, _ = forward(params, pair)
    loss, _ = _ce_from_score(score, label_equivalent)
    return loss


def multitask_loss(params, item, margin, token_loss_weight=1.0):
    """Margin term on (higher, lower) plus mean token CE over lower's labels."""
    loss, _ = _multitask_loss_grads(params, item, margin, token_loss_weight, grads=None)
    return loss


def _multitask_loss_grads(params, item, margin, token_loss_weight, grads):
    cx = _forward_cache(params, item.higher_pair)
    cy = _forward_cache(params, item.lower_pair)
    slack = margin - cx["score"] + cy["score"]
    margin_term = max(0.0, slack)
    labels = item.token_labels
    token_term, probs, targets = _token_ce(cy["logits_s"], cy["logits_t"], labels)
    loss = margin_term + token_loss_weight * token_term

    if grads is not None:
        if slack > 0:
            _backward_score(params, cx, -1.0, grads)
            _backward_score(params, cy, +1.0, grads)
        n_tokens = len(labels)
        dlogits = probs.copy()
        dlogits[np.arange(n_tokens), targets] -= 1.0
        dlogits *= token_loss_weight / n_tokens
        ns = cy["logits_s"].shape[0]
        _backward_token_head(params, cy, dlogits[:ns], dlogits[ns:], grads)
    return loss, (margin_term, token_term)


def _margin_loss_grads(params, item, margin, grads):
    cx = _forward_cache(params, item.higher_pair)
    cy = _forward_cache(params, item.lower_pair)
    slack = margin - cx["score"] + cy["score"]
    loss = max(0.0, slack)
    if grads is not None and slack > 0:
        _backward_score(params, cx, -1.0, grads)
        _backward_score(params, cy, +1.0, grads)
    return loss


def _ce_example_grads(params, pair, label_equivalent, grads):
    cache = _forward_cache(params, pair)
    loss, dscore = _ce_from_score(cache["score"], label_equivalent)
    if grads is not None:
        _backward_score(params, cache, dscore, grads)
    return loss


# ---------------------------------------------------------------------------
# Gradient check


def grad_check(params, items, margin=5.0, eps=1e-5, n_coords=100, rng_seed=0):
    """Max relative error between analytic and central finite-difference
    gradients of the mean multi-task loss, over a random coordinate sample."""
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    if not isinstance(items, (list, tuple)):
        items = [items]
    work = params.copy()
    grads = work.zero_grads()
    for item in items:
        _multitask_loss_grads(work, item, margin, 1.0, grads)
    flat_grad = np.concatenate(
        [grads[name].ravel() for name in ScorerParams._ARRAY_FIELDS]
        + [np.array([grads["b2"]])]
    ) / len(items)

    theta = work.flat()
    rng = np.random.default_rng(rng_seed)
    coords = rng.choice(theta.size, size=min(n_coords, theta.size), replace=False)

    def mean_loss(vec):
        work.set_flat(vec)
        return float(
            np.mean([multitask_loss(work, it, margin) for it in items])
        )

    max_rel = 0.0
    for c in coords:
        orig = theta[c]
        theta[c] = orig + eps
        lp = mean_loss(theta)
        theta[c] = orig - eps
        lm = mean_loss(theta)
        theta[c] = orig
        numeric = (lp - lm) / (2 * eps)
        # absolute floor keeps near-zero coordinates from amplifying
        # finite-difference roundoff into spurious relative error
        denom = max(abs(numeric), abs(flat_grad[c]), 1e-5)
        max_rel = max(max_rel, abs(numeric - flat_grad[c]) / denom)
    work.set_flat(theta)
    return max_rel


# ---------------------------------------------------------------------------
# Prediction


def predict(params, pair, threshold=0.5, subword_groups=None):
    """Sentence and token predictions for a pair.

    `subword_groups`, when given, is a (src_groups, tgt_groups) pair where each
    side lists, per word, that word's subword tokens; the network then runs on
    the subword sequences and a word is DIV if any of its subwords is DIV.
    """
    if subword_groups is not None:
        src_groups, tgt_groups = subword_groups
        flat = SentencePair(
            id=pair.id,
            src_tokens=tuple(t for g in src_groups for t in g),
            tgt_tokens=tuple(t for g in tgt_groups for t in g),
        )
        score, (logits_s, logits_t) = forward(params, flat)
        src_labels = _merge_groups(logits_s, src_groups)
        tgt_labels = _merge_groups(logits_t, tgt_groups)
    else:
        score, (logits_s, logits_t) = forward(params, pair)
        src_labels = tuple(TOKEN_CLASSES[i] for i in logits_s.argmax(axis=1))
        tgt_labels = tuple(TOKEN_CLASSES[i] for i in logits_t.argmax(axis=1))
    p_eq = float(_sigmoid(score))
    label = "Equivalent" if p_eq > threshold else "Divergent"
    return Prediction(
        score=score,
        p_equivalent=p_eq,
        sentence_label=label,
        src_token_labels=src_labels,
        tgt_token_labels=tgt_labels,
    )


def _merge_groups(logits, groups):
    subword = [TOKEN_CLASSES[i] for i in logits.argmax(axis=1)]
    return word_labels_from_subwords(subword, [len(g) for g in groups])


def word_labels_from_subwords(subword_labels, group_sizes):
    """Word is DIV if any of its subword units is DIV."""
    out = []
    pos = 0
    for size in group_sizes:
        chunk = subword_labels[pos : pos + size]
        out.append(DIV if DIV in chunk else EQ)
        pos += size
    if pos != len(subword_labels):
        raise ValueError("group sizes do not cover the subword sequence")
    return tuple(out)


# ---------------------------------------------------------------------------
# Training


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = params.zero_grads()
        self.v = params.zero_grads()

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name in ScorerParams._ARRAY_FIELDS:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            update = (self.m[name] / b1t) / (np.sqrt(self.v[name] / b2t) + self.eps)
            getattr(params, name)[...] -= self.lr * update
        g = grads["b2"]
        self.m["b2"] = self.beta1 * self.m["b2"] + (1 - self.beta1) * g
        self.v["b2"] = self.beta2 * self.v["b2"] + (1 - self.beta2) * g * g
        params.b2 -= self.lr * (self.m["b2"] / b1t) / (
            np.sqrt(self.v["b2"] / b2t) + self.eps
        )


def _vocab_from_items(dataset, objective):
    streams = []
    if objective in (Objective.CE_RANDOM,):
        for pair, _label in dataset:
            streams.append(pair.src_tokens)
            streams.append(pair.tgt_tokens)
    else:
        for item in dataset:
            for p in (item.higher_pair, item.lower_pair):
                streams.append(p.src_tokens)
                streams.append(p.tgt_tokens)
    return build_vocab(streams)


def pairwise_ranking_accuracy(params, items):
    """Fraction of contrastive items whose higher member outscores the lower."""
    if not items:
        return 0.0
    wins = 0
    for item in items:
        sx, _ = forward(params, item.higher_pair)
        sy, _ = forward(params, item.lower_pair)
        wins += sx > sy
    return wins / len(items)


def _labeled_accuracy(params, labeled, threshold=0.5):
    if not labeled:
        return 0.0
    hits = 0
    for pair, is_equiv in labeled:
        pred = predict(params, pair, threshold=threshold)
        hits += (pred.sentence_label == "Equivalent") == is_equiv
    return hits / len(labeled)


def train(dataset, dev, cfg, log_path=None):
    """Minibatch Adam training under cfg.objective.

    `dataset`/`dev` are lists of ContrastiveItem for margin/multitask, or
    (SentencePair, is_equivalent) tuples for ce_random. For ce_contrastive,
    pass ContrastiveItem lists; both members of each item enter the same batch
    as independent labeled examples. Returns (best_params, history); history
    has one entry per epoch with train loss and the dev metric, and is also
    appended to `log_path` as JSONL when given.
    """
    if not dataset:
        raise ValueError("empty training set")
    objective = cfg.objective
    vocab = _vocab_from_items(dataset, objective)
    params = ScorerParams.init(vocab, d=cfg.d, h=cfg.h, rng_seed=cfg.rng_seed)
    opt = _Adam(params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.rng_seed)

    best_params = params.copy()
    best_metric = -np.inf
    history = []
    log_f = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            t0 = time.monotonic()
            order = rng.permutation(len(dataset))
            total_loss = 0.0
            n_batches = 0
            for start in range(0, len(order), cfg.batch_size):
                batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
                grads = params.zero_grads()
                batch_loss = 0.0
                n_units = 0
                for entry in batch:
                    if objective == Objective.MULTITASK:
                        loss, _ = _multitask_loss_grads(
                            params, entry, cfg.margin, cfg.token_loss_weight, grads
                        )
                        batch_loss += loss
                        n_units += 1
                    elif objective == Objective.MARGIN:
                        batch_loss += _margin_loss_grads(params, entry, cfg.margin, grads)
                        n_units += 1
                    elif objective == Objective.CE_RANDOM:
                        pair, is_equiv = entry
                        batch_loss += _ce_example_grads(params, pair, is_equiv, grads)
                        n_units += 1
                    elif objective == Objective.CE_CONTRASTIVE:
                        batch_loss += _ce_example_grads(
                            params, entry.higher_pair,
                            isinstance(entry.higher, SentencePair), grads
                        )
                        batch_loss += _ce_example_grads(
                            params, entry.lower_pair, False, grads
                        )
                        n_units += 2
                if n_units == 0:
                    continue
                batch_loss /= n_units
                if not np.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch}, batch {n_batches}"
                    )
                for name in ScorerParams._ARRAY_FIELDS:
                    grads[name] /= n_units
                grads["b2"] /= n_units
                opt.step(params, grads)
                total_loss += batch_loss
                n_batches += 1

            train_loss = total_loss / max(n_batches, 1)
            if objective in (Objective.MARGIN, Objective.MULTITASK):
                dev_metric = pairwise_ranking_accuracy(params, dev)
            elif objective == Objective.CE_CONTRASTIVE:
                labeled = [(it.higher_pair, isinstance(it.higher, SentencePair)) for it in dev]
                labeled += [(it.lower_pair, False) for it in dev]
                dev_metric = _labeled_accuracy(params, labeled)
            else:
                dev_metric = _labeled_accuracy(params, dev)
            entry = {
                "epoch": epoch,
                "train_loss": train_loss,
                "dev_metric": dev_metric,
                "wallclock_s": time.monotonic() - t0,
            }
            history.append(entry)
            if log_f:
                log_f.write(json.dumps(entry) + "\n")
                log_f.flush()
            if dev_metric > best_metric:
                best_metric = dev_metric
                best_params = params.copy()
    finally:
        if log_f:
            log_f.close()
    return best_params, history


def calibrate_bias(params, labeled_dev):
    """Shift the sentence-head output bias so the 0.5 probability threshold best
    separates the labeled dev pairs (weighted-F1-optimal cut on raw scores).

    Margin-trained scores are only relatively calibrated; this fits the
    logistic bias before thresholded classification.
    """
    scored = []
    for pair, is_equiv in labeled_dev:
        s, _ = forward(params, pair)
        scored.append((s, is_equiv))
    scored.sort()
    scores = np.array([s for s, _ in scored])
    # candidate cuts between adjacent distinct scores, plus the extremes
    cuts = [scores[0] - 1.0]
    cuts += [(a + b) / 2 for a, b in zip(scores[:-1], scores[1:]) if a != b]
    cuts.append(scores[-1] + 1.0)
    best_cut, best_f1 = cuts[0], -1.0
    for cut in cuts:
        f1 = _weighted_f1_at_cut(scored, cut)
        if f1 > best_f1:
            best_f1, best_cut = f1, cut
    out = params.copy()
    out.b2 = float(out.b2 - best_cut)
    return out


def _weighted_f1_at_cut(scored, cut):
    # equivalent iff score > cut
    f1s, supports = [], []
    for positive in (True, False):
        tp = sum(1 for s, y in scored if (s > cut) == positive and y == positive)
        fp = sum(1 for s, y in scored if (s > cut) == positive and y != positive)
        fn = sum(1 for s, y in scored if (s > cut) != positive and y == positive)
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
        supports.append(sum(1 for _, y in scored if y == positive))
    n = sum(supports)
    return sum(f * s / n for f, s in zip(f1s, supports)) if n else 0.0
