"""Skip-gram negative-sampling word embeddings.

Input vectors trained here form the word-embedding matrix consumed by the
context projection and by all neural models. Training text per document is
title + body, mapped to vocabulary ids (out-of-vocabulary tokens dropped).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .corpus import Corpus, tokenize
from .errors import DimMismatch, EmptyCorpus

NEGATIVE_POWER = 0.75
MIN_LR_FRACTION = 1e-4


@dataclass
class SgnsConfig:
    dim: int = 32           # 300 at paper scale
    window: int = 5
    negatives: int = 5
    epochs: int = 15
    learning_rate: float = 0.025  # linearly decayed over training
    subsample_threshold: float = 0.0
    seed: int = 1


@dataclass
class EmbeddingMatrix:
    input_vectors: np.ndarray   # (N, k) rows are word embeddings
    output_vectors: np.ndarray  # (N, k) context side, training only
    words: list[str]

    @property
    def rows(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, word_id: int) -> np.ndarray:
        return self.input_vectors[word_id]


def cosine(u, v) -> float:
    """Cosine similarity; 0.0 by convention when either vector is all-zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"{u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def generate_skipgram_pairs(token_ids, window: int, rng):
    """(center, context) pairs; per center position the window radius is
    drawn uniformly from 1..window."""
    n = len(token_ids)
    pairs = []
    for i in range(n):
        radius = int(rng.integers(1, window + 1))
        lo = max(0, i - radius)
        hi = min(n, i + radius + 1)
        for j in range(lo, hi):
            if j != i:
                pairs.append((token_ids[i], token_ids[j]))
    return pairs


def unigram_cumweights(counts) -> np.ndarray:
    weights = np.asarray(counts, dtype=np.float64) ** NEGATIVE_POWER
    return np.cumsum(weights)


def negative_sample(counts, n: int, rng) -> np.ndarray:
    """n word ids sampled proportional to count^0.75."""
    if n == 0:
        return np.empty(0, dtype=np.int64)
    cum = unigram_cumweights(counts)
    draws = rng.random(n) * cum[-1]
    return np.searchsorted(cum, draws, side="right").astype(np.int64)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def sgns_step(center: int, context: int, negatives, lr: float,
              matrix: EmbeddingMatrix) -> float:
    """One SGD step of the SGNS logistic loss; returns the pre-update loss
    -log s(u.v_ctx) - sum log s(-u.v_neg)."""
    inp = matrix.input_vectors
    out = matrix.output_vectors
    negatives = np.asarray(negatives, dtype=np.int64)

    # copies: all gradients must come from pre-update values
    u = inp[center].copy()
    v_ctx = out[context].copy()
    v_neg = out[negatives]  # fancy indexing already copies

    pos_score = float(np.dot(u, v_ctx))
    neg_scores = v_neg @ u
    loss = -float(_log_sigmoid(pos_score)) - float(np.sum(_log_sigmoid(-neg_scores)))

    sig_pos = 1.0 / (1.0 + np.exp(-pos_score))
    sig_neg = 1.0 / (1.0 + np.exp(-neg_scores))

    grad_u = (sig_pos - 1.0) * v_ctx + sig_neg @ v_neg
    grad_ctx = (sig_pos - 1.0) * u

    inp[center] = u - lr * grad_u.astype(inp.dtype)
    out[context] = v_ctx - lr * grad_ctx.astype(out.dtype)
    # np.add.at accumulates correctly when an id repeats among the negatives
    np.add.at(out, negatives, (-lr * np.outer(sig_neg, u)).astype(out.dtype))
    return loss


def init_embeddings(n_words: int, dim: int, rng,
                    dtype=np.float32) -> tuple[np.ndarray, np.ndarray]:
    # input rows uniform in [-0.5/k, 0.5/k], output rows zero
    inp = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_words, dim)).astype(dtype)
    out = np.zeros((n_words, dim), dtype=dtype)
    return inp, out


def corpus_token_ids(corpus: Corpus) -> list[list[int]]:
    streams = []
    for doc in corpus.documents:
        tokens = tokenize(doc.title) + tokenize(doc.body)
        ids = [corpus.vocab.index[t] for t in tokens if t in corpus.vocab.index]
        streams.append(ids)
    return streams


def train_sgns(corpus: Corpus, config: SgnsConfig,
               loss_log: list | None = None) -> EmbeddingMatrix:
    """Train SGNS embeddings; deterministic for a fixed (corpus, config, seed)."""
    if not corpus.documents:
        raise EmptyCorpus("no documents")
    streams = corpus_token_ids(corpus)
    total_tokens = sum(len(s) for s in streams)
    if total_tokens == 0:
        raise EmptyCorpus("no in-vocabulary tokens")

    rng = np.random.default_rng(config.seed)
    n_words = len(corpus.vocab)
    inp, out = init_embeddings(n_words, config.dim, rng)
    matrix = EmbeddingMatrix(input_vectors=inp, output_vectors=out,
                             words=list(corpus.vocab.words))

    counts = np.array([corpus.vocab.counts[w] for w in corpus.vocab.words],
                      dtype=np.float64)
    cum = unigram_cumweights(counts)
    freq_frac = counts / counts.sum()

    total_positions = max(1, config.epochs * total_tokens)
    seen_positions = 0
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        epoch_pairs = 0
        for ids in streams:
            if config.subsample_threshold > 0.0:
                t = config.subsample_threshold
                ids = [wid for wid in ids
                       if freq_frac[wid] <= t
                       or rng.random() < np.sqrt(t / freq_frac[wid])]
            pairs = generate_skipgram_pairs(ids, config.window, rng)
            for center, context in pairs:
                decay = max(MIN_LR_FRACTION, 1.0 - seen_positions / total_positions)
                lr = config.learning_rate * decay
                draws = rng.random(config.negatives) * cum[-1]
                negs = np.searchsorted(cum, draws, side="right")
                epoch_loss += sgns_step(center, context, negs, lr, matrix)
                epoch_pairs += 1
            seen_positions += len(ids)
        if loss_log is not None:
            loss_log.append(epoch_loss / max(1, epoch_pairs))
    return matrix


def embeddings_to_checkpoint(matrix: EmbeddingMatrix,
                             config: SgnsConfig) -> Checkpoint:
    return Checkpoint(
        model_kind="sgns",
        config={
            "dim": str(config.dim), "window": str(config.window),
            "negatives": str(config.negatives), "epochs": str(config.epochs),
            "learning_rate": repr(config.learning_rate),
            "subsample_threshold": repr(config.subsample_threshold),
            "seed": str(config.seed),
            "words": "\x1f".join(matrix.words),
        },
        tensors={"input_vectors": matrix.input_vectors,
                 "output_vectors": matrix.output_vectors},
    )


def embeddings_from_checkpoint(ckpt: Checkpoint) -> EmbeddingMatrix:
    if ckpt.model_kind != "sgns":
        raise ValueError(f"not an embedding checkpoint: {ckpt.model_kind}")
    words = ckpt.config["words"].split("\x1f") if ckpt.config["words"] else []
    return EmbeddingMatrix(input_vectors=ckpt.tensors["input_vectors"],
                           output_vectors=ckpt.tensors["output_vectors"],
                           words=words)
