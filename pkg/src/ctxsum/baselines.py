"""Classical comparators: fuzzy (random), Naive Bayes, linear SVM, LSA,
LexRank and TextRank."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Document, IdfTable, Sentence


@dataclass
class SentenceGraph:
    nodes: list[int]
    weights: np.ndarray  # symmetric, nonnegative, zero diagonal
    damping: float = 0.85
    threshold: float = 0.0


# --- fuzzy ------------------------------------------------------------------

def fuzzy_rank(doc: Document, rng) -> list[int]:
    return [int(i) for i in rng.permutation(len(doc.sentences))]


def fuzzy_summarize(doc: Document, n: int, rng) -> list[Sentence]:
    """n distinct uniformly random sentences, in document order."""
    picked = sorted(fuzzy_rank(doc, rng)[:n])
    return [doc.sentences[i] for i in picked]


# --- naive bayes ---------------------------------------------------------------

@dataclass
class NaiveBayesModel:
    classes: list
    log_prior: np.ndarray          # (C,)
    log_likelihood: np.ndarray     # (C, V) add-one smoothed
    vocab: dict[str, int]


def nb_train(bags: list[dict], labels: list) -> NaiveBayesModel:
    """Multinomial NB with add-one smoothing over bag-of-words counts."""
    classes = sorted(set(labels))
    vocab: dict[str, int] = {}
    for bag in bags:
        for word in bag:
            if word not in vocab:
                vocab[word] = len(vocab)
    counts = np.zeros((len(classes), len(vocab)), dtype=np.float64)
    class_totals = np.zeros(len(classes), dtype=np.float64)
    class_index = {c: i for i, c in enumerate(classes)}
    for bag, label in zip(bags, labels):
        ci = class_index[label]
        class_totals[ci] += 1
        for word, count in bag.items():
            counts[ci, vocab[word]] += count
    log_prior = np.log(class_totals / class_totals.sum())
    smoothed = counts + 1.0
    log_likelihood = np.log(smoothed / smoothed.sum(axis=1, keepdims=True))
    return NaiveBayesModel(classes, log_prior, log_likelihood, vocab)


def nb_predict(model: NaiveBayesModel, bag: dict) -> dict:
    """Posterior class probabilities; unseen words are ignored."""
    scores = model.log_prior.copy()
    for word, count in bag.items():
        col = model.vocab.get(word)
        if col is not None:
            scores += count * model.log_likelihood[:, col]
    scores -= scores.max()
    probs = np.exp(scores)
    probs /= probs.sum()
    return {c: float(p) for c, p in zip(model.classes, probs)}


# --- linear svm ------------------------------------------------------------------

@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float


def svm_train(features: np.ndarray, labels, lam: float = 1e-3,
              epochs: int = 200, lr: float = 0.5) -> LinearSvmModel:
    """Full-batch subgradient descent on hinge loss + L2; labels in {-1,+1}.
    Zero initialization makes training fully deterministic."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for t in range(1, epochs + 1):
        step = min(lr / t, 1.0 / lam)  # keep the L2 term contractive
        margins = y * (x @ w + b)
        active = margins < 1.0
        grad_w = lam * w - (y[active, None] * x[active]).sum(axis=0) / n
        grad_b = -y[active].sum() / n
        w -= step * grad_w
        b -= step * grad_b
    return LinearSvmModel(weights=w, bias=b)


def svm_predict(model: LinearSvmModel, features: np.ndarray) -> np.ndarray:
    """Signed margin; positive sign is the positive class."""
    return np.asarray(features, dtype=np.float64) @ model.weights + model.bias


# --- tf-idf helpers ---------------------------------------------------------------

def document_idf(doc: Document) -> dict[str, float]:
    """Sentence-level IDF inside one document (used when no corpus table is
    supplied): ln(num_sentences / sentence frequency)."""
    n = max(1, len(doc.sentences))
    sf = Counter()
    for s in doc.sentences:
        sf.update(set(s.tokens))
    return {w: math.log(n / f) + 1.0 for w, f in sf.items()}


def _idf_lookup(idf, word: str) -> float:
    if idf is None:
        return 1.0
    if isinstance(idf, IdfTable):
        return idf.idf.get(word, 0.0)
    return idf.get(word, 0.0)


def tfidf_vector(tokens, idf=None) -> dict[str, float]:
    counts = Counter(tokens)
    return {w: c * _idf_lookup(idf, w) for w, c in counts.items()}


def tfidf_cosine(a: dict, b: dict) -> float:
    if not a or not b:
        return 0.0
    dot = sum(v * b[w] for w, v in a.items() if w in b)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


# --- LSA ---------------------------------------------------------------------------

def jacobi_svd(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """One-sided Jacobi SVD: returns (singular values desc, V columns).
    Columns of `a` are orthogonalized in place by plane rotations; V
    accumulates them, so a's column space maps onto sentence loadings."""
    work = np.array(a, dtype=np.float64)
    m, n = work.shape
    v = np.eye(n)
    for _sweep in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = float(work[:, i] @ work[:, i])
                beta = float(work[:, j] @ work[:, j])
                gamma = float(work[:, i] @ work[:, j])
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                off = max(off, abs(gamma) / max(math.sqrt(alpha * beta), 1e-300))
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                gi = work[:, i].copy()
                work[:, i] = c * gi - s * work[:, j]
                work[:, j] = s * gi + c * work[:, j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
        if off < 1e-14:
            break
    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    return sigma[order], v[:, order]


def lsa_rank(doc: Document, idf=None) -> list[int]:
    """Sentence order by the top singular components of the term-sentence
    TF-IDF matrix: each component contributes its max-|loading| unpicked
    sentence; leftover sentences follow in document order."""
    n = len(doc.sentences)
    vocab: dict[str, int] = {}
    for s in doc.sentences:
        for w in s.tokens:
            if w not in vocab:
                vocab[w] = len(vocab)
    if not vocab:
        return list(range(n))
    idf = idf if idf is not None else document_idf(doc)
    a = np.zeros((len(vocab), n))
    for j, s in enumerate(doc.sentences):
        for w, val in tfidf_vector(s.tokens, idf).items():
            a[vocab[w], j] = val
    sigma, v = jacobi_svd(a)
    order: list[int] = []
    picked = set()
    for k in range(len(sigma)):
        if sigma[k] <= 1e-12:
            break
        loadings = np.abs(v[:, k])
        candidates = sorted(range(n), key=lambda i: (-loadings[i], i))
        for i in candidates:
            if i not in picked:
                order.append(i)
                picked.add(i)
                break
    order.extend(i for i in range(n) if i not in picked)
    return order


def lsa_summarize(doc: Document, n: int, idf=None) -> list[Sentence]:
    picked = sorted(lsa_rank(doc, idf)[:n])
    return [doc.sentences[i] for i in picked]


# --- PageRank machinery --------------------------------------------------------------

def pagerank_scores(weights: np.ndarray, damping: float = 0.85,
                    tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Damped stationary distribution of the row-normalized weight matrix.
    Dangling rows teleport uniformly; scores are nonnegative and sum to 1."""
    n = weights.shape[0]
    if n == 1:
        return np.ones(1)
    p = np.array(weights, dtype=np.float64)
    row_sums = p.sum(axis=1)
    for i in range(n):
        if row_sums[i] <= 0:
            p[i, :] = 1.0 / n
        else:
            p[i, :] /= row_sums[i]
    x = np.full(n, 1.0 / n)
    for _it in range(max_iter):
        x_next = (1.0 - damping) / n + damping * (p.T @ x)
        if np.abs(x_next - x).sum() < tol:
            return x_next
        x = x_next
    raise RuntimeError(f"pagerank failed to converge in {max_iter} iterations")


def lexrank_graph(doc: Document, threshold: float = 0.1, damping: float = 0.85,
                  idf=None) -> SentenceGraph:
    n = len(doc.sentences)
    idf = idf if idf is not None else document_idf(doc)
    vectors = [tfidf_vector(s.tokens, idf) for s in doc.sentences]
    weights = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sim = tfidf_cosine(vectors[i], vectors[j])
            if sim >= threshold:
                weights[i, j] = weights[j, i] = sim
    return SentenceGraph(nodes=list(range(n)), weights=weights,
                         damping=damping, threshold=threshold)


def lexrank_scores(doc: Document, threshold: float = 0.1,
                   damping: float = 0.85, idf=None) -> np.ndarray:
    graph = lexrank_graph(doc, threshold, damping, idf)
    return pagerank_scores(graph.weights, graph.damping)


def lexrank(doc: Document, threshold: float = 0.1, damping: float = 0.85,
            n: int = 3, idf=None) -> list[Sentence]:
    scores = lexrank_scores(doc, threshold, damping, idf)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [doc.sentences[i] for i in sorted(order[:n])]


def textrank_graph(doc: Document, damping: float = 0.85) -> SentenceGraph:
    n = len(doc.sentences)
    weights = np.zeros((n, n))
    token_sets = [set(s.tokens) for s in doc.sentences]
    for i in range(n):
        for j in range(i + 1, n):
            li, lj = len(doc.sentences[i].tokens), len(doc.sentences[j].tokens)
            if li < 2 or lj < 2:
                continue
            overlap = len(token_sets[i] & token_sets[j])
            if overlap:
                weights[i, j] = weights[j, i] = overlap / (math.log(li) + math.log(lj))
    return SentenceGraph(nodes=list(range(n)), weights=weights, damping=damping)


def textrank_scores(doc: Document, damping: float = 0.85) -> np.ndarray:
    graph = textrank_graph(doc, damping)
    return pagerank_scores(graph.weights, graph.damping)


def textrank(doc: Document, damping: float = 0.85, n: int = 3) -> list[Sentence]:
    scores = textrank_scores(doc, damping)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [doc.sentences[i] for i in sorted(order[:n])]
