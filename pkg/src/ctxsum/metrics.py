"""Evaluation metrics: n-gram/LCS/BLEU similarity, TF-IDF and topic cosine,
NDCG/MAP ranking quality, and classification reports. All pure functions."""

from __future__ import annotations

import math
from collections import Counter


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def rouge_n(candidate, reference, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap (precision, recall, f1)."""
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    total_c = sum(cand.values())
    total_r = sum(ref.values())
    if total_c == 0 or total_r == 0:
        return (0.0, 0.0, 0.0)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    p = overlap / total_c
    r = overlap / total_r
    return (p, r, _f1(p, r))


def lcs_length(a, b) -> int:
    """Longest common subsequence length, quadratic DP."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_lcs(candidate, reference) -> tuple[float, float, float]:
    if not candidate or not reference:
        return (0.0, 0.0, 0.0)
    length = lcs_length(candidate, reference)
    p = length / len(candidate)
    r = length / len(reference)
    return (p, r, _f1(p, r))


def bleu(candidate, references, max_n: int = 4) -> float:
    """Geometric mean of clipped n-gram precisions with brevity penalty.
    Orders with zero candidate n-grams are skipped rather than zeroing the
    score (needed at single-sentence scale)."""
    if not candidate or not references or all(not r for r in references):
        return 0.0
    log_precisions = []
    for n in range(1, max_n + 1):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            continue
        max_ref = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        overlap = sum(min(count, max_ref[gram]) for gram, count in cand.items())
        if overlap == 0:
            return 0.0
        log_precisions.append(math.log(overlap / total))
    if not log_precisions:
        return 0.0
    c = len(candidate)
    r = min((len(ref) for ref in references),
            key=lambda length: (abs(length - c), length))
    bp = math.exp(1.0 - r / c) if c < r else 1.0
    return bp * math.exp(sum(log_precisions) / len(log_precisions))


def _tfidf_bag(tokens, idf) -> dict[str, float]:
    counts = Counter(tokens)
    if idf is None:
        return {w: float(c) for w, c in counts.items()}
    table = idf.idf if hasattr(idf, "idf") else idf
    return {w: c * table.get(w, 0.0) for w, c in counts.items()}


def _cosine_bags(a: dict, b: dict) -> float:
    dot = sum(v * b[w] for w, v in a.items() if w in b)
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def token_similarity(candidate, reference, idf=None) -> float:
    """Cosine of TF-IDF bag vectors."""
    return _cosine_bags(_tfidf_bag(candidate, idf), _tfidf_bag(reference, idf))


def select_topic_words(doc_tokens, idf, q: int = 20) -> list[str]:
    """Top-q distinct document words by IDF (content words of the source)."""
    table = idf.idf if hasattr(idf, "idf") else idf
    seen = []
    for w in doc_tokens:
        if w in table and w not in seen:
            seen.append(w)
    seen.sort(key=lambda w: (-table[w], w))
    return seen[:q]


def topic_similarity(candidate, reference, topic_words) -> float:
    """Cosine over binary indicator vectors restricted to the topic words."""
    topic = list(topic_words)
    if not topic:
        return 0.0
    cand_set = set(candidate)
    ref_set = set(reference)
    a = {w: 1.0 for w in topic if w in cand_set}
    b = {w: 1.0 for w in topic if w in ref_set}
    return _cosine_bags(a, b)


def ndcg_at_k(relevance, k: int) -> float:
    """Binary or graded NDCG with gain rel_i / log2(i+1); 0 when nothing is
    relevant."""
    rel = list(relevance)[:k]
    dcg = sum(r / math.log2(i + 1) for i, r in enumerate(rel, start=1))
    ideal = sorted(relevance, reverse=True)[:k]
    idcg = sum(r / math.log2(i + 1) for i, r in enumerate(ideal, start=1))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def average_precision_at_k(relevance, k: int) -> float:
    rel = list(relevance)
    n_relevant = sum(1 for r in rel if r > 0)
    if n_relevant == 0:
        return 0.0
    hits = 0
    total = 0.0
    for i, r in enumerate(rel[:k], start=1):
        if r > 0:
            hits += 1
            total += hits / i
    return total / min(k, n_relevant)


def map_at_k(relevance_lists, k: int) -> float:
    """Mean average precision truncated at k over a list of queries."""
    lists = list(relevance_lists)
    if not lists:
        return 0.0
    return sum(average_precision_at_k(rel, k) for rel in lists) / len(lists)


def classification_report(predictions, labels) -> dict:
    """Accuracy plus per-class precision/recall/f1."""
    predictions = list(predictions)
    labels = list(labels)
    classes = sorted(set(labels) | set(predictions))
    correct = sum(1 for p, y in zip(predictions, labels) if p == y)
    report = {"accuracy": correct / len(labels) if labels else 0.0,
              "per_class": {}}
    for c in classes:
        tp = sum(1 for p, y in zip(predictions, labels) if p == c and y == c)
        fp = sum(1 for p, y in zip(predictions, labels) if p == c and y != c)
        fn = sum(1 for p, y in zip(predictions, labels) if p != c and y == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        report["per_class"][c] = {"precision": precision, "recall": recall,
                                  "f1": _f1(precision, recall)}
    return report


def similarity_metrics(candidate, reference, idf=None, topic_words=None) -> dict:
    """The six similarity columns of the report grid for one summary pair."""
    return {
        "token_sim": token_similarity(candidate, reference, idf),
        "rouge1": rouge_n(candidate, reference, 1)[2],
        "rouge2": rouge_n(candidate, reference, 2)[2],
        "rouge_lcs": rouge_lcs(candidate, reference)[2],
        "bleu": bleu(candidate, [reference]),
        "topic_sim": topic_similarity(candidate, reference, topic_words or []),
    }
