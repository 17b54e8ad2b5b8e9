"""Document-context vectors, sentence scoring, budgeted extraction and
semi-supervised labeling.

Per document three sparse channel unit vectors are built (seller metadata,
discovery queries, browse-trail titles), combined with per-channel weights,
reweighted by IDF, and projected through the word-embedding matrix into a
dense context vector used to score sentences and condition the models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, IdfTable, Sentence, Vocabulary, tokenize
from .embed import EmbeddingMatrix, cosine
from .errors import BetaNegative, DimMismatch, EmptyBlacklist, EmptyDocument

CHANNELS = ("seller", "query", "browse")
DEFAULT_CHAR_BUDGET = 800
DEFAULT_GENERALIZATION_WEIGHT = 0.5


@dataclass
class ChannelVector:
    doc_id: str
    channel: str
    weights: dict[str, float]
    normalized: bool


@dataclass
class CombinedContext:
    doc_id: str
    betas: tuple[float, float, float]
    combined: dict[str, float]
    idf_weighted: dict[str, float]


@dataclass
class DocumentContextVector:
    doc_id: str
    v: np.ndarray


@dataclass
class DocumentContext:
    """Everything context-related for one document."""
    ctx: CombinedContext
    vector: DocumentContextVector


@dataclass
class ScoredSentence:
    sentence: Sentence
    score: float
    rank: int


@dataclass
class LabeledSentence:
    sentence: Sentence
    label: str   # "positive" | "negative"
    source: str  # "blacklist" | "context_top" | "human"
    score: float = 0.0


class Blacklist:
    """Lowercase boilerplate phrases; matching is whole-token phrase match."""

    def __init__(self, terms):
        self.terms = {t.strip().lower() for t in terms if t.strip()}
        self._phrases = [tokenize(t) for t in sorted(self.terms)]
        self._phrases = [p for p in self._phrases if p]

    def __len__(self):
        return len(self.terms)

    def matches(self, tokens: list[str]) -> bool:
        for phrase in self._phrases:
            n = len(phrase)
            if n > len(tokens):
                continue
            for i in range(len(tokens) - n + 1):
                if tokens[i:i + n] == phrase:
                    return True
        return False

    @classmethod
    def from_file(cls, path) -> "Blacklist":
        terms = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    terms.append(line)
        return cls(terms)


@dataclass
class ContextSpace:
    """Corpus-level inputs shared by all per-document context computations."""
    vocab: Vocabulary
    idf: IdfTable
    matrix: EmbeddingMatrix
    betas: tuple[float, float, float] = (1.0, 1.0, 1.0)
    generalization_weight: float = DEFAULT_GENERALIZATION_WEIGHT
    _word_index: dict[str, int] = field(default=None, repr=False)

    def word_index(self) -> dict[str, int]:
        if self._word_index is None:
            self._word_index = {w: i for i, w in enumerate(self.matrix.words)}
        return self._word_index


def build_channel_vector(doc: Document, channel: str,
                         vocab: Vocabulary) -> ChannelVector:
    """L2-normalized word frequencies of one channel, restricted to the
    vocabulary. An all-zero channel stays zero with normalized=False."""
    if channel == "seller":
        bag = doc.seller_bag()
    elif channel == "query":
        bag = doc.query_bag()
    elif channel == "browse":
        bag = doc.browse_bag()
    else:
        raise ValueError(f"unknown channel {channel!r}")
    weights = {w: float(c) for w, c in bag.items() if w in vocab and c > 0}
    norm = math.sqrt(sum(v * v for v in weights.values()))
    if norm == 0.0:
        return ChannelVector(doc.id, channel, {}, normalized=False)
    weights = {w: v / norm for w, v in weights.items()}
    return ChannelVector(doc.id, channel, weights, normalized=True)


def combine_channels(seller: ChannelVector, query: ChannelVector,
                     browse: ChannelVector, betas, idf: IdfTable) -> CombinedContext:
    """Weighted sum of the three channel unit vectors, then IDF reweighting
    per word dimension."""
    betas = tuple(float(b) for b in betas)
    if any(b < 0 for b in betas):
        raise BetaNegative(str(betas))
    combined: dict[str, float] = {}
    for beta, channel in zip(betas, (seller, query, browse)):
        if beta == 0.0:
            continue
        for w, v in channel.weights.items():
            combined[w] = combined.get(w, 0.0) + beta * v
    combined = {w: v for w, v in combined.items() if v != 0.0}
    idf_weighted = {w: v * idf.idf_of(w) for w, v in combined.items()}
    return CombinedContext(seller.doc_id, betas, combined, idf_weighted)


def project_context(ctx: CombinedContext, matrix: EmbeddingMatrix,
                    word_index: dict[str, int] | None = None) -> DocumentContextVector:
    """Dense context vector: the sparse IDF-weighted context row times the
    embedding matrix."""
    if word_index is None:
        word_index = {w: i for i, w in enumerate(matrix.words)}
    v = np.zeros(matrix.dim, dtype=np.float64)
    for w in sorted(ctx.idf_weighted):
        if w not in word_index:
            raise DimMismatch(f"context word {w!r} has no embedding row")
        v += ctx.idf_weighted[w] * matrix.input_vectors[word_index[w]].astype(np.float64)
    return DocumentContextVector(ctx.doc_id, v)


def build_document_context(doc: Document, space: ContextSpace) -> DocumentContext:
    channels = [build_channel_vector(doc, ch, space.vocab) for ch in CHANNELS]
    ctx = combine_channels(*channels, betas=space.betas, idf=space.idf)
    vector = project_context(ctx, space.matrix, space.word_index())
    return DocumentContext(ctx=ctx, vector=vector)


def word_context_score(word: str, ctx: CombinedContext,
                       v_d: DocumentContextVector, space: ContextSpace) -> float:
    """Direct context weight for context-support words; embedding-similarity
    fallback for other vocabulary words; 0 otherwise."""
    if word in space.vocab.stopwords:
        return 0.0
    if word in ctx.idf_weighted:
        return ctx.idf_weighted[word]
    if word in space.vocab:
        row = space.word_index().get(word)
        if row is None:
            return 0.0
        sim = max(0.0, cosine(space.matrix.input_vectors[row], v_d.v))
        return sim * space.idf.idf_of(word) * space.generalization_weight
    return 0.0


def score_sentence(tokens: list[str], ctx: CombinedContext,
                   v_d: DocumentContextVector, space: ContextSpace,
                   normalize: bool = False) -> float:
    if not tokens:
        return 0.0
    total = sum(word_context_score(w, ctx, v_d, space) for w in tokens)
    if normalize:
        total /= len(tokens)
    return total


def score_sentences(doc: Document, dctx: DocumentContext, space: ContextSpace,
                    normalize: bool = False) -> list[ScoredSentence]:
    """Every sentence scored and ranked 1..n by (score desc, index asc)."""
    scored = [
        ScoredSentence(s, score_sentence(s.tokens, dctx.ctx, dctx.vector, space,
                                         normalize=normalize), rank=0)
        for s in doc.sentences
    ]
    order = sorted(range(len(scored)),
                   key=lambda i: (-scored[i].score, scored[i].sentence.index))
    for rank, i in enumerate(order, start=1):
        scored[i].rank = rank
    return scored


def budget_select(ranked: list[Sentence], char_budget: int) -> list[Sentence]:
    """Greedy fill over a ranked sentence list: the top sentence is always
    taken; after that sentences are taken in rank order until one would push
    the cumulative character count past the budget."""
    selected = [ranked[0]]
    used = ranked[0].char_len
    for sentence in ranked[1:]:
        if used + sentence.char_len > char_budget:
            break
        selected.append(sentence)
        used += sentence.char_len
    return sorted(selected, key=lambda s: s.index)


def extract_context_summary(doc: Document, dctx: DocumentContext,
                            space: ContextSpace,
                            char_budget: int = DEFAULT_CHAR_BUDGET,
                            normalize: bool = False) -> list[Sentence]:
    """Budgeted extractive summary: rank by context score, greedily fill the
    character budget, emit in document order."""
    if not doc.sentences:
        raise EmptyDocument(doc.id)
    scored = score_sentences(doc, dctx, space, normalize=normalize)
    ranked = [s.sentence for s in sorted(scored, key=lambda x: x.rank)]
    return budget_select(ranked, char_budget)


def generate_labels(docs: list[Document], contexts: dict[str, DocumentContext],
                    blacklist: Blacklist, space: ContextSpace,
                    top_m: int = 3) -> list[LabeledSentence]:
    """Algorithmic sentence labels: blacklist-matching sentences are negative,
    the top_m context-scoring clean sentences per document are positive, and
    everything else is left out."""
    if len(blacklist) == 0:
        raise EmptyBlacklist()
    labeled: list[LabeledSentence] = []
    for doc in docs:
        dctx = contexts[doc.id]
        scored = score_sentences(doc, dctx, space)
        clean: list[ScoredSentence] = []
        for ss in scored:
            if blacklist.matches(ss.sentence.tokens):
                labeled.append(LabeledSentence(ss.sentence, "negative",
                                               "blacklist", ss.score))
            else:
                clean.append(ss)
        clean.sort(key=lambda ss: ss.rank)
        for ss in clean[:top_m]:
            labeled.append(LabeledSentence(ss.sentence, "positive",
                                           "context_top", ss.score))
    return labeled


# --- context file persistence ----------------------------------------------

def save_contexts(contexts: dict[str, DocumentContext], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in contexts:
            dctx = contexts[doc_id]
            record = {
                "doc_id": doc_id,
                "betas": list(dctx.ctx.betas),
                "combined": {w: dctx.ctx.combined[w] for w in sorted(dctx.ctx.combined)},
                "idf_weighted": {w: dctx.ctx.idf_weighted[w]
                                 for w in sorted(dctx.ctx.idf_weighted)},
                "v": [float(x) for x in dctx.vector.v],
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def save_labels(labeled: list[LabeledSentence], path) -> None:
    """labels file: one record per line with doc_id, sentence_index, label,
    score (plus the label source)."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in labeled:
            fh.write(json.dumps({
                "doc_id": item.sentence.doc_id,
                "sentence_index": item.sentence.index,
                "label": item.label,
                "score": item.score,
                "source": item.source,
            }, separators=(",", ":")) + "\n")


def load_labels(path, docs_by_id: dict[str, Document]) -> list[LabeledSentence]:
    labeled = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            doc = docs_by_id[rec["doc_id"]]
            sentence = doc.sentences[rec["sentence_index"]]
            labeled.append(LabeledSentence(sentence, rec["label"],
                                           rec.get("source", "human"),
                                           rec.get("score", 0.0)))
    return labeled


def load_contexts(path) -> dict[str, DocumentContext]:
    contexts: dict[str, DocumentContext] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ctx = CombinedContext(
                doc_id=rec["doc_id"],
                betas=tuple(rec["betas"]),
                combined=dict(rec["combined"]),
                idf_weighted=dict(rec["idf_weighted"]),
            )
            vector = DocumentContextVector(rec["doc_id"],
                                           np.array(rec["v"], dtype=np.float64))
            contexts[rec["doc_id"]] = DocumentContext(ctx=ctx, vector=vector)
    return contexts
