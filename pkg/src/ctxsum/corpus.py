"""Document ingestion, sentence segmentation, vocabulary and IDF statistics."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .errors import AllWordsFiltered, DuplicateId, ParseError, UnknownWord

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Block-level tags end a sentence; remaining tags are stripped to a space.
_BLOCK_TAG_RE = re.compile(
    r"</?(?:br|p|div|li|ul|ol|tr|td|th|table|h[1-6]|blockquote|hr|section|article)\b[^>]*/?>",
    re.IGNORECASE,
)
_TAG_RE = re.compile(r"<[^>]+>")
_SENTENCE_RE = re.compile(r"[^.!?\n]*[.!?]+|[^.!?\n]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics; digits kept, empties dropped."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Sentence:
    doc_id: str
    index: int
    text: str
    tokens: list[str]
    char_len: int

    @classmethod
    def from_text(cls, doc_id: str, index: int, text: str) -> "Sentence":
        return cls(doc_id=doc_id, index=index, text=text,
                   tokens=tokenize(text), char_len=len(text))


def segment_sentences(text: str, doc_id: str = "") -> list[Sentence]:
    """Split text into sentences on ``.``, ``!``, ``?``, newlines and HTML
    block-tag boundaries (tags are stripped first). Empty input gives []."""
    if not text:
        return []
    stripped = _BLOCK_TAG_RE.sub("\n", text)
    stripped = _TAG_RE.sub(" ", stripped)
    sentences = []
    for piece in _SENTENCE_RE.findall(stripped):
        piece = piece.strip()
        if piece:
            sentences.append(Sentence.from_text(doc_id, len(sentences), piece))
    return sentences


@dataclass
class Document:
    id: str
    title: str
    body: str
    metadata: dict[str, int] = field(default_factory=dict)
    queries: dict[str, int] = field(default_factory=dict)
    browse_titles: dict[str, int] = field(default_factory=dict)
    taxonomy_path: list[str] = field(default_factory=list)
    sentences: list[Sentence] = field(default_factory=list)

    def __post_init__(self):
        if not self.sentences:
            self.sentences = segment_sentences(self.body, doc_id=self.id)

    def seller_bag(self) -> Counter:
        """Seller-channel word counts: title + metadata + taxonomy terms."""
        bag = Counter(tokenize(self.title))
        _add_association(bag, self.metadata)
        for taxon in self.taxonomy_path:
            bag.update(tokenize(taxon))
        return bag

    def query_bag(self) -> Counter:
        bag = Counter()
        _add_association(bag, self.queries)
        return bag

    def browse_bag(self) -> Counter:
        bag = Counter()
        _add_association(bag, self.browse_titles)
        return bag

    def token_bag(self) -> Counter:
        """All words of the document: body, title and every channel."""
        bag = Counter(tokenize(self.body))
        bag.update(self.seller_bag())
        bag.update(self.query_bag())
        bag.update(self.browse_bag())
        return bag


def _add_association(bag: Counter, assoc: dict[str, int]) -> None:
    # Association keys may be multi-word; each token inherits the count.
    for key, count in assoc.items():
        for token in tokenize(key):
            bag[token] += count


@dataclass
class Vocabulary:
    words: list[str]
    index: dict[str, int]
    counts: dict[str, int]
    stopwords: set[str]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def id_of(self, word: str) -> int:
        if word not in self.index:
            raise UnknownWord(word)
        return self.index[word]


def load_stopwords(path=None) -> set[str]:
    """Read a stopword file (one word per line, ``#`` comments allowed).
    Without a path the bundled English list is used."""
    if path is None:
        text = resources.files("ctxsum.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return words


def build_vocabulary(docs: list[Document], stopwords: set[str],
                     min_count: int = 1) -> Vocabulary:
    """Corpus vocabulary sorted by (count desc, word asc), with stopwords and
    words rarer than min_count removed."""
    if not docs:
        raise AllWordsFiltered("no documents")
    counts = Counter()
    for doc in docs:
        counts.update(doc.token_bag())
    kept = {w: c for w, c in counts.items()
            if w not in stopwords and c >= min_count}
    if not kept:
        raise AllWordsFiltered(
            f"no words survive stopword/min_count={min_count} filtering")
    words = sorted(kept, key=lambda w: (-kept[w], w))
    return Vocabulary(words=words,
                      index={w: i for i, w in enumerate(words)},
                      counts=kept,
                      stopwords=set(stopwords))


@dataclass
class IdfTable:
    df: dict[str, int]
    idf: dict[str, float]
    num_docs: int
    variant: str  # "reciprocal" or "log"

    def idf_of(self, word: str) -> float:
        if word not in self.idf:
            raise UnknownWord(word)
        return self.idf[word]

    def df_of(self, word: str) -> int:
        if word not in self.df:
            raise UnknownWord(word)
        return self.df[word]


def compute_idf(docs: list[Document], vocab: Vocabulary,
                variant: str = "reciprocal") -> IdfTable:
    """Document frequencies and the per-variant IDF: 1/df or ln(num_docs/df)."""
    if variant not in ("reciprocal", "log"):
        raise ValueError(f"unknown idf variant {variant!r}")
    df: dict[str, int] = {}
    for doc in docs:
        for word in doc.token_bag():
            if word in vocab:
                df[word] = df.get(word, 0) + 1
    num_docs = len(docs)
    if variant == "reciprocal":
        idf = {w: 1.0 / d for w, d in df.items()}
    else:
        idf = {w: math.log(num_docs / d) for w, d in df.items()}
    return IdfTable(df=df, idf=idf, num_docs=num_docs, variant=variant)


# --- line-delimited document records --------------------------------------

_REQUIRED_FIELDS = ("id", "title", "body")


def parse_record(obj: dict, line_no: int, line: str) -> Document:
    for key in _REQUIRED_FIELDS:
        if key not in obj or not isinstance(obj[key], str):
            raise ParseError(line_no, line, f"missing or non-string field {key!r}")
    for key in ("metadata", "queries", "browse_titles"):
        value = obj.get(key, {})
        if not isinstance(value, dict):
            raise ParseError(line_no, line, f"field {key!r} must be an object")
    taxonomy = obj.get("taxonomy_path", [])
    if not isinstance(taxonomy, list):
        raise ParseError(line_no, line, "taxonomy_path must be a list")
    return Document(
        id=obj["id"],
        title=obj["title"],
        body=obj["body"],
        metadata={str(k): int(v) for k, v in obj.get("metadata", {}).items()},
        queries={str(k): int(v) for k, v in obj.get("queries", {}).items()},
        browse_titles={str(k): int(v) for k, v in obj.get("browse_titles", {}).items()},
        taxonomy_path=[str(t) for t in taxonomy],
    )


def ingest(path) -> list[Document]:
    """Load one JSON document record per line; empty file gives []."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, line, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ParseError(line_no, line, "record is not an object")
            doc = parse_record(obj, line_no, line)
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
            docs.append(doc)
    return docs


# --- corpus container (documents + vocabulary), used by the CLI -----------

@dataclass
class Corpus:
    documents: list[Document]
    vocab: Vocabulary

    def doc_by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def document_to_record(doc: Document) -> dict:
    return {
        "id": doc.id,
        "title": doc.title,
        "body": doc.body,
        "metadata": doc.metadata,
        "queries": doc.queries,
        "browse_titles": doc.browse_titles,
        "taxonomy_path": doc.taxonomy_path,
    }


def save_corpus(corpus: Corpus, path) -> None:
    payload = {
        "format": "ctxsum-corpus",
        "version": 1,
        "documents": [document_to_record(d) for d in corpus.documents],
        "vocabulary": {
            "words": corpus.vocab.words,
            "counts": [corpus.vocab.counts[w] for w in corpus.vocab.words],
            "stopwords": sorted(corpus.vocab.stopwords),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "ctxsum-corpus" or payload.get("version") != 1:
        raise ValueError(f"{path}: not a ctxsum corpus file")
    docs = [parse_record(rec, i + 1, "") for i, rec in enumerate(payload["documents"])]
    vw = payload["vocabulary"]
    vocab = Vocabulary(
        words=list(vw["words"]),
        index={w: i for i, w in enumerate(vw["words"])},
        counts=dict(zip(vw["words"], vw["counts"])),
        stopwords=set(vw["stopwords"]),
    )
    return Corpus(documents=docs, vocab=vocab)
