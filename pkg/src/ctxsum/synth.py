"""Synthetic product-corpus generator with controllable context dependence.

Each document mentions a set of attributes, one sentence per attribute; a
random subset of them is "active", i.e. present in the discovery queries,
browse-trail titles and the document title. At context_dependence=1 a
sentence belongs to the golden summary exactly when its attribute is active,
so sentence text alone carries no label information; at lower settings a
fraction of sentences is replaced by text-determined ones (boilerplate
negatives and salient-marker positives). Golden summaries and title targets
come out alongside the documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Document

# attribute -> two satellite words giving it a distinctive context
ATTRIBUTES = {
    "waterproof": ("sealed", "rainproof"),
    "leather": ("grain", "stitched"),
    "wireless": ("bluetooth", "pairing"),
    "foldable": ("collapsible", "hinge"),
    "insulated": ("thermal", "lined"),
    "rechargeable": ("battery", "usb"),
    "adjustable": ("strap", "sizing"),
    "lightweight": ("featherlight", "portable"),
    "rugged": ("reinforced", "armored"),
    "ergonomic": ("contoured", "grip"),
    "washable": ("rinse", "launder"),
    "stackable": ("modular", "nesting"),
}
ATTRIBUTE_LIST = list(ATTRIBUTES)

NOUNS = {
    "backpack": "packs",
    "tent": "shelter",
    "lantern": "lighting",
    "jacket": "apparel",
    "bottle": "hydration",
    "stove": "cooking",
    "hammock": "shelter",
    "compass": "navigation",
}
NOUN_LIST = list(NOUNS)

BRANDS = ["norvik", "alpenrose", "cascadia", "fjell",
          "meridian", "bluepine", "stormhold", "trailsmith"]
COLORS = ["olive", "charcoal", "crimson", "slate", "amber", "teal"]

# every template mentions the noun exactly once so its context weight is a
# per-sentence constant and ranking differences come from the attribute
ATTRIBUTE_TEMPLATES = [
    "The {noun} is {attr} with {sat0} {sat1} construction.",
    "This {attr} {noun} features {sat0} and {sat1} detailing.",
    "A {attr} {noun} design using {sat0} {sat1} materials.",
    "Every {noun} comes {attr} with {sat0} {sat1} finishing.",
]

BOILERPLATE = [
    "Free shipping on all orders today.",
    "Returns accepted within 30 days of delivery.",
    "Please rate me 5 stars after purchase.",
    "Check out my other items for more deals.",
]

SALIENT = [
    "This {noun} is our premium bestseller pick.",
    "A standout {noun} praised as a premium favorite.",
]

MENTIONED_PER_DOC = 8
ACTIVE_PER_DOC = 4


@dataclass
class GoldSummary:
    doc_id: str
    sentence_indices: list[int]
    text: str
    title_tokens: list[str]


def synth_corpus(seed: int, n_docs: int, context_dependence: float = 1.0,
                 mentioned_per_doc: int = MENTIONED_PER_DOC,
                 active_per_doc: int = ACTIVE_PER_DOC,
                 ) -> tuple[list[Document], dict[str, GoldSummary]]:
    """Generate documents and their golden summaries; deterministic per seed."""
    rng = np.random.default_rng(seed)
    docs: list[Document] = []
    gold: dict[str, GoldSummary] = {}
    for i in range(n_docs):
        doc, summary = _one_doc(f"d{i:05d}", rng, context_dependence,
                                mentioned_per_doc, active_per_doc)
        docs.append(doc)
        gold[doc.id] = summary
    return docs, gold


def _one_doc(doc_id: str, rng, context_dependence: float,
             mentioned_per_doc: int = MENTIONED_PER_DOC,
             active_per_doc: int = ACTIVE_PER_DOC):
    noun = NOUN_LIST[int(rng.integers(len(NOUN_LIST)))]
    brand = BRANDS[int(rng.integers(len(BRANDS)))]
    color = COLORS[int(rng.integers(len(COLORS)))]
    mentioned_idx = rng.choice(len(ATTRIBUTE_LIST), size=mentioned_per_doc,
                               replace=False)
    active_pos = rng.choice(mentioned_per_doc, size=active_per_doc, replace=False)
    mentioned = [ATTRIBUTE_LIST[int(j)] for j in mentioned_idx]
    active = sorted((mentioned[int(p)] for p in active_pos),
                    key=ATTRIBUTE_LIST.index)

    sentences: list[str] = []
    positive: list[int] = []
    for attr in mentioned:
        roll = rng.random()
        template_roll = int(rng.integers(len(ATTRIBUTE_TEMPLATES)))
        if roll < context_dependence:
            sat = ATTRIBUTES[attr]
            text = ATTRIBUTE_TEMPLATES[template_roll].format(
                noun=noun, attr=attr, sat0=sat[0], sat1=sat[1])
            label = attr in active
        else:
            if rng.random() < 0.5:
                text = BOILERPLATE[int(rng.integers(len(BOILERPLATE)))]
                label = False
            else:
                text = SALIENT[int(rng.integers(len(SALIENT)))].format(noun=noun)
                label = True
        if label:
            positive.append(len(sentences))
        sentences.append(text)

    # consumer channels carry the active attributes and their satellite
    # phrasing (users search "waterproof sealed tent"); the noun reaches the
    # seller channel through the title and taxonomy. Counts stay in a narrow
    # band so no active attribute drowns in the channel normalization.
    title_tokens = active + [noun]
    queries = {attr: int(rng.integers(2, 5)) for attr in active}
    browse = {attr: int(rng.integers(2, 5)) for attr in active}
    for attr in active:
        sat = ATTRIBUTES[attr]
        queries[sat[0]] = int(rng.integers(1, 3))
        queries[sat[1]] = int(rng.integers(1, 3))
        browse[sat[0]] = int(rng.integers(1, 3))
        browse[sat[1]] = int(rng.integers(1, 3))

    doc = Document(
        id=doc_id,
        title=" ".join(title_tokens),
        body=" ".join(sentences),
        metadata={brand: 1, color: 1},
        queries=queries,
        browse_titles=browse,
        taxonomy_path=["gear", NOUNS[noun], noun],
    )
    summary_text = " ".join(doc.sentences[j].text for j in positive)
    gold = GoldSummary(doc_id=doc_id, sentence_indices=positive,
                       text=summary_text, title_tokens=title_tokens)
    return doc, gold


def save_gold(gold: dict[str, GoldSummary], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in gold:
            g = gold[doc_id]
            fh.write(json.dumps({
                "doc_id": g.doc_id,
                "sentence_indices": g.sentence_indices,
                "summary": g.text,
                "title": " ".join(g.title_tokens),
            }, separators=(",", ":")) + "\n")


def load_gold(path) -> dict[str, GoldSummary]:
    gold: dict[str, GoldSummary] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            gold[rec["doc_id"]] = GoldSummary(
                doc_id=rec["doc_id"],
                sentence_indices=list(rec["sentence_indices"]),
                text=rec["summary"],
                title_tokens=rec.get("title", "").split(),
            )
    return gold
