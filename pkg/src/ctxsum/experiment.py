"""End-to-end experiment runner: synthesize or load a corpus, train the
requested models under a supervised or semi-supervised setting, summarize the
held-out documents at a target length, and evaluate similarity, ranking and
classification grids into one report."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import baselines as bl
from .context import (Blacklist, ContextSpace, LabeledSentence,
                      build_document_context, budget_select, generate_labels)
from .corpus import Corpus, Document, build_vocabulary, compute_idf, ingest, load_stopwords, tokenize
from .embed import SgnsConfig, train_sgns
from .metrics import (classification_report, map_at_k, ndcg_at_k,
                      select_topic_words, similarity_metrics)
from .models import (classify_scores, extractive_config, rerank_scores,
                     seq2seq_config, train_classifier, train_seq2seq)
from .report import write_report
from .synth import ACTIVE_PER_DOC, GoldSummary, load_gold, synth_corpus

EXTRACTIVE_MODELS = ("e-rnn", "ec-rnn", "cnn-rnn")
ABSTRACTIVE_MODELS = ("a-rnn", "ac-rnn")
BASELINE_MODELS = ("fuzzy", "nb", "svm", "lsa", "lexrank", "textrank")
ALL_MODELS = BASELINE_MODELS + EXTRACTIVE_MODELS + ABSTRACTIVE_MODELS

RANKING_KS = (1, 3)


@dataclass
class ExperimentSpec:
    seed: int = 7
    corpus_path: str | None = None
    gold_path: str | None = None
    synth_docs: int = 120
    context_dependence: float = 1.0
    train_size: int | None = None    # default: 3/4 of the corpus
    eval_size: int | None = None
    setting: str = "supervised"      # "supervised" | "semi_supervised"
    target: str = "3"                # "1" | "3" | "5" | "<n>c"
    models: list[str] = field(default_factory=lambda: ["fuzzy"])
    metrics: list[str] = field(default_factory=list)  # empty = all columns
    preset: str = "desk"
    idf_variant: str = "reciprocal"
    betas: tuple = (1.0, 1.0, 1.0)
    top_m: int = ACTIVE_PER_DOC      # semi-supervised positives per doc
    blacklist_path: str | None = None
    sgns_epochs: int = 8
    sgns_window: int = 4
    classifier_epochs: int | None = None
    seq2seq_epochs: int | None = None
    out_dir: str = "results"


def parse_experiment_file(path) -> ExperimentSpec:
    """Plain ``key = value`` config; '#' starts a comment."""
    spec = ExperimentSpec()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if not hasattr(spec, key):
                raise ValueError(f"unknown experiment key {key!r}")
            current = getattr(spec, key)
            if key in ("models", "metrics"):
                setattr(spec, key, [v.strip() for v in value.split(",") if v.strip()])
            elif key == "betas":
                spec.betas = tuple(float(v) for v in value.split(","))
            elif isinstance(current, bool):
                setattr(spec, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int) or (current is None and key.endswith(("size", "epochs"))):
                setattr(spec, key, int(value))
            elif isinstance(current, float):
                setattr(spec, key, float(value))
            else:
                setattr(spec, key, value)
    return spec


def _split_ids(doc_ids: list[str], spec: ExperimentSpec) -> tuple[list[str], list[str]]:
    rng = np.random.default_rng(spec.seed)
    order = [doc_ids[i] for i in rng.permutation(len(doc_ids))]
    n_train = spec.train_size if spec.train_size is not None else (3 * len(order)) // 4
    n_eval = spec.eval_size if spec.eval_size is not None else len(order) - n_train
    if n_train + n_eval > len(order):
        raise ValueError(
            f"train_size {n_train} + eval_size {n_eval} exceed corpus {len(order)}")
    train = order[:n_train]
    evaluation = order[n_train:n_train + n_eval]
    overlap = set(train) & set(evaluation)
    if overlap:
        raise ValueError(f"train/eval leak: {sorted(overlap)[:5]}")
    return train, evaluation


def golden_labels(docs: list[Document], gold: dict[str, GoldSummary]) -> list[LabeledSentence]:
    labeled = []
    for doc in docs:
        positive = set(gold[doc.id].sentence_indices)
        for s in doc.sentences:
            label = "positive" if s.index in positive else "negative"
            labeled.append(LabeledSentence(s, label, "human"))
    return labeled


def _select_by_scores(doc: Document, scores, target: str):
    ranked = sorted(doc.sentences, key=lambda s: (-scores[s.index], s.index))
    if target.endswith("c"):
        return budget_select(ranked, int(target[:-1]))
    n = int(target)
    return sorted(ranked[:n], key=lambda s: s.index)


class _ModelRunner:
    """Trains one model and produces per-document sentence scores on the
    eval set, plus binary sentence predictions for classifier models."""

    def __init__(self, name, spec, corpus, matrix, space, contexts,
                 train_docs, labeled):
        self.name = name
        self.spec = spec
        self.corpus = corpus
        self.matrix = matrix
        self.space = space
        self.contexts = contexts
        self.train_docs = train_docs
        self.labeled = labeled
        self.supports_classification = name in ("nb", "svm") + EXTRACTIVE_MODELS
        self._fit()

    def _fit(self):
        name, spec = self.name, self.spec
        if name == "fuzzy":
            self._rng = np.random.default_rng(spec.seed + 1000)
        elif name == "nb":
            bags = [dict_counter(item.sentence.tokens) for item in self.labeled]
            labels = [item.label for item in self.labeled]
            self._nb = bl.nb_train(bags, labels)
        elif name == "svm":
            feats = np.stack([self._svm_features(item.sentence.tokens)
                              for item in self.labeled])
            ys = [1 if item.label == "positive" else -1 for item in self.labeled]
            self._svm = bl.svm_train(feats, ys)
        elif name in EXTRACTIVE_MODELS:
            config = extractive_config(
                name, spec.preset, seed=spec.seed,
                **({"epochs": spec.classifier_epochs}
                   if spec.classifier_epochs is not None else {}))
            self._clf = train_classifier(self.labeled, self.contexts, config,
                                         self.matrix)
        elif name in ABSTRACTIVE_MODELS:
            config = seq2seq_config(
                name, spec.preset, seed=spec.seed,
                **({"epochs": spec.seq2seq_epochs}
                   if spec.seq2seq_epochs is not None else {}))
            pairs = []
            for doc in self.train_docs:
                body = [t for s in doc.sentences for t in s.tokens]
                title = tokenize(doc.title)
                v = self.contexts[doc.id].vector if config.context_enabled else None
                pairs.append((body, title, v))
            self._s2s = train_seq2seq(pairs, config, self.matrix)
        elif name in ("lsa", "lexrank", "textrank"):
            pass  # per-document, no training
        else:
            raise ValueError(f"unknown model {name!r}")

    def _svm_features(self, tokens) -> np.ndarray:
        vec = np.zeros(len(self.corpus.vocab))
        for w in tokens:
            if w in self.corpus.vocab.index:
                vec[self.corpus.vocab.index[w]] += self.space.idf.idf.get(w, 0.0)
        return vec

    def scores(self, doc: Document) -> list[float]:
        name = self.name
        if name == "fuzzy":
            order = bl.fuzzy_rank(doc, self._rng)
            ranks = [0.0] * len(order)
            for pos, idx in enumerate(order):
                ranks[idx] = float(len(order) - pos)
            return ranks
        if name == "nb":
            return [bl.nb_predict(self._nb, dict_counter(s.tokens)).get("positive", 0.0)
                    for s in doc.sentences]
        if name == "svm":
            feats = np.stack([self._svm_features(s.tokens) for s in doc.sentences])
            return [float(v) for v in bl.svm_predict(self._svm, feats)]
        if name == "lsa":
            order = bl.lsa_rank(doc, self.space.idf)
            ranks = [0.0] * len(order)
            for pos, idx in enumerate(order):
                ranks[idx] = float(len(order) - pos)
            return ranks
        if name == "lexrank":
            return [float(v) for v in bl.lexrank_scores(doc, idf=self.space.idf)]
        if name == "textrank":
            return [float(v) for v in bl.textrank_scores(doc)]
        if name in EXTRACTIVE_MODELS:
            v = self.contexts[doc.id].vector if self._clf.config.context_enabled else None
            return classify_scores(self._clf, doc, v)
        if name in ABSTRACTIVE_MODELS:
            v = self.contexts[doc.id].vector if self._s2s.config.context_enabled else None
            return rerank_scores(self._s2s, doc, v)
        raise ValueError(name)

    def class_predictions(self, doc: Document, scores) -> list[int]:
        if self.name == "svm":
            return [1 if v >= 0.0 else 0 for v in scores]
        return [1 if v >= 0.5 else 0 for v in scores]


def dict_counter(tokens) -> dict:
    bag: dict[str, int] = {}
    for t in tokens:
        bag[t] = bag.get(t, 0) + 1
    return bag


def run_experiment(spec: ExperimentSpec, out_dir=None) -> dict:
    """Run every requested model and write report.json / report.tsv / figures
    under out_dir; returns the report dict. Reproducible under spec.seed."""
    out_dir = out_dir or spec.out_dir

    if spec.corpus_path:
        if not spec.gold_path:
            raise ValueError("gold_path required with corpus_path")
        docs = ingest(spec.corpus_path)
        gold = load_gold(spec.gold_path)
    else:
        docs, gold = synth_corpus(spec.seed, spec.synth_docs,
                                  spec.context_dependence)

    train_ids, eval_ids = _split_ids([d.id for d in docs], spec)
    by_id = {d.id: d for d in docs}
    train_docs = [by_id[i] for i in train_ids]
    eval_docs = [by_id[i] for i in eval_ids]

    stopwords = load_stopwords()
    vocab = build_vocabulary(docs, stopwords)
    corpus = Corpus(documents=docs, vocab=vocab)
    preset_dim = 300 if spec.preset == "paper" else 32
    matrix = train_sgns(corpus, SgnsConfig(dim=preset_dim, window=spec.sgns_window,
                                           epochs=spec.sgns_epochs, seed=spec.seed))
    idf = compute_idf(docs, vocab, spec.idf_variant)
    space = ContextSpace(vocab=vocab, idf=idf, matrix=matrix, betas=spec.betas)
    contexts = {doc.id: build_document_context(doc, space) for doc in docs}

    if spec.setting == "supervised":
        labeled = golden_labels(train_docs, gold)
    elif spec.setting == "semi_supervised":
        if spec.blacklist_path:
            blacklist = Blacklist.from_file(spec.blacklist_path)
        else:
            text = resources.files("ctxsum.data").joinpath("blacklist.txt").read_text("utf-8")
            blacklist = Blacklist([l for l in text.splitlines()
                                   if l.strip() and not l.startswith("#")])
        labeled = generate_labels(train_docs, contexts, blacklist, space,
                                  top_m=spec.top_m)
    else:
        raise ValueError(f"unknown setting {spec.setting!r}")

    report = {
        "meta": {
            "seed": spec.seed, "setting": spec.setting, "target": spec.target,
            "preset": spec.preset, "models": list(spec.models),
            "idf_variant": spec.idf_variant,
            "context_dependence": spec.context_dependence,
            "n_train": len(train_docs), "n_eval": len(eval_docs),
        },
        "similarity": {}, "ranking": {}, "classification": {}, "errors": {},
    }

    for name in spec.models:
        try:
            runner = _ModelRunner(name, spec, corpus, matrix, space, contexts,
                                  train_docs, labeled)
            _evaluate_model(runner, eval_docs, gold, space, spec, report)
        except Exception as exc:  # flush partial results, then propagate
            report["errors"][name] = f"{type(exc).__name__}: {exc}"
            write_report(report, out_dir)
            raise
    write_report(report, out_dir)
    return report


def _evaluate_model(runner: _ModelRunner, eval_docs, gold, space,
                    spec: ExperimentSpec, report: dict) -> None:
    sims = []
    relevance_lists = []
    all_preds: list[int] = []
    all_labels: list[int] = []
    for doc in eval_docs:
        scores = runner.scores(doc)
        g = gold[doc.id]
        positive = set(g.sentence_indices)

        summary = _select_by_scores(doc, scores, spec.target)
        cand = [t for s in summary for t in s.tokens]
        ref = tokenize(g.text)
        doc_tokens = [t for s in doc.sentences for t in s.tokens]
        topics = select_topic_words(doc_tokens, space.idf)
        sims.append(similarity_metrics(cand, ref, space.idf, topics))

        order = sorted(range(len(doc.sentences)),
                       key=lambda i: (-scores[i], i))
        relevance_lists.append([1 if i in positive else 0 for i in order])

        if runner.supports_classification:
            preds = runner.class_predictions(doc, scores)
            all_preds.extend(preds)
            all_labels.extend(1 if s.index in positive else 0
                              for s in doc.sentences)

    n = max(1, len(sims))
    sim_row = {key: sum(s[key] for s in sims) / n for key in sims[0]} if sims else {}
    if spec.metrics:
        sim_row = {k: v for k, v in sim_row.items() if k in spec.metrics}
    report["similarity"][runner.name] = sim_row

    rank_row = {}
    for k in RANKING_KS:
        rank_row[f"ndcg@{k}"] = (sum(ndcg_at_k(rel, k) for rel in relevance_lists)
                                 / max(1, len(relevance_lists)))
        rank_row[f"map@{k}"] = map_at_k(relevance_lists, k)
    report["ranking"][runner.name] = rank_row

    if runner.supports_classification and all_labels:
        cls = classification_report(all_preds, all_labels)
        row = {"accuracy": cls["accuracy"]}
        for c in (0, 1):
            stats = cls["per_class"].get(c, {"precision": 0.0, "recall": 0.0, "f1": 0.0})
            row[f"precision_{c}"] = stats["precision"]
            row[f"recall_{c}"] = stats["recall"]
            row[f"f1_{c}"] = stats["f1"]
        report["classification"][runner.name] = row
