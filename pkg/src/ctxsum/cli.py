"""ctxsum command line: corpus ingestion, embedding training, context
building, labeling, model training, summarization, baselines, evaluation,
synthetic data and the experiment runner."""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import baselines as bl
from .checkpoint import load_checkpoint, save_checkpoint
from .context import (Blacklist, ContextSpace, build_document_context,
                      generate_labels, load_contexts, load_labels,
                      save_contexts, save_labels)
from .corpus import (Corpus, build_vocabulary, compute_idf, ingest,
                     load_corpus, load_stopwords, save_corpus, tokenize)
from .embed import (SgnsConfig, embeddings_from_checkpoint,
                    embeddings_to_checkpoint, train_sgns)
from .errors import CtxsumError
from .experiment import dict_counter, parse_experiment_file, run_experiment
from .metrics import (classification_report, map_at_k, ndcg_at_k,
                      select_topic_words, similarity_metrics)
from .models import (DecodeConfig, ExtractiveClassifier, Seq2SeqModel,
                     classify_scores, decode, extractive_config, rerank_scores,
                     seq2seq_config, train_classifier, train_seq2seq)
from .report import write_report
from .synth import load_gold, save_gold, synth_corpus

EXTRACTIVE = ("e-rnn", "ec-rnn", "cnn-rnn")
ABSTRACTIVE = ("a-rnn", "ac-rnn")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except CtxsumError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxsum",
        description="Document-context summarization toolkit")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; execution is single-threaded for determinism")
    parser.add_argument("--preset", choices=("desk", "paper"), default="desk")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="read line-delimited document records")
    p.add_argument("--input", required=True)
    p.add_argument("--stopwords", default=None)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="train skip-gram embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("context", help="build document-context vectors")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embed", required=True)
    p.add_argument("--betas", default="1,1,1")
    p.add_argument("--idf", choices=("reciprocal", "log"), default="reciprocal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_context)

    p = sub.add_parser("label", help="semi-supervised sentence labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ctx", required=True)
    p.add_argument("--blacklist", default=None)
    p.add_argument("--top-m", type=int, default=3)
    p.add_argument("--idf", choices=("reciprocal", "log"), default="reciprocal")
    p.add_argument("--embed", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train a summarization model")
    p.add_argument("--model", required=True,
                   choices=EXTRACTIVE + ABSTRACTIVE)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embed", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--ctx", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", help="summarize with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--ctx", default=None)
    p.add_argument("--mode", choices=("classify", "decode", "rerank"),
                   required=True)
    p.add_argument("--target", default="800c")
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--no-restrict", action="store_true",
                   help="decode over the full vocabulary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("baseline", help="classical summarizers")
    p.add_argument("--method", required=True,
                   choices=("fuzzy", "nb", "svm", "lsa", "lexrank", "textrank"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", default=None, help="training labels for nb/svm")
    p.add_argument("--idf", choices=("reciprocal", "log"), default="reciprocal")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--target", default="3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score summaries against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--corpus", default=None,
                   help="corpus for IDF-weighted and topic metrics")
    p.add_argument("--idf", choices=("reciprocal", "log"), default="reciprocal")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n-docs", type=int, required=True)
    p.add_argument("--context-dependence", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="run a full experiment spec")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def cmd_ingest(args) -> int:
    docs = ingest(args.input)
    stopwords = load_stopwords(args.stopwords)
    vocab = build_vocabulary(docs, stopwords, args.min_count)
    save_corpus(Corpus(documents=docs, vocab=vocab), args.out)
    print(f"wrote {args.out}: {len(docs)} documents, vocabulary {len(vocab)}")
    return 0


def cmd_embed(args) -> int:
    corpus = load_corpus(args.corpus)
    config = SgnsConfig(dim=args.dim, window=args.window,
                        negatives=args.negatives, epochs=args.epochs,
                        learning_rate=args.lr, seed=args.seed)
    losses: list[float] = []
    matrix = train_sgns(corpus, config, loss_log=losses)
    save_checkpoint(embeddings_to_checkpoint(matrix, config), args.out)
    last = f"{losses[-1]:.4f}" if losses else "n/a"
    print(f"wrote {args.out}: {matrix.rows}x{matrix.dim}, final loss {last}")
    return 0


def _load_space(corpus_path, embed_path, idf_variant, betas=(1.0, 1.0, 1.0)):
    corpus = load_corpus(corpus_path)
    matrix = embeddings_from_checkpoint(load_checkpoint(embed_path))
    idf = compute_idf(corpus.documents, corpus.vocab, idf_variant)
    space = ContextSpace(vocab=corpus.vocab, idf=idf, matrix=matrix, betas=betas)
    return corpus, space


def cmd_context(args) -> int:
    betas = tuple(float(b) for b in args.betas.split(","))
    corpus, space = _load_space(args.corpus, args.embed, args.idf, betas)
    contexts = {doc.id: build_document_context(doc, space)
                for doc in corpus.documents}
    save_contexts(contexts, args.out)
    print(f"wrote {args.out}: {len(contexts)} context vectors (k={space.matrix.dim})")
    return 0


def default_blacklist() -> Blacklist:
    text = resources.files("ctxsum.data").joinpath("blacklist.txt").read_text("utf-8")
    return Blacklist([l for l in text.splitlines()
                      if l.strip() and not l.startswith("#")])


def cmd_label(args) -> int:
    corpus, space = _load_space(args.corpus, args.embed, args.idf)
    contexts = load_contexts(args.ctx)
    blacklist = (Blacklist.from_file(args.blacklist) if args.blacklist
                 else default_blacklist())
    labeled = generate_labels(corpus.documents, contexts, blacklist, space,
                              top_m=args.top_m)
    save_labels(labeled, args.out)
    n_pos = sum(1 for l in labeled if l.label == "positive")
    print(f"wrote {args.out}: {len(labeled)} labels ({n_pos} positive)")
    return 0


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    matrix = embeddings_from_checkpoint(load_checkpoint(args.embed))
    contexts = load_contexts(args.ctx) if args.ctx else {}
    overrides = {"embed_dim": matrix.dim}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.model in EXTRACTIVE:
        if not args.labels:
            raise SystemExit("--labels required for extractive models")
        by_id = {d.id: d for d in corpus.documents}
        labeled = load_labels(args.labels, by_id)
        config = extractive_config(args.model, args.preset, seed=args.seed,
                                   **overrides)
        model = train_classifier(labeled, contexts, config, matrix)
    else:
        config = seq2seq_config(args.model, args.preset, seed=args.seed,
                                **overrides)
        pairs = []
        for doc in corpus.documents:
            body = [t for s in doc.sentences for t in s.tokens]
            v = contexts[doc.id].vector if config.context_enabled else None
            pairs.append((body, tokenize(doc.title), v))
        model = train_seq2seq(pairs, config, matrix)
    save_checkpoint(model.to_checkpoint(), args.out)
    print(f"wrote {args.out}: {args.model} ({args.preset} preset)")
    return 0


def _select_summary(doc, scores, target):
    from .experiment import _select_by_scores
    return _select_by_scores(doc, scores, target)


def _summary_record(doc, model_name, mode, target, sentences, scores=None,
                    text=None) -> dict:
    record = {
        "doc_id": doc.id,
        "model": model_name,
        "mode": mode,
        "target": target,
        "summary": text if text is not None else " ".join(s.text for s in sentences),
    }
    if sentences is not None:
        record["sentence_indices"] = [s.index for s in sentences]
    if scores is not None:
        record["scores"] = [float(v) for v in scores]
    return record


def cmd_summarize(args) -> int:
    corpus = load_corpus(args.corpus)
    ckpt = load_checkpoint(args.model)
    contexts = load_contexts(args.ctx) if args.ctx else {}
    records = []
    if args.mode == "classify":
        clf = ExtractiveClassifier.from_checkpoint(ckpt)
        for doc in corpus.documents:
            v = contexts[doc.id].vector if clf.config.context_enabled else None
            scores = classify_scores(clf, doc, v)
            chosen = _select_summary(doc, scores, args.target)
            records.append(_summary_record(doc, ckpt.model_kind, args.mode,
                                           args.target, chosen, scores))
    else:
        model = Seq2SeqModel.from_checkpoint(ckpt)
        for doc in corpus.documents:
            v = contexts[doc.id].vector if model.config.context_enabled else None
            if args.mode == "rerank":
                scores = rerank_scores(model, doc, v)
                chosen = _select_summary(doc, scores, args.target)
                records.append(_summary_record(doc, ckpt.model_kind, args.mode,
                                               args.target, chosen, scores))
            else:
                cfg = DecodeConfig(beam_width=args.beam,
                                   restrict_to_document_vocab=not args.no_restrict)
                body = [t for s in doc.sentences for t in s.tokens]
                tokens = decode(model, body, v, cfg)
                records.append(_summary_record(doc, ckpt.model_kind, args.mode,
                                               args.target, None,
                                               text=" ".join(tokens)))
    _write_jsonl(records, args.out)
    print(f"wrote {args.out}: {len(records)} summaries")
    return 0


def cmd_baseline(args) -> int:
    corpus = load_corpus(args.corpus)
    idf = compute_idf(corpus.documents, corpus.vocab, args.idf)
    rng = np.random.default_rng(args.seed)
    nb_model = svm_model = None
    if args.method in ("nb", "svm"):
        if not args.labels:
            raise SystemExit(f"--labels required for {args.method}")
        by_id = {d.id: d for d in corpus.documents}
        labeled = load_labels(args.labels, by_id)
        if args.method == "nb":
            nb_model = bl.nb_train([dict_counter(l.sentence.tokens) for l in labeled],
                                   [l.label for l in labeled])
        else:
            feats = np.stack([_svm_vec(l.sentence.tokens, corpus, idf)
                              for l in labeled])
            ys = [1 if l.label == "positive" else -1 for l in labeled]
            svm_model = bl.svm_train(feats, ys)

    records = []
    for doc in corpus.documents:
        if args.method == "fuzzy":
            order = bl.fuzzy_rank(doc, rng)
            scores = [0.0] * len(order)
            for pos, idx in enumerate(order):
                scores[idx] = float(len(order) - pos)
        elif args.method == "nb":
            scores = [bl.nb_predict(nb_model, dict_counter(s.tokens)).get("positive", 0.0)
                      for s in doc.sentences]
        elif args.method == "svm":
            feats = np.stack([_svm_vec(s.tokens, corpus, idf) for s in doc.sentences])
            scores = [float(v) for v in bl.svm_predict(svm_model, feats)]
        elif args.method == "lsa":
            order = bl.lsa_rank(doc, idf)
            scores = [0.0] * len(order)
            for pos, idx in enumerate(order):
                scores[idx] = float(len(order) - pos)
        elif args.method == "lexrank":
            scores = [float(v) for v in bl.lexrank_scores(
                doc, threshold=args.threshold, damping=args.damping, idf=idf)]
        else:
            scores = [float(v) for v in bl.textrank_scores(doc, damping=args.damping)]
        chosen = _select_summary(doc, scores, args.target)
        records.append(_summary_record(doc, args.method, "baseline",
                                       args.target, chosen, scores))
    _write_jsonl(records, args.out)
    print(f"wrote {args.out}: {len(records)} summaries")
    return 0


def _svm_vec(tokens, corpus, idf):
    vec = np.zeros(len(corpus.vocab))
    for w in tokens:
        if w in corpus.vocab.index:
            vec[corpus.vocab.index[w]] += idf.idf.get(w, 0.0)
    return vec


def cmd_eval(args) -> int:
    gold = load_gold(args.gold)
    idf = None
    docs_by_id = {}
    if args.corpus:
        corpus = load_corpus(args.corpus)
        idf = compute_idf(corpus.documents, corpus.vocab, args.idf)
        docs_by_id = {d.id: d for d in corpus.documents}

    by_model: dict[str, list[dict]] = {}
    with open(args.pred, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                by_model.setdefault(rec.get("model", "model"), []).append(rec)

    report = {"meta": {"pred": os.path.basename(args.pred),
                       "gold": os.path.basename(args.gold),
                       "target": by_model and next(iter(by_model.values()))[0].get("target", "?") or "?"},
              "similarity": {}, "ranking": {}, "classification": {}, "errors": {}}
    for model_name in sorted(by_model):
        sims, rel_lists, preds, labels = [], [], [], []
        for rec in by_model[model_name]:
            g = gold.get(rec["doc_id"])
            if g is None:
                continue
            cand = tokenize(rec["summary"])
            ref = tokenize(g.text)
            topics = []
            if idf is not None and rec["doc_id"] in docs_by_id:
                doc_tokens = [t for s in docs_by_id[rec["doc_id"]].sentences
                              for t in s.tokens]
                topics = select_topic_words(doc_tokens, idf)
            sims.append(similarity_metrics(cand, ref, idf, topics))
            scores = rec.get("scores")
            if scores is not None:
                positive = set(g.sentence_indices)
                order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
                rel_lists.append([1 if i in positive else 0 for i in order])
                preds.extend(1 if s >= 0.5 else 0 for s in scores)
                labels.extend(1 if i in positive else 0 for i in range(len(scores)))
        if sims:
            n = len(sims)
            report["similarity"][model_name] = {
                key: sum(s[key] for s in sims) / n for key in sims[0]}
        if rel_lists:
            row = {}
            for k in (1, 3):
                row[f"ndcg@{k}"] = sum(ndcg_at_k(r, k) for r in rel_lists) / len(rel_lists)
                row[f"map@{k}"] = map_at_k(rel_lists, k)
            report["ranking"][model_name] = row
        if labels:
            cls = classification_report(preds, labels)
            row = {"accuracy": cls["accuracy"]}
            for c in (0, 1):
                stats = cls["per_class"].get(c, {"precision": 0.0, "recall": 0.0,
                                                 "f1": 0.0})
                row[f"precision_{c}"] = stats["precision"]
                row[f"recall_{c}"] = stats["recall"]
                row[f"f1_{c}"] = stats["f1"]
            report["classification"][model_name] = row

    out_dir = os.path.dirname(os.path.abspath(args.report)) or "."
    paths = write_report(report, out_dir)
    if os.path.abspath(paths["json"]) != os.path.abspath(args.report):
        os.replace(paths["json"], args.report)
    print(f"wrote {args.report}")
    return 0


def cmd_synth(args) -> int:
    docs, gold = synth_corpus(args.seed, args.n_docs, args.context_dependence)
    with open(args.out, "w", encoding="utf-8") as fh:
        from .corpus import document_to_record
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc), separators=(",", ":")) + "\n")
    save_gold(gold, args.gold)
    print(f"wrote {args.out} and {args.gold}: {len(docs)} documents")
    return 0


def cmd_experiment(args) -> int:
    spec = parse_experiment_file(args.config)
    if args.seed != 7:
        spec.seed = args.seed
    if args.preset != "desk":
        spec.preset = args.preset
    out_dir = args.out_dir or spec.out_dir
    report = run_experiment(spec, out_dir)
    for section in ("similarity", "ranking", "classification"):
        for model_name, row in report[section].items():
            cells = " ".join(f"{k}={v:.4f}" for k, v in row.items())
            print(f"{section:14s} {model_name:10s} {cells}")
    print(f"report written to {out_dir}")
    return 0


def _write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    sys.exit(main())
