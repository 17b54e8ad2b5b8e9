import math

import numpy as np
import pytest

from ctxsum.context import (Blacklist, ChannelVector, CombinedContext,
                            ContextSpace,
                            build_channel_vector, build_document_context,
                            combine_channels, extract_context_summary,
                            generate_labels, load_contexts, load_labels,
                            project_context, save_contexts, save_labels,
                            score_sentence, score_sentences, word_context_score)
from ctxsum.corpus import Document, IdfTable, Vocabulary
from ctxsum.embed import EmbeddingMatrix
from ctxsum.errors import BetaNegative, EmptyBlacklist, EmptyDocument


def _vocab(words, stopwords=()):
    return Vocabulary(words=list(words),
                      index={w: i for i, w in enumerate(words)},
                      counts={w: 1 for w in words},
                      stopwords=set(stopwords))


def _idf(values, num_docs=10, variant="log"):
    return IdfTable(df={w: 1 for w in values}, idf=dict(values),
                    num_docs=num_docs, variant=variant)


def test_channel_vector_normalization():
    doc = Document(id="d", title="", body="",
                   metadata={"backpack": 2, "hiking": 1})
    vocab = _vocab(["backpack", "hiking"])
    cv = build_channel_vector(doc, "seller", vocab)
    assert cv.normalized
    assert cv.weights["backpack"] == pytest.approx(2 / math.sqrt(5))
    assert cv.weights["hiking"] == pytest.approx(1 / math.sqrt(5))
    norm = math.sqrt(sum(v * v for v in cv.weights.values()))
    assert norm == pytest.approx(1.0, abs=1e-9)


def test_channel_vector_empty_channel():
    doc = Document(id="d", title="", body="x")
    cv = build_channel_vector(doc, "query", _vocab(["x"]))
    assert cv.weights == {} and not cv.normalized


def test_channel_vector_stopwords_only():
    doc = Document(id="d", title="", body="", queries={"the": 5})
    vocab = _vocab(["x"], stopwords={"the"})
    cv = build_channel_vector(doc, "query", vocab)
    assert cv.weights == {} and not cv.normalized


def _channels(doc_id, seller, query, browse):
    return (ChannelVector(doc_id, "seller", seller, bool(seller)),
            ChannelVector(doc_id, "query", query, bool(query)),
            ChannelVector(doc_id, "browse", browse, bool(browse)))


def test_combine_zero_channels_pass_through():
    cs, cq, cb = _channels("d", {"a": 0.6, "b": 0.8}, {}, {})
    idf = _idf({"a": 1.0, "b": 1.0})
    ctx = combine_channels(cs, cq, cb, (1, 1, 1), idf)
    assert ctx.combined == {"a": 0.6, "b": 0.8}


def test_combine_zero_betas():
    cs, cq, cb = _channels("d", {"a": 1.0}, {"b": 1.0}, {})
    ctx = combine_channels(cs, cq, cb, (0, 0, 0), _idf({"a": 1.0, "b": 1.0}))
    assert ctx.combined == {}
    assert ctx.idf_weighted == {}


def test_combine_negative_beta():
    cs, cq, cb = _channels("d", {"a": 1.0}, {}, {})
    with pytest.raises(BetaNegative):
        combine_channels(cs, cq, cb, (1, -1, 1), _idf({"a": 1.0}))


def test_combine_matches_per_dimension_oracle():
    words = ["a", "b", "c", "d", "e"]
    rng = np.random.default_rng(8)
    raw = [dict(zip(words, rng.random(5))) for _ in range(3)]
    unit = []
    for weights in raw:
        norm = math.sqrt(sum(v * v for v in weights.values()))
        unit.append({w: v / norm for w, v in weights.items()})
    idf_vals = dict(zip(words, rng.random(5) + 0.5))
    betas = (1.0, 0.5, 2.0)
    cs, cq, cb = _channels("d", unit[0], unit[1], unit[2])
    ctx = combine_channels(cs, cq, cb, betas, _idf(idf_vals))
    for w in words:
        expected = sum(b * u[w] for b, u in zip(betas, unit))
        assert ctx.combined[w] == pytest.approx(expected, abs=1e-12)
        assert ctx.idf_weighted[w] == pytest.approx(expected * idf_vals[w], abs=1e-12)


def _embed(words, rows):
    arr = np.array(rows, dtype=np.float64)
    return EmbeddingMatrix(input_vectors=arr, output_vectors=np.zeros_like(arr),
                           words=list(words))


def test_project_single_word_is_embedding_row():
    m = _embed(["a", "b"], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    ctx = CombinedContext("d", (1, 1, 1), {"b": 1.0}, {"b": 1.0})
    v = project_context(ctx, m)
    np.testing.assert_allclose(v.v, [4.0, 5.0, 6.0])


def test_project_zero_context():
    m = _embed(["a"], [[1.0, 1.0]])
    ctx = CombinedContext("d", (1, 1, 1), {}, {})
    assert not project_context(ctx, m).v.any()


def test_project_matches_naive_loop():
    rng = np.random.default_rng(3)
    words = ["a", "b", "c"]
    m = _embed(words, rng.standard_normal((3, 6)))
    weights = {w: float(x) for w, x in zip(words, rng.random(3))}
    ctx = CombinedContext("d", (1, 1, 1), weights, weights)
    got = project_context(ctx, m).v
    expected = np.zeros(6)
    for j in range(6):
        for i, w in enumerate(words):
            expected[j] += weights[w] * m.input_vectors[i, j]
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_project_linearity():
    # dyadic weights and entries make float arithmetic exact
    words = ["a", "b", "c", "d"]
    m = _embed(words, [[0.5, 0.25], [0.125, 1.0], [2.0, 0.5], [0.25, 0.75]])
    wa = {"a": 0.5, "c": 0.25}
    wb = {"b": 0.75, "c": 0.5, "d": 1.0}
    alpha = 2.0
    mix = {w: alpha * wa.get(w, 0.0) + wb.get(w, 0.0) for w in words}
    as_ctx = lambda w: CombinedContext("d", (1, 1, 1), w, w)
    left = project_context(as_ctx(mix), m).v
    right = alpha * project_context(as_ctx(wa), m).v + project_context(as_ctx(wb), m).v
    np.testing.assert_array_equal(left, right)


def _space_fixture():
    words = ["alpha", "beta", "gamma", "delta"]
    vocab = _vocab(words, stopwords={"the"})
    m = _embed(words, [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0]])
    idf = _idf({w: 0.5 for w in words})
    return ContextSpace(vocab=vocab, idf=idf, matrix=m)


def test_word_score_stopword_zero():
    space = _space_fixture()
    ctx = CombinedContext("d", (1, 1, 1), {"alpha": 1.0}, {"alpha": 0.8})
    v_d = project_context(ctx, space.matrix)
    assert word_context_score("the", ctx, v_d, space) == 0.0


def test_word_score_direct_support():
    space = _space_fixture()
    ctx = CombinedContext("d", (1, 1, 1), {"alpha": 1.0}, {"alpha": 0.8})
    v_d = project_context(ctx, space.matrix)
    assert word_context_score("alpha", ctx, v_d, space) == pytest.approx(0.8)


def test_word_score_orthogonal_embedding():
    space = _space_fixture()
    ctx = CombinedContext("d", (1, 1, 1), {"alpha": 1.0}, {"alpha": 0.8})
    v_d = project_context(ctx, space.matrix)  # = embedding of alpha = (0.8, 0)
    assert word_context_score("beta", ctx, v_d, space) == pytest.approx(0.0)


def test_word_score_out_of_vocab():
    space = _space_fixture()
    ctx = CombinedContext("d", (1, 1, 1), {}, {})
    v_d = project_context(ctx, space.matrix)
    assert word_context_score("unknown", ctx, v_d, space) == 0.0


def test_score_sentence_stopwords_and_support():
    space = _space_fixture()
    ctx = CombinedContext("d", (1, 1, 1), {"alpha": 1.0}, {"alpha": 0.8})
    v_d = project_context(ctx, space.matrix)
    assert score_sentence(["the", "the"], ctx, v_d, space) == 0.0
    assert score_sentence(["alpha"], ctx, v_d, space) == pytest.approx(0.8)
    assert score_sentence([], ctx, v_d, space) == 0.0


def test_score_sentence_matches_word_loop(small_world):
    space = small_world["space"]
    doc = small_world["docs"][0]
    dctx = small_world["contexts"][doc.id]
    for s in doc.sentences[:3]:
        total = sum(word_context_score(w, dctx.ctx, dctx.vector, space)
                    for w in s.tokens)
        got = score_sentence(s.tokens, dctx.ctx, dctx.vector, space)
        assert got == pytest.approx(total, rel=1e-12)
        norm = score_sentence(s.tokens, dctx.ctx, dctx.vector, space,
                              normalize=True)
        assert norm == pytest.approx(total / len(s.tokens), rel=1e-12)


def test_scale_invariance_of_ranking(small_world):
    space = small_world["space"]
    doc = small_world["docs"][1]
    scaled_idf = IdfTable(df=dict(space.idf.df),
                          idf={w: 3.0 * v for w, v in space.idf.idf.items()},
                          num_docs=space.idf.num_docs, variant=space.idf.variant)
    scaled_space = ContextSpace(vocab=space.vocab, idf=scaled_idf,
                                matrix=space.matrix)
    base = build_document_context(doc, space)
    scaled = build_document_context(doc, scaled_space)
    s0 = score_sentences(doc, base, space)
    s1 = score_sentences(doc, scaled, scaled_space)
    for a, b in zip(s0, s1):
        assert b.score == pytest.approx(3.0 * a.score, rel=1e-9)
        assert a.rank == b.rank


def test_channel_monotonicity_in_seller_frequency():
    # w dominates its channel: raising its metadata count never lowers the
    # score of a sentence containing it
    words = ["gadget", "filler", "pad"]
    vocab = _vocab(words)
    m = _embed(words, [[1.0, 0.2], [0.1, 0.9], [0.3, 0.3]])
    idf = _idf({w: 0.8 for w in words})
    space = ContextSpace(vocab=vocab, idf=idf, matrix=m)
    scores = []
    for count in (3, 5, 9):
        doc = Document(id="d", title="", body="gadget works.",
                       metadata={"gadget": count, "filler": 1})
        dctx = build_document_context(doc, space)
        scores.append(score_sentence(["gadget"], dctx.ctx, dctx.vector, space))
    assert scores[0] <= scores[1] <= scores[2]


def test_blacklist_precedence_beats_top_score(small_world):
    # blacklist the best-scoring sentence of a document: it must come out
    # negative and the positive slot goes to the runner-up
    space = small_world["space"]
    doc = small_world["docs"][3]
    contexts = small_world["contexts"]
    scored = score_sentences(doc, contexts[doc.id], space)
    best = min(scored, key=lambda s: s.rank).sentence
    bl = Blacklist([" ".join(best.tokens)])
    labeled = generate_labels([doc], contexts, bl, space, top_m=1)
    by_idx = {l.sentence.index: l for l in labeled}
    assert by_idx[best.index].label == "negative"
    runner_up = [s for s in scored if s.sentence.index != best.index]
    expected = min(runner_up, key=lambda s: s.rank).sentence.index
    positives = [i for i, l in by_idx.items() if l.label == "positive"]
    assert positives == [expected]


def test_rank_is_permutation(small_world):
    doc = small_world["docs"][2]
    scored = score_sentences(doc, small_world["contexts"][doc.id],
                             small_world["space"])
    assert sorted(s.rank for s in scored) == list(range(1, len(scored) + 1))


def _scored_doc(scores, lengths):
    from ctxsum.corpus import Sentence
    doc = Document(id="d", title="", body="irrelevant")
    doc.sentences = [Sentence("d", i, "x" * (length - 1) + ".", [f"w{i}"], length)
                     for i, length in enumerate(lengths)]
    return doc


def _extract_with_scores(doc, scores, budget):
    from ctxsum.context import budget_select
    ranked = sorted(doc.sentences, key=lambda s: (-scores[s.index], s.index))
    return budget_select(ranked, budget)


def test_extract_top1_guarantee_over_budget():
    doc = _scored_doc([1.0], [900])
    got = _extract_with_scores(doc, [1.0], 800)
    assert [s.index for s in got] == [0]


def test_extract_budget_example():
    doc = _scored_doc([3.0, 1.0, 2.0], [100, 100, 100])
    got = _extract_with_scores(doc, [3.0, 1.0, 2.0], 250)
    assert [s.index for s in got] == [0, 2]


def test_extract_matches_greedy_oracle():
    rng = np.random.default_rng(12)
    for _ in range(30):
        n = 10
        scores = list(rng.random(n))
        lengths = list(rng.integers(40, 300, size=n))
        doc = _scored_doc(scores, lengths)
        budget = int(rng.integers(100, 900))
        got = [s.index for s in _extract_with_scores(doc, scores, budget)]
        # independent greedy: walk rank order, stop at first overflow
        order = sorted(range(n), key=lambda i: (-scores[i], i))
        picked = [order[0]]
        used = lengths[order[0]]
        for i in order[1:]:
            if used + lengths[i] > budget:
                break
            picked.append(i)
            used += lengths[i]
        assert got == sorted(picked)


def test_extract_budget_property(small_world):
    space = small_world["space"]
    for doc in small_world["docs"][:10]:
        dctx = small_world["contexts"][doc.id]
        summary = extract_context_summary(doc, dctx, space, char_budget=120)
        total = sum(s.char_len for s in summary)
        assert total <= 120 or len(summary) == 1
        assert [s.index for s in summary] == sorted(s.index for s in summary)


def test_extract_empty_document(small_world):
    doc = Document(id="empty", title="", body="x")
    doc.sentences = []
    with pytest.raises(EmptyDocument):
        extract_context_summary(doc, small_world["contexts"]["d00000"],
                                small_world["space"])


def test_extract_end_to_end(small_world):
    doc = small_world["docs"][0]
    summary = extract_context_summary(doc, small_world["contexts"][doc.id],
                                      small_world["space"], char_budget=800)
    assert summary
    assert all(s.doc_id == doc.id for s in summary)


def test_blacklist_phrase_matching():
    bl = Blacklist(["rate me 5 stars", "free shipping"])
    assert bl.matches("please rate me 5 stars thanks".split())
    assert bl.matches(["free", "shipping"])
    assert not bl.matches(["free", "stuff", "shipping"])
    assert not bl.matches(["rate", "me"])


def test_generate_labels_rules(small_world):
    space = small_world["space"]
    docs = small_world["docs"][:5]
    contexts = small_world["contexts"]
    # blacklist built from a phrase in one known sentence
    victim = docs[0].sentences[0]
    bl = Blacklist([" ".join(victim.tokens[:3])])
    labeled = generate_labels(docs, contexts, bl, space, top_m=1)
    by_key = {(l.sentence.doc_id, l.sentence.index): l for l in labeled}
    # blacklisted sentence is negative, never positive
    item = by_key[(victim.doc_id, victim.index)]
    assert item.label == "negative" and item.source == "blacklist"
    # top_m=1: exactly one positive per doc among clean sentences
    for doc in docs:
        pos = [l for l in labeled
               if l.sentence.doc_id == doc.id and l.label == "positive"]
        assert len(pos) == 1
        # the positive is the best-scoring clean sentence
        scored = score_sentences(doc, contexts[doc.id], space)
        clean = [s for s in scored if not bl.matches(s.sentence.tokens)]
        best = min(clean, key=lambda s: s.rank)
        assert pos[0].sentence.index == best.sentence.index
    # mid-ranked clean sentences are absent
    for doc in docs:
        tagged = [l.sentence.index for l in labeled if l.sentence.doc_id == doc.id]
        assert len(tagged) < len(doc.sentences)
    # no sentence is both positive and negative
    assert len(by_key) == len(labeled)


def test_generate_labels_empty_blacklist(small_world):
    with pytest.raises(EmptyBlacklist):
        generate_labels(small_world["docs"][:2], small_world["contexts"],
                        Blacklist([]), small_world["space"])


def test_context_and_label_round_trips(tmp_path, small_world):
    contexts = {k: small_world["contexts"][k] for k in list(small_world["contexts"])[:3]}
    path = tmp_path / "ctx.bin"
    save_contexts(contexts, path)
    loaded = load_contexts(path)
    assert set(loaded) == set(contexts)
    for key in contexts:
        np.testing.assert_array_equal(loaded[key].vector.v, contexts[key].vector.v)
        assert loaded[key].ctx.idf_weighted == contexts[key].ctx.idf_weighted

    space = small_world["space"]
    bl = Blacklist(["free shipping"])
    labeled = generate_labels(small_world["docs"][:3], small_world["contexts"],
                              bl, space, top_m=2)
    lpath = tmp_path / "labels.jsonl"
    save_labels(labeled, lpath)
    by_id = {d.id: d for d in small_world["docs"]}
    loaded_labels = load_labels(lpath, by_id)
    assert len(loaded_labels) == len(labeled)
    assert all(a.label == b.label and a.sentence.index == b.sentence.index
               for a, b in zip(labeled, loaded_labels))
