import numpy as np
import pytest

from ctxsum.context import ContextSpace, build_document_context
from ctxsum.corpus import Corpus, build_vocabulary, compute_idf, load_stopwords
from ctxsum.embed import SgnsConfig, train_sgns
from ctxsum.synth import synth_corpus


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def small_world(stopwords):
    """A small synthetic corpus with embeddings, IDF and contexts, shared by
    the cheaper model/context tests."""
    docs, gold = synth_corpus(seed=5, n_docs=40)
    vocab = build_vocabulary(docs, stopwords)
    corpus = Corpus(documents=docs, vocab=vocab)
    matrix = train_sgns(corpus, SgnsConfig(dim=16, window=3, epochs=2, seed=5))
    idf = compute_idf(docs, vocab, "log")
    space = ContextSpace(vocab=vocab, idf=idf, matrix=matrix)
    contexts = {d.id: build_document_context(d, space) for d in docs}
    return {"docs": docs, "gold": gold, "corpus": corpus, "matrix": matrix,
            "idf": idf, "space": space, "contexts": contexts}


def rel_err(analytic, numeric, floor=1e-6):
    """Per-entry relative error; entries whose gradients sit below the
    central-difference resolution compare as absolute differences."""
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    denom = np.where(denom > floor, denom, 1.0)
    return float((np.abs(analytic - numeric) / denom).max())


def finite_difference(build_loss, params, eps=1e-5, floor=1e-6):
    """Max relative error between backprop gradients and central differences,
    across all given parameter tensors (float64 graphs)."""
    loss = build_loss()
    loss.backward()
    worst = 0.0
    for p in params:
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(build_loss().data)
            flat[i] = orig - eps
            down = float(build_loss().data)
            flat[i] = orig
            numeric[i] = (up - down) / (2 * eps)
        worst = max(worst, rel_err(grad.reshape(-1), numeric, floor))
        p.zero_grad()
    return worst
