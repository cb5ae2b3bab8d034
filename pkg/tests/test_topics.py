import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from synth import cluster_corpus, purity
from torscope import _gibbs, topics


def test_tokenize():
    assert topics.tokenize("The Market's BTC-prices: a 2x deal!") == ["market", "btc", "prices", "2x", "deal"]
    assert topics.tokenize("the a of", stopwords=()) == ["the", "of"]


def test_stopwords_loaded():
    sw = topics.english_stopwords()
    assert {"the", "and", "is"} <= sw and "bitcoin" not in sw


def test_build_vocabulary_min_df():
    v = topics.build_vocabulary([["a", "b"], ["b", "c"]], min_df=2)
    assert v.words == ("b",) and v.doc_freq == (2,)


def test_build_vocabulary_identity():
    v = topics.build_vocabulary([["A", "b"], ["b", "c"]])
    assert v.words == ("a", "b", "c")
    assert [v.index(w) for w in v.words] == [0, 1, 2]


def test_build_vocabulary_empty():
    with pytest.raises(topics.EmptyVocabulary):
        topics.build_vocabulary([["the"]], stopwords={"the"})
    with pytest.raises(ValueError):
        topics.build_vocabulary([])


def test_fixture_vocabulary_golden():
    import json
    domains = json.loads((FIXTURES / "corpus3" / "domain_map.json").read_text(encoding="utf-8"))
    v = topics.build_vocabulary([topics.tokenize(t) for t in domains.values()])
    lines = (FIXTURES / "corpus3" / "vocabulary.tsv").read_text(encoding="utf-8").splitlines()
    assert [f"{w}\t{d}" for w, d in zip(v.words, v.doc_freq)] == lines
    assert not set(v.words) & topics.english_stopwords()


# -- sampler -----------------------------------------------------------------


def reference_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, uniforms):
    """Plain-Python collapsed Gibbs sweep: the textbook conditional, inverse-CDF draw."""
    T, M = nkw.shape
    for i, (w, d) in enumerate(zip(words, docs)):
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        p = [(ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + M * beta) for t in range(T)]
        u = uniforms[i] * sum(p)
        acc, k = 0.0, T - 1
        for t in range(T):
            acc += p[t]
            if u < acc:
                k = t
                break
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


def test_compiled_sweep_matches_reference():
    rng = np.random.default_rng(3)
    T, M, D = 4, 12, 6
    words = rng.integers(0, M, 200)
    docs = np.sort(rng.integers(0, D, 200))
    z = rng.integers(0, T, 200)
    state = []
    for _ in range(2):
        ndk = np.zeros((D, T), dtype=np.int64)
        nkw = np.zeros((T, M), dtype=np.int64)
        np.add.at(ndk, (docs, z), 1)
        np.add.at(nkw, (z, words), 1)
        state.append([z.copy(), ndk, nkw, nkw.sum(axis=1)])
    for sweep_no in range(5):
        u = rng.random(200)
        _gibbs.sweep(words, docs, *state[0], 0.5, 0.1, u)
        reference_sweep(words, docs, *state[1], 0.5, 0.1, u)
        for a, b in zip(state[0], state[1]):
            np.testing.assert_array_equal(a, b)


def test_fit_two_disjoint_sets():
    docs, clusters = cluster_corpus(2, n_docs=100, doc_len=60, seed=1)
    model = topics.fit_lda(docs, 2, iters=200, seed=0)
    for t in range(2):
        top = set(model.top_words(t, 5))
        assert any(top <= c for c in clusters)


def test_single_document():
    model = topics.fit_lda([["a", "b", "c"]], 2, iters=5)
    assert model.theta.shape == (1, 2)
    assert model.theta[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_fit_deterministic():
    docs, _ = cluster_corpus(3, n_docs=60, doc_len=30, seed=2)
    a = topics.fit_lda(docs, 3, iters=30, seed=5)
    b = topics.fit_lda(docs, 3, iters=30, seed=5)
    np.testing.assert_array_equal(a.phi, b.phi)
    assert a.fingerprint() == b.fingerprint()


def test_fit_errors():
    with pytest.raises(ValueError):
        topics.fit_lda([], 2)
    with pytest.raises(ValueError):
        topics.fit_lda([["a"]], 1)
    with pytest.raises(ValueError):
        topics.fit_lda([["a"]], 2, iters=0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdefgh"), min_size=0, max_size=15), min_size=1, max_size=6),
       st.integers(2, 5), st.integers(0, 2**16))
def test_stochastic_rows(docs, T, seed):
    if not any(docs):
        docs = docs + [["a"]]
    model = topics.fit_lda(docs, T, iters=3, seed=seed)
    assert np.all(model.phi >= 0) and np.all(model.theta >= 0)
    np.testing.assert_allclose(model.phi.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(model.theta.sum(axis=1), 1.0, atol=1e-9)
    assert [len(z) for z in model.assignments] == [len(d) for d in docs]


def test_model_roundtrip(tmp_path):
    docs, _ = cluster_corpus(2, n_docs=20, doc_len=20)
    model = topics.fit_lda(docs, 2, iters=10)
    model.save(tmp_path / "m.json")
    back = topics.TopicModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.phi, model.phi)
    np.testing.assert_array_equal(back.theta, model.theta)
    assert back.fingerprint() == model.fingerprint()
    assert back.top_words(0) == model.top_words(0)
    assert (back.T, back.alpha, back.beta, back.seed, back.iters) == (2, 25.0, 0.01, 0, 10)


def test_top_words_sorted():
    docs, _ = cluster_corpus(2, n_docs=40, doc_len=40)
    model = topics.fit_lda(docs, 2, iters=20)
    for t in range(2):
        ids = model.top_word_ids(t, 10)
        probs = model.phi[t, ids]
        assert len(ids) == 10 and np.all(np.diff(probs) <= 0)


# -- coherence ---------------------------------------------------------------


def test_coherence_perfect_cooccurrence():
    docs = [["w1", "w2"]] * 4 + [["w1"]]
    assert topics.coherence(["w1", "w2"], docs) == 0.0


def test_coherence_no_cooccurrence():
    docs = [["w1"]] * 10 + [["w2"]]
    assert topics.coherence(["w1", "w2"], docs) == pytest.approx(math.log(1 / 10))
    assert topics.coherence(["w1", "w2"], docs) == pytest.approx(-2.3026, abs=1e-4)


def test_coherence_hand_example():
    docs = [["a", "b"], ["a"], ["b", "c"]]
    # (b|a): log(2/2); (c|a): log(1/2); (c|b): log(2/2)
    assert topics.coherence(["a", "b", "c"], docs) == pytest.approx(-math.log(2))


def test_coherence_missing_word():
    with pytest.raises(topics.CoherenceError, match="zzz"):
        topics.coherence(["a", "zzz"], [["a"]])


def brute_coherence(words, docs):
    total = 0.0
    for i in range(1, len(words)):
        for j in range(i):
            f_ij = sum(1 for d in docs if words[i] in d and words[j] in d)
            f_j = sum(1 for d in docs if words[j] in d)
            total += math.log((f_ij + 1) / f_j)
    return total


@given(st.lists(st.sets(st.sampled_from("abcdef"), min_size=1), min_size=1, max_size=12),
       st.permutations("abc"))
def test_coherence_brute_force(docs, order):
    docs = [sorted(d) for d in docs] + [["a", "b", "c"]]
    words = list(order)
    assert topics.coherence(words, docs) == pytest.approx(brute_coherence(words, docs), abs=1e-12)


def test_coherence_order_sensitive():
    docs = [["a", "b"], ["a"], ["a"], ["b", "c"], ["c"]]
    values = {topics.coherence(list(p), docs) for p in itertools.permutations("abc")}
    assert len(values) > 1


# -- selection ---------------------------------------------------------------


def test_select_single_candidate():
    docs, _ = cluster_corpus(2, n_docs=30, doc_len=60)
    assert topics.select_topic_count(docs, [3], iters=10).T == 3


def test_select_two_clusters():
    docs, _ = cluster_corpus(2, n_docs=200, doc_len=80, seed=4)
    sel = topics.select_topic_count(docs, [2, 6], iters=200, seed=0)
    assert sel.T == 2
    assert sel.scores == topics.select_topic_count(docs, [6, 2], iters=200, seed=0).scores


def test_select_filters_short_docs():
    with pytest.raises(ValueError):
        topics.select_topic_count([["a"] * 50], [2])


def test_select_tie_goes_to_smaller(monkeypatch):
    monkeypatch.setattr(topics, "mean_coherence", lambda model, index, n: -1.0)
    docs, _ = cluster_corpus(2, n_docs=10, doc_len=60)
    assert topics.select_topic_count(docs, [5, 3, 4], iters=1).T == 3


def test_generative_recovery_property():
    scores = []
    for seed in range(5):
        docs, clusters = cluster_corpus(3, n_docs=150, doc_len=60, seed=seed)
        model = topics.fit_lda(docs, 3, iters=150, seed=seed)
        scores.append(purity(model, clusters))
    assert np.mean(scores) >= 0.9


# -- assignment --------------------------------------------------------------


def test_dominant_topic_generative():
    docs, clusters = cluster_corpus(2, n_docs=100, doc_len=60, seed=7)
    model = topics.fit_lda(docs, 2, iters=200, seed=0)
    words0 = sorted(clusters[0])
    t0 = topics.dominant_topic(model, words0 * 2, seed=1)
    t1 = topics.dominant_topic(model, sorted(clusters[1]) * 2, seed=1)
    assert t0 != t1
    assert set(model.top_words(t0, 5)) <= clusters[0]


def test_dominant_topic_uniform_model_tie():
    docs = [["a", "b"], ["b", "a"]]
    model = topics.fit_lda(docs, 3, iters=2)
    model.phi[:] = 0.5
    assert topics.dominant_topic(model, ["a", "b", "a"]) == 0


def test_dominant_topic_deterministic_and_errors():
    docs, _ = cluster_corpus(3, n_docs=60, doc_len=40)
    model = topics.fit_lda(docs, 3, iters=30)
    text = docs[5] + docs[6]
    assert len({topics.dominant_topic(model, text, seed=3) for _ in range(3)}) == 1
    with pytest.raises(ValueError):
        topics.dominant_topic(model, [])
    with pytest.raises(ValueError):
        topics.dominant_topic(model, ["not-in-vocab"])


def test_infer_topics_is_distribution():
    docs, _ = cluster_corpus(2, n_docs=40, doc_len=40)
    model = topics.fit_lda(docs, 2, iters=20)
    p = topics.infer_topics(model, docs[0], seed=0)
    assert p.shape == (2,) and p.sum() == pytest.approx(1.0)
