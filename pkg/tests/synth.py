"""Synthetic generators shared by unit and acceptance tests."""

from collections import Counter

import numpy as np


def cluster_corpus(k, n_docs=500, doc_len=80, words_per_cluster=30, seed=0):
    """Documents each drawn from one of ``k`` disjoint word clusters (Zipf weights inside a cluster).

    Returns (docs, clusters) where clusters[c] is the set of words of cluster c.
    """
    rng = np.random.default_rng(seed)
    clusters = [[f"k{c}w{i:02d}" for i in range(words_per_cluster)] for c in range(k)]
    weights = 1.0 / np.arange(1, words_per_cluster + 1)
    weights /= weights.sum()
    docs = []
    for d in range(n_docs):
        c = d % k
        idx = rng.choice(words_per_cluster, size=doc_len, p=weights)
        docs.append([clusters[c][i] for i in idx])
    return docs, [set(c) for c in clusters]


def purity(model, clusters, n=5):
    """Mean over topics of the share of top-n words belonging to the topic's majority cluster."""
    where = {w: c for c, words in enumerate(clusters) for w in words}
    scores = []
    for t in range(model.T):
        counts = Counter(where.get(w) for w in model.top_words(t, n))
        scores.append(max(counts.values()) / n)
    return float(np.mean(scores))


def discrete_power_law(alpha, xmin, n, rng):
    """Inverse-CDF draws from p(x) ~ x^-alpha, x >= xmin, built from an explicit pmf table.

    Independent of torscope: the table is summed directly and the far tail
    beyond it (probability below 1e-9 for the exponents used in tests) is
    folded into the last entry.
    """
    ks = np.arange(xmin, xmin + 2_000_000, dtype=float)
    pmf = ks ** -alpha
    pmf /= pmf.sum()
    cdf = np.cumsum(pmf)
    u = rng.random(n)
    return (xmin + np.minimum(np.searchsorted(cdf, u, side="right"), ks.size - 1)).astype(np.int64)
