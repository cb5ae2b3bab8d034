"""LDA by collapsed Gibbs sampling, UMass-style coherence and topic-count selection."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from torscope import _gibbs

MODEL_FORMAT = "torscope.lda/1"

_TOKEN_RE = re.compile(r"[^\W_]+")


class EmptyVocabulary(ValueError):
    pass


class CoherenceError(ValueError):
    pass


@lru_cache(maxsize=1)
def english_stopwords() -> frozenset[str]:
    text = (resources.files("torscope") / "data" / "stopwords.txt").read_text("utf-8")
    return frozenset(text.split())


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase word tokens without punctuation, single characters or stopwords."""
    stop = english_stopwords() if stopwords is None else frozenset(stopwords)
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) > 1 and t not in stop]


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    doc_freq: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def index(self, word: str) -> int:
        return self._index[word]

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        idx = self._index
        return np.array([idx[t] for t in tokens if t in idx], dtype=np.int64)

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()[:16]


def build_vocabulary(
    docs: Sequence[Sequence[str]],
    min_df: int = 1,
    stopwords: Iterable[str] = (),
) -> Vocabulary:
    """Lowercased tokens appearing in at least ``min_df`` documents, minus stopwords."""
    if not docs:
        raise ValueError("no documents")
    stop = {s.lower() for s in stopwords}
    df: dict[str, int] = {}
    for doc in docs:
        for tok in {t.lower() for t in doc}:
            df[tok] = df.get(tok, 0) + 1
    words = sorted(w for w, c in df.items() if c >= min_df and w not in stop)
    if not words:
        raise EmptyVocabulary("every token was filtered out of the vocabulary")
    return Vocabulary(tuple(words), tuple(df[w] for w in words))


@dataclass
class TopicModel:
    T: int
    vocabulary: Vocabulary
    phi: np.ndarray  # T x M, p(word | topic)
    theta: np.ndarray  # N x T, p(topic | doc)
    alpha: float
    beta: float
    seed: int
    iters: int
    assignments: list[np.ndarray] = field(default_factory=list, repr=False)

    def top_word_ids(self, t: int, n: int = 10) -> list[int]:
        # stable sort keeps ties in vocabulary order
        return [int(i) for i in np.argsort(-self.phi[t], kind="stable")[:n]]

    def top_words(self, t: int, n: int = 10) -> list[str]:
        return [self.vocabulary.words[i] for i in self.top_word_ids(t, n)]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.vocabulary.fingerprint().encode())
        h.update(np.ascontiguousarray(self.phi).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "T": self.T,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iters": self.iters,
            "vocabulary": list(self.vocabulary.words),
            "doc_freq": list(self.vocabulary.doc_freq),
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TopicModel":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {data.get('format')!r}")
        vocab = Vocabulary(tuple(data["vocabulary"]), tuple(data["doc_freq"]))
        return cls(
            T=int(data["T"]),
            vocabulary=vocab,
            phi=np.asarray(data["phi"], dtype=float),
            theta=np.asarray(data["theta"], dtype=float).reshape(-1, int(data["T"])),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            seed=int(data["seed"]),
            iters=int(data["iters"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_lda(
    docs: Sequence[Sequence[str]],
    T: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iters: int = 1000,
    seed: int = 0,
    vocabulary: Vocabulary | None = None,
) -> TopicModel:
    """Fit LDA with a collapsed Gibbs sampler.

    ``alpha`` defaults to ``50 / T``. Tokens outside ``vocabulary`` are
    ignored; without one, every distinct token is used. ``phi`` and ``theta``
    are posterior means given the final sample.
    """
    if not docs:
        raise ValueError("no documents to fit")
    if T < 2:
        raise ValueError("T must be >= 2")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if alpha is None:
        alpha = 50.0 / T
    if vocabulary is None:
        vocabulary = build_vocabulary(docs)
    encoded = [vocabulary.encode(d) for d in docs]
    lengths = np.array([len(e) for e in encoded], dtype=np.int64)
    words = np.concatenate(encoded) if lengths.sum() else np.zeros(0, dtype=np.int64)
    doc_of = np.repeat(np.arange(len(docs), dtype=np.int64), lengths)

    rng = np.random.default_rng(seed)
    M = len(vocabulary)
    z = rng.integers(0, T, size=words.shape[0]).astype(np.int64)
    ndk = np.zeros((len(docs), T), dtype=np.int64)
    nkw = np.zeros((T, M), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    for _ in range(iters):
        _gibbs.sweep(words, doc_of, z, ndk, nkw, nk, float(alpha), float(beta),
                     rng.random(words.shape[0]))

    phi = (nkw + beta) / (nk[:, None] + M * beta)
    theta = (ndk + alpha) / (lengths[:, None] + T * alpha)
    splits = np.cumsum(lengths)[:-1]
    return TopicModel(
        T=T,
        vocabulary=vocabulary,
        phi=phi,
        theta=theta,
        alpha=float(alpha),
        beta=float(beta),
        seed=seed,
        iters=iters,
        assignments=np.split(z, splits),
    )


# -- coherence ---------------------------------------------------------------


class DocumentIndex:
    """Document frequencies and co-document frequencies over a fixed document set."""

    def __init__(self, docs: Iterable[Iterable[str]]):
        self.postings: dict[str, set[int]] = {}
        n = 0
        for i, doc in enumerate(docs):
            for w in set(doc):
                self.postings.setdefault(w, set()).add(i)
            n = i + 1
        self.n_docs = n

    def df(self, w: str) -> int:
        return len(self.postings.get(w, ()))

    def co_df(self, a: str, b: str) -> int:
        pa, pb = self.postings.get(a, set()), self.postings.get(b, set())
        if len(pa) > len(pb):
            pa, pb = pb, pa
        return sum(1 for d in pa if d in pb)


def coherence(top_words: Sequence[str], docs) -> float:
    """Sum over ordered pairs j < i of log((F(w_i, w_j) + 1) / F(w_j)).

    ``docs`` is either a :class:`DocumentIndex` or an iterable of token lists.
    The order of ``top_words`` matters; pass them by descending probability.
    """
    index = docs if isinstance(docs, DocumentIndex) else DocumentIndex(docs)
    for w in top_words:
        if index.df(w) == 0:
            raise CoherenceError(f"top word {w!r} occurs in no document")
    total = 0.0
    for i in range(1, len(top_words)):
        for j in range(i):
            wi, wj = top_words[i], top_words[j]
            total += math.log((index.co_df(wi, wj) + 1) / index.df(wj))
    return total


def mean_coherence(model: TopicModel, index: DocumentIndex, n: int = 10) -> float:
    return sum(coherence(model.top_words(t, n), index) for t in range(model.T)) / model.T


@dataclass
class Selection:
    T: int
    scores: dict[int, float]  # candidate T -> mean coherence
    models: dict[int, TopicModel]

    @property
    def model(self) -> TopicModel:
        return self.models[self.T]


def select_topic_count(
    docs: Sequence[Sequence[str]],
    candidates: Iterable[int] = range(3, 16),
    min_len: int = 50,
    n: int = 10,
    *,
    beta: float = 0.01,
    iters: int = 1000,
    seed: int = 0,
    vocabulary: Vocabulary | None = None,
) -> Selection:
    """Fit one model per candidate T and keep the one whose mean coherence is nearest zero.

    Only documents with more than ``min_len`` tokens take part, both in
    fitting and in the coherence counts. Ties go to the smaller T.
    """
    kept = [list(d) for d in docs if len(d) > min_len]
    if not kept:
        raise ValueError(f"no documents longer than {min_len} tokens")
    if vocabulary is None:
        vocabulary = build_vocabulary(kept)
    index = DocumentIndex(kept)
    scores, models = {}, {}
    for T in sorted(set(candidates)):
        model = fit_lda(kept, T, beta=beta, iters=iters, seed=seed, vocabulary=vocabulary)
        models[T] = model
        scores[T] = mean_coherence(model, index, n)
    best = min(scores, key=lambda T: (abs(scores[T]), T))
    return Selection(best, scores, models)


# -- domain assignment -------------------------------------------------------


def infer_topics(model: TopicModel, tokens: Sequence[str], iters: int = 200,
                 seed: int | None = None) -> np.ndarray:
    """Topic distribution of an unseen document by Gibbs fold-in with ``phi`` fixed."""
    words = model.vocabulary.encode(tokens)
    if words.shape[0] == 0:
        raise ValueError("document has no in-vocabulary tokens")
    rng = np.random.default_rng(model.seed if seed is None else seed)
    z = rng.integers(0, model.T, size=words.shape[0]).astype(np.int64)
    nd = np.bincount(z, minlength=model.T).astype(np.int64)
    phi = np.ascontiguousarray(model.phi)
    for _ in range(iters):
        _gibbs.fold_in_sweep(words, z, nd, phi, model.alpha, rng.random(words.shape[0]))
    return (nd + model.alpha) / (words.shape[0] + model.T * model.alpha)


def dominant_topic(model: TopicModel, tokens: Sequence[str], iters: int = 200,
                   seed: int | None = None) -> int:
    """Most probable topic of ``tokens``; ties go to the lower topic id.

    When every topic gives the document's words identical probability the
    topics are exchangeable for it, and topic 0 is returned without sampling.
    """
    if not tokens:
        raise ValueError("empty document")
    words = model.vocabulary.encode(tokens)
    if words.shape[0] == 0:
        raise ValueError("document has no in-vocabulary tokens")
    cols = model.phi[:, np.unique(words)]
    if np.all(cols == cols[0]):
        return 0
    return int(np.argmax(infer_topics(model, tokens, iters, seed)))
