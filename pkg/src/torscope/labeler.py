"""Topic labeling with focused random-walk betweenness over a knowledge-graph snapshot."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

ALLOWED_PREDICATES = (
    "rdfs:type",
    "dcterms:subject",
    "skos:broader",
    "skos:broaderOf",
    "rdfs:subClassOf",
)

# spellings seen in DBpedia dumps and in the literature, mapped to the canonical five
PREDICATE_ALIASES = {
    "rdf:type": "rdfs:type",
    "a": "rdfs:type",
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#type": "rdfs:type",
    "http://purl.org/dc/terms/subject": "dcterms:subject",
    "http://www.w3.org/2004/02/skos/core#broader": "skos:broader",
    "http://www.w3.org/2004/02/skos/core#broaderOf": "skos:broaderOf",
    "http://www.w3.org/2000/01/rdf-schema#subClassOf": "rdfs:subClassOf",
    "rdfs:sub-ClassOf": "rdfs:subClassOf",
}


# currents are relative to a unit injection; anything smaller is inversion noise
_ZERO_CURRENT = 1e-12
# gammas closer than this count as tied, so the label tie rule does not depend on rounding
_GAMMA_DECIMALS = 10


class LabelingError(ValueError):
    pass


def canonical_predicate(p: str) -> str | None:
    p = p.strip().strip("<>")
    p = PREDICATE_ALIASES.get(p, p)
    return p if p in ALLOWED_PREDICATES else None


def concept_label(concept: str) -> str:
    """Readable, normalized label of a concept identifier.

    ``http://dbpedia.org/resource/Category:Digital_currencies`` and
    ``dbc:Digital_currencies`` both become ``"digital currencies"``.
    """
    local = concept.strip().strip("<>")
    for sep in ("/", "#"):
        local = local.rsplit(sep, 1)[-1]
    local = local.rsplit(":", 1)[-1]
    return " ".join(local.replace("_", " ").lower().split())


@dataclass
class KnowledgeGraph:
    concepts: list[str]
    labels: list[str]
    edges: list[tuple[int, str, int]]  # (subject, predicate, object)
    skipped_lines: int = 0

    def __post_init__(self):
        self._out: list[list[int]] = [[] for _ in self.concepts]
        self._by_label: dict[str, list[int]] = {}
        for s, _, o in self.edges:
            self._out[s].append(o)
        for i, lab in enumerate(self.labels):
            self._by_label.setdefault(lab, []).append(i)

    def __len__(self) -> int:
        return len(self.concepts)

    def successors(self, v: int) -> list[int]:
        return self._out[v]

    def match(self, word: str) -> list[int]:
        return self._by_label.get(" ".join(word.lower().replace("_", " ").split()), [])

    def dump(self) -> list[str]:
        """Canonical text form, one ``subject<TAB>predicate<TAB>object`` per line, sorted."""
        return sorted(f"{self.concepts[s]}\t{p}\t{self.concepts[o]}" for s, p, o in set(self.edges))


def load_knowledge_graph(path: str | Path) -> KnowledgeGraph:
    """Read a TSV triple snapshot, keeping only the taxonomic predicates."""
    index: dict[str, int] = {}
    concepts: list[str] = []
    edges: set[tuple[int, str, int]] = set()
    skipped = 0
    seen_triples = 0

    def vid(c: str) -> int:
        if c not in index:
            index[c] = len(concepts)
            concepts.append(c)
        return index[c]

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(x.strip() for x in parts):
                skipped += 1
                continue
            seen_triples += 1
            pred = canonical_predicate(parts[1])
            if pred is None:
                continue
            s, o = parts[0].strip().strip("<>"), parts[2].strip().strip("<>")
            edges.add((vid(s), pred, vid(o)))
    if skipped:
        log.warning("%s: skipped %d malformed lines", path, skipped)
    if seen_triples == 0:
        raise LabelingError(f"{path}: no triples")
    return KnowledgeGraph(
        concepts=concepts,
        labels=[concept_label(c) for c in concepts],
        edges=sorted(edges),
        skipped_lines=skipped,
    )


@dataclass
class CandidateSubgraph:
    vertices: list[int]  # knowledge-graph ids, sorted
    edges: list[tuple[int, int]]  # directed, in knowledge-graph ids
    anchors: list[int]

    def adjacency(self) -> np.ndarray:
        """Binary symmetric adjacency in ``vertices`` order."""
        pos = {v: i for i, v in enumerate(self.vertices)}
        A = np.zeros((len(self.vertices), len(self.vertices)))
        for s, o in self.edges:
            if s != o:
                A[pos[s], pos[o]] = A[pos[o], pos[s]] = 1.0
        return A


def candidate_subgraph(kg: KnowledgeGraph, top_words: Sequence[str], hops: int = 2,
                       topic: object = None) -> CandidateSubgraph:
    """Anchors matching ``top_words`` plus everything within ``hops`` directed steps.

    Words without a matching concept are dropped.
    """
    anchors = sorted({v for w in top_words for v in kg.match(w)})
    if not anchors:
        name = f"topic {topic}" if topic is not None else "topic"
        raise LabelingError(f"{name}: no top word matches a concept ({', '.join(top_words)})")
    dist = {a: 0 for a in anchors}
    queue = deque(anchors)
    while queue:
        v = queue.popleft()
        if dist[v] == hops:
            continue
        for u in kg.successors(v):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    vertices = sorted(dist)
    inside = set(vertices)
    edges = sorted({(s, o) for s, _, o in kg.edges if s in inside and o in inside})
    return CandidateSubgraph(vertices, edges, anchors)


def _components(A: np.ndarray) -> list[np.ndarray]:
    """Vertex sets of the connected components, each sorted, ordered by smallest member."""
    n = A.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(np.triu(A, 1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)], dtype=int)
    order = np.argsort(roots, kind="stable")
    bounds = np.flatnonzero(np.diff(roots[order])) + 1
    return np.split(order, bounds) if n else []


def grounded_inverse(L: np.ndarray, ground: int = 0) -> np.ndarray:
    """Inverse of ``L`` with row/column ``ground`` removed, re-padded with zeros there."""
    n = L.shape[0]
    keep = np.array([i for i in range(n) if i != ground], dtype=int)
    T = np.zeros((n, n))
    if keep.size:
        T[np.ix_(keep, keep)] = np.linalg.inv(L[np.ix_(keep, keep)])
    return T


def flow_betweenness(A: np.ndarray, anchors: Sequence[int],
                     ground: Sequence[int] = ()) -> np.ndarray:
    """Focused random-walk betweenness of every vertex of an undirected graph.

    ``anchors`` are vertex positions. For each anchor pair (x, y) in one
    component, a unit current enters at x and leaves at y; the current through
    vertex i is ``0.5 * sum_j A_ij |T_ix - T_iy - T_jx + T_jy|`` with ``T``
    the grounded inverse Laplacian of that component. A vertex's score is its
    mean throughput over the anchor pairs of its component, excluding pairs
    that start or end at the vertex itself. Each component is grounded at the
    first of ``ground`` it contains, else at its smallest position; the
    choice does not change the result.
    """
    return flow_betweenness_sets(A, [anchors], ground)[0]


def flow_betweenness_sets(A: np.ndarray, anchor_sets: Sequence[Sequence[int]],
                          ground: Sequence[int] = ()) -> np.ndarray:
    """:func:`flow_betweenness` for several anchor sets on one graph; row s scores set s.

    The Laplacian of each component is inverted once and pair currents are
    shared between sets.
    """
    n = A.shape[0]
    sets = [np.unique(np.asarray(list(a), dtype=int)) for a in anchor_sets]
    gamma = np.zeros((len(sets), n))
    is_anchor = np.zeros(n, dtype=bool)
    for a in sets:
        is_anchor[a] = True
    for members in _components(A):
        union = np.flatnonzero(is_anchor[members])  # positions within the component
        if union.size < 2:
            continue
        k = len(members)
        sub = A[np.ix_(members, members)]
        L = np.diag(sub.sum(axis=1)) - sub
        in_comp = np.zeros(n, dtype=bool)
        in_comp[members] = True
        g = next((int(v) for v in ground if in_comp[v]), int(members[0]))
        T = grounded_inverse(L, int(np.searchsorted(members, g)))

        ux, uy = np.triu_indices(union.size, 1)
        P = ux.size
        pair_id = np.full((union.size, union.size), -1)
        pair_id[ux, uy] = pair_id[uy, ux] = np.arange(P)
        V = T[:, union[ux]] - T[:, union[uy]]  # potentials, one column per pair
        ii, jj = np.nonzero(np.triu(sub))
        flows = np.abs(V[ii] - V[jj])  # |current| on each edge per pair
        flows[flows < _ZERO_CURRENT] = 0.0  # rounding residue where no current flows
        rows = np.repeat(np.concatenate([ii, jj]), P)
        cols = np.tile(np.arange(P), 2 * ii.size)
        through = 0.5 * np.bincount(rows * P + cols, weights=np.concatenate([flows, flows]).ravel(),
                                    minlength=k * P).reshape(k, P)

        slot = np.full(k, -1)
        slot[union] = np.arange(union.size)
        # sets with the same number of anchors here share one vectorized pass
        by_size: dict[int, list[tuple[int, np.ndarray]]] = {}
        for idx, aset in enumerate(sets):
            loc = slot[np.searchsorted(members, aset[in_comp[aset]])]
            if loc.size >= 2:
                by_size.setdefault(loc.size, []).append((idx, loc))
        for m, group in by_size.items():
            rows_out = np.array([idx for idx, _ in group])
            locs = np.array([loc for _, loc in group])  # S x m
            a, b = np.triu_indices(m, 1)
            pid = pair_id[locs[:, a], locs[:, b]]  # S x q
            total = through[:, pid].sum(axis=2).T  # S x k
            verts = union[locs]  # S x m, component positions of the anchors
            touches = (np.arange(m)[:, None] == a) | (np.arange(m)[:, None] == b)  # m x q
            own = (through[verts[:, :, None], pid[:, None, :]] * touches).sum(axis=2)  # S x m
            scores = total
            srow = np.arange(len(group))[:, None]
            scores[srow, verts] -= own
            denom = np.full(scores.shape, float(math.comb(m, 2)))
            denom[srow, verts] = (m - 1) * (m - 2) // 2
            out = np.divide(scores, denom, out=np.zeros_like(scores), where=denom > 0)
            gamma[rows_out[:, None], members[None, :]] = out
    return gamma


@dataclass(frozen=True)
class LabelScore:
    concept: str
    label: str
    gamma: float


def frwbc_scores(kg: KnowledgeGraph, g: CandidateSubgraph,
                 ground: Sequence[int] = ()) -> list[LabelScore]:
    """Score every vertex of ``g``; sorted best first, ties by concept label."""
    if len(g.anchors) < 2:
        raise LabelingError("need at least two matched anchor concepts")
    pos = {v: i for i, v in enumerate(g.vertices)}
    gamma = flow_betweenness(g.adjacency(), [pos[a] for a in g.anchors],
                             [pos[v] for v in ground if v in pos])
    scores = [LabelScore(kg.concepts[v], kg.labels[v], float(gamma[pos[v]])) for v in g.vertices]
    scores.sort(key=lambda s: (-round(s.gamma, _GAMMA_DECIMALS), s.label, s.concept))
    return scores


def label_topic(kg: KnowledgeGraph, top_words: Sequence[str], topic: object = None) -> list[LabelScore]:
    """Ranked label candidates for a topic; the first entry is the label."""
    g = candidate_subgraph(kg, top_words, topic=topic)
    return frwbc_scores(kg, g)


def label_topics(kg: KnowledgeGraph, topics: dict[int, Sequence[str]],
                 runner_ups: int = 5) -> dict[int, dict]:
    out = {}
    for t, words in sorted(topics.items()):
        ranked = label_topic(kg, words, topic=t)
        best = ranked[0]
        out[t] = {
            "label": best.label,
            "concept": best.concept,
            "gamma": round(best.gamma, _GAMMA_DECIMALS),
            "top_words": list(words),
            "runner_ups": [
                {"label": s.label, "concept": s.concept, "gamma": round(s.gamma, _GAMMA_DECIMALS)}
                for s in ranked[1 : 1 + runner_ups]
            ],
        }
    return out
