"""Domain hyperlink graph: construction, summary statistics and structural measures.

A domain graph is an ``nx.DiGraph`` whose nodes are domains carrying a
``label`` attribute. Directed measures (strong components, the community
degree matrix) use the edges as given; everything else works on the
undirected collapse.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np

from torscope.corpus import Kind, MalformedAddress, classify_address, host_of

UNLABELED = "Unlabeled"
MEASURES = ("betweenness", "closeness", "degree", "eigenvector")
_MEASURE_ALIASES = {"b": "betweenness", "c": "closeness", "d": "degree", "e": "eigenvector"}


class GraphDataError(ValueError):
    pass


# -- construction and I/O ----------------------------------------------------


def build_domain_graph(links: Iterable[tuple[str, str]], labels: dict[str, str]) -> nx.DiGraph:
    """Collapse page-level links to a binary directed graph between onion domains.

    Every labeled domain is a vertex, as is every onion domain met in
    ``links``; the latter are ``Unlabeled`` when ``labels`` lacks them.
    Links within a domain and links touching the surface web make no edge.
    """
    g = nx.DiGraph()
    for domain, label in labels.items():
        g.add_node(domain, label=label)
    for src, dst in links:
        try:
            if classify_address(src) is not Kind.ONION or classify_address(dst) is not Kind.ONION:
                continue
            u, v = host_of(src).lower(), host_of(dst).lower()
        except MalformedAddress:
            continue
        for d in (u, v):
            if d not in g:
                g.add_node(d, label=labels.get(d, UNLABELED))
        if u != v:
            g.add_edge(u, v)
    return g


def graph_from_edges(edges: Iterable[tuple[str, str]], labels: dict[str, str]) -> nx.DiGraph:
    """Domain graph straight from a domain-level edge list."""
    g = nx.DiGraph()
    for domain, label in labels.items():
        g.add_node(domain, label=label)
    for u, v in edges:
        for d in (u, v):
            if d not in g:
                g.add_node(d, label=labels.get(d, UNLABELED))
        if u != v:
            g.add_edge(u, v)
    return g


def read_edge_list(path: str | Path) -> list[tuple[str, str]]:
    """``src dst`` pairs, whitespace separated; ``#`` comments and blank lines ignored."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) < 2:
                raise GraphDataError(f"{path}:{lineno}: expected 'src dst'")
            edges.append((parts[0], parts[1]))
    return edges


def read_labels(path: str | Path) -> dict[str, str]:
    """``domain,label`` CSV; a header row naming ``domain`` is skipped."""
    labels = {}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = (r for r in csv.reader(fh) if r and r[0].strip() and not r[0].lstrip().startswith("#"))
        for row in rows:
            if len(row) < 2:
                raise GraphDataError(f"{path}: bad row {row!r}")
            domain, label = row[0].strip(), row[1].strip()
            if domain.lower() == "domain":
                continue
            labels[domain] = label
    return labels


def write_labels(path: str | Path, labels: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "label"])
        for d in sorted(labels):
            w.writerow([d, labels[d]])


def load_graph(edges_path: str | Path, labels_path: str | Path | None = None) -> nx.DiGraph:
    labels = read_labels(labels_path) if labels_path else {}
    return graph_from_edges(read_edge_list(edges_path), labels)


def communities(g: nx.Graph) -> list[str]:
    """Labels present in ``g``, sorted, with ``Unlabeled`` last."""
    labs = {d.get("label", UNLABELED) for _, d in g.nodes(data=True)}
    return sorted(labs - {UNLABELED}) + ([UNLABELED] if UNLABELED in labs else [])


def undirected(g: nx.Graph) -> nx.Graph:
    return g.to_undirected(as_view=False) if g.is_directed() else g


# -- summary -----------------------------------------------------------------


@dataclass
class NetworkSummary:
    n_vertices: int
    n_edges: int
    mean_degree: float
    max_degree: int
    density: float
    n_wcc: int
    n_scc: int
    max_wcc: int
    max_scc: int

    def rows(self) -> list[tuple[str, object]]:
        return list(asdict(self).items())


def summary_stats(g: nx.DiGraph) -> NetworkSummary:
    """Table-2 style statistics.

    ``n_edges`` counts directed edges. Mean degree is ``2|E_u|/|V|`` and
    density ``|E_u| / C(|V|, 2)``, with ``E_u`` the edges of the undirected
    collapse; max degree is also undirected.
    """
    n = g.number_of_nodes()
    if n == 0:
        return NetworkSummary(0, 0, 0.0, 0, 0.0, 0, 0, 0, 0)
    u = undirected(g)
    m_u = u.number_of_edges()
    wcc = [len(c) for c in nx.weakly_connected_components(g)]
    scc = [len(c) for c in nx.strongly_connected_components(g)]
    return NetworkSummary(
        n_vertices=n,
        n_edges=g.number_of_edges(),
        mean_degree=2.0 * m_u / n,
        max_degree=max((d for _, d in u.degree()), default=0),
        density=m_u / (n * (n - 1) / 2) if n > 1 else 0.0,
        n_wcc=len(wcc),
        n_scc=len(scc),
        max_wcc=max(wcc),
        max_scc=max(scc),
    )


# -- centrality --------------------------------------------------------------


def eigenvector_centrality(g: nx.Graph, tol: float = 1e-10, max_iter: int = 100_000) -> dict:
    """Principal eigenvector of the undirected adjacency, scaled to max 1.

    Power iteration on ``A + I`` (same eigenvectors, no oscillation on
    bipartite components), started from the all-ones vector.
    """
    u = undirected(g)
    nodes = list(u.nodes())
    if not nodes:
        raise GraphDataError("eigenvector centrality of an empty graph")
    A = nx.to_scipy_sparse_array(u, nodelist=nodes, weight=None, format="csr", dtype=float)
    x = np.ones(len(nodes))
    x /= np.linalg.norm(x)
    for _ in range(max_iter):
        y = A @ x + x
        y /= np.linalg.norm(y)
        if np.abs(y - x).max() < tol:
            x = y
            break
        x = y
    else:
        raise nx.PowerIterationFailedConvergence(max_iter)
    x = np.abs(x)
    top = x.max()
    if top > 0:
        x = x / top
    return dict(zip(nodes, x.tolist()))


def centrality(g: nx.Graph, measure: str) -> dict:
    """Per-vertex centrality on the undirected collapse.

    degree: undirected degree; betweenness: shortest-path betweenness,
    normalized by C(n-1, 2); closeness: inverse mean distance to the other
    vertices of the vertex's component (0 when isolated); eigenvector: see
    :func:`eigenvector_centrality`.
    """
    measure = _MEASURE_ALIASES.get(measure, measure)
    u = undirected(g)
    if measure == "degree":
        return dict(u.degree())
    if measure == "betweenness":
        return nx.betweenness_centrality(u, normalized=True)
    if measure == "closeness":
        return nx.closeness_centrality(u, wf_improved=False)
    if measure == "eigenvector":
        return eigenvector_centrality(u)
    raise ValueError(f"unknown centrality measure {measure!r}")


def community_degree_matrix(g: nx.DiGraph, order: list[str] | None = None) -> tuple[list[str], np.ndarray]:
    """Entry (i, j) counts directed edges from community i to community j."""
    order = order or communities(g)
    pos = {lab: i for i, lab in enumerate(order)}
    M = np.zeros((len(order), len(order)), dtype=np.int64)
    for a, b in g.edges():
        M[pos[g.nodes[a].get("label", UNLABELED)], pos[g.nodes[b].get("label", UNLABELED)]] += 1
    return order, M


def intra_subgraph(g: nx.DiGraph, label: str) -> nx.DiGraph:
    return g.subgraph([v for v, d in g.nodes(data=True) if d.get("label") == label]).copy()


# -- robustness --------------------------------------------------------------


def removal_order(g: nx.Graph, measure: str) -> list:
    """Vertices by descending centrality, ties by name; computed once on the intact graph."""
    scores = centrality(g, measure)
    return sorted(scores, key=lambda v: (-scores[v], str(v)))


def largest_component_curve(g: nx.Graph, order: list) -> list[int]:
    """Largest component size after removing ``order[:i]``, for i = 0..n.

    Computed backwards with a union-find, adding vertices in reverse order.
    """
    u = undirected(g)
    n = len(order)
    parent: dict = {}
    size: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    curve = [0] * (n + 1)
    best = 0
    for i in range(n - 1, -1, -1):
        v = order[i]
        parent[v], size[v] = v, 1
        for w in u.neighbors(v):
            if w in parent:
                a, b = find(v), find(w)
                if a != b:
                    if size[a] < size[b]:
                        a, b = b, a
                    parent[b] = a
                    size[a] += size[b]
        best = max(best, size[find(v)])
        curve[i] = best
    return curve


def robustness_coefficient(g: nx.Graph, measure: str) -> float:
    """6 * sum_i i*C_i / (|V|(|V|+1)(|V|-1)) under static descending-centrality removal."""
    n = g.number_of_nodes()
    if n < 2:
        raise GraphDataError("robustness needs at least two vertices")
    curve = largest_component_curve(g, removal_order(g, measure))
    s1 = sum(i * c for i, c in enumerate(curve))
    return 6.0 * s1 / (n * (n + 1) * (n - 1))


# -- modularity --------------------------------------------------------------


def _modularity_terms(g: nx.Graph):
    u = undirected(g)
    m = u.number_of_edges()
    if m == 0:
        raise GraphDataError("modularity is undefined without edges")
    deg = dict(u.degree())
    inner: dict[str, int] = {}
    degsum: dict[str, float] = {}
    for v, d in u.nodes(data=True):
        lab = d.get("label", UNLABELED)
        degsum[lab] = degsum.get(lab, 0) + deg[v]
        inner.setdefault(lab, 0)
    for a, b in u.edges():
        la, lb = u.nodes[a].get("label", UNLABELED), u.nodes[b].get("label", UNLABELED)
        if la == lb:
            inner[la] += 1
    return m, inner, degsum


def per_community_modularity(g: nx.Graph) -> dict[str, float]:
    """Each community's share of the global modularity.

    ``(1/2m) * sum_{i,j in c} (A_ij - d_i d_j / 2m)``, i.e.
    ``L_c/m - (D_c/2m)^2``; the values sum to the global modularity.
    """
    m, inner, degsum = _modularity_terms(g)
    return {lab: inner[lab] / m - (degsum[lab] / (2.0 * m)) ** 2 for lab in sorted(inner)}


def modularity(g: nx.Graph) -> float:
    """Modularity of the label partition on the undirected, binary collapse."""
    return float(sum(per_community_modularity(g).values()))
