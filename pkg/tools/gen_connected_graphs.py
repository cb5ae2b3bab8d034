"""Write every connected 8-vertex graph, one per isomorphism class, as graph6.

A connected graph always has a vertex whose removal leaves it connected
(a leaf of any spanning tree), so extending each connected 7-vertex atlas
graph by a vertex joined to a nonempty subset reaches every class.
Duplicates are removed by Weisfeiler-Lehman hash plus an exact isomorphism
check. The class count must equal 11117.
"""

import itertools
import sys
from pathlib import Path

import networkx as nx

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "connected8.g6"
EXPECTED = 11117

base = [g for g in nx.graph_atlas_g() if g.number_of_nodes() == 7 and nx.is_connected(g)]
buckets: dict[str, list[nx.Graph]] = {}
for g in base:
    for r in range(1, 8):
        for nbrs in itertools.combinations(range(7), r):
            h = g.copy()
            h.add_edges_from((7, v) for v in nbrs)
            key = nx.weisfeiler_lehman_graph_hash(h, iterations=4)
            bucket = buckets.setdefault(key, [])
            if not any(nx.is_isomorphic(h, other) for other in bucket):
                bucket.append(h)

classes = [g for bucket in buckets.values() for g in bucket]
if len(classes) != EXPECTED:
    sys.exit(f"found {len(classes)} classes, expected {EXPECTED}")
lines = sorted(nx.to_graph6_bytes(g, header=False).decode().strip() for g in classes)
OUT.write_text("\n".join(lines) + "\n")
print(f"wrote {len(lines)} graphs to {OUT}")
