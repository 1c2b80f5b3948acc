"""Topological decentralization features of a daily graph.

All four features read the unweighted topology only: degree is the number of
distinct counterparties, and edge weights play no part.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import date

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GraphError
from .ingest import DailyGraph
from .louvain import louvain

FEATURE_NAMES = (
    "n_components",
    "largest_component_ratio",
    "modularity",
    "degree_centrality_std",
    "n_core",
    "avg_core_degree",
)

# Arrow printed beside each feature in the source definitions table.  Kept
# verbatim as data; consumers decide how to read it.
FEATURE_DIRECTIONS = {
    "n_components": "↑",
    "largest_component_ratio": "↓",
    "modularity": "↑",
    "degree_centrality_std": "↓",
    "n_core": "↑",
    "avg_core_degree": "↓",
}

COMMUNITY_ALGORITHM = "louvain"


@dataclass(frozen=True)
class Partition:
    """``community_of[i]`` is the community of node ``i``; ids are 0..k-1."""

    community_of: np.ndarray

    @property
    def n_communities(self) -> int:
        return int(self.community_of.max()) + 1 if len(self.community_of) else 0

    def groups(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_communities)]
        for node, c in enumerate(self.community_of.tolist()):
            out[c].append(node)
        return out


@dataclass(frozen=True)
class FeatureVector:
    day: date
    n_components: int
    largest_component_ratio: float
    modularity: float
    degree_centrality_std: float
    n_core: int
    avg_core_degree: float

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["day"] = self.day.isoformat()
        return d


def _require_nodes(graph: DailyGraph):
    if graph.n_nodes == 0:
        raise GraphError("empty graph")


def component_labels(graph: DailyGraph) -> tuple[int, np.ndarray]:
    _require_nodes(graph)
    n = graph.n_nodes
    adj = coo_matrix((np.ones(graph.n_edges, dtype=np.int8), (graph.u, graph.v)), shape=(n, n))
    return connected_components(adj, directed=False)


def count_components(graph: DailyGraph) -> int:
    return int(component_labels(graph)[0])


def largest_component_ratio(graph: DailyGraph) -> float:
    _, labels = component_labels(graph)
    return int(np.bincount(labels).max()) / graph.n_nodes


def detect_communities(graph: DailyGraph, seed: int = 0, resolution: float = 1.0) -> Partition:
    """Louvain partition of the unweighted graph.

    Nodes are renumbered by canonical address before the seeded run, so the
    result does not depend on the order transfers appeared in the export.
    Community ids are numbered by their smallest member address.
    """
    _require_nodes(graph)
    rank = graph.address_rank
    labels_by_rank = louvain(graph.n_nodes, rank[graph.u], rank[graph.v], seed, resolution)
    # renumber communities in order of first appearance along rank order
    first_seen = {}
    for lab in labels_by_rank.tolist():
        first_seen.setdefault(lab, len(first_seen))
    dense_by_rank = np.array([first_seen[lab] for lab in labels_by_rank.tolist()], dtype=np.int64)
    return Partition(dense_by_rank[rank])


def modularity(graph: DailyGraph, partition: Partition) -> float:
    """Newman modularity at resolution 1 on the unweighted topology."""
    m = graph.n_edges
    if m == 0:
        raise GraphError("undefined modularity")
    comm = np.asarray(partition.community_of)
    if len(comm) != graph.n_nodes:
        raise ValueError("partition does not cover every node")
    k = int(comm.max()) + 1
    same = comm[graph.u] == comm[graph.v]
    intra = int(np.count_nonzero(same))
    deg_sum = np.bincount(comm, weights=graph.degrees, minlength=k).astype(np.int64)
    # Q = intra/m - sum(d_c^2)/(4 m^2), kept in exact integers until one division
    sq = sum(d * d for d in deg_sum.tolist())
    return (4 * m * intra - sq) / (4 * m * m)


def degree_centrality_std(graph: DailyGraph) -> float:
    """Population standard deviation of ``degree / (n - 1)``."""
    n = graph.n_nodes
    if n < 2:
        raise GraphError("degree centrality needs at least two nodes")
    # exact integer moments: independent of node order, exactly 0 when regular
    s1 = int(graph.degrees.sum())
    s2 = int(np.dot(graph.degrees, graph.degrees))
    return math.sqrt(n * s2 - s1 * s1) / n / (n - 1)


def topological_features(graph: DailyGraph, seed: int = 0) -> dict:
    """The four features that need no core-periphery detection."""
    n_comp, labels = component_labels(graph)
    return {
        "n_components": int(n_comp),
        "largest_component_ratio": int(np.bincount(labels).max()) / graph.n_nodes,
        "modularity": modularity(graph, detect_communities(graph, seed)),
        "degree_centrality_std": degree_centrality_std(graph),
    }
