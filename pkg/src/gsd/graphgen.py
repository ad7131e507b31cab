"""Frame-pair decision graph.

One node per frame; an undirected edge joins two frames whenever the
position-change detector judges them co-located (statistic at or below
the calibrated threshold). Node features carry the normalized frame index
so downstream layers can see temporal order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MissingPrerequisiteError
from .pcd import PcdModel, featurize_pairs
from . import neural
from .trajectory import FrameSequence


@dataclass
class DetectionGraph:
    adjacency: np.ndarray           # (K, K) bool, symmetric, false diagonal
    node_index_feature: np.ndarray  # (K,) k/(K-1) in [0, 1]

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        feats = np.asarray(self.node_index_feature, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ConfigError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ConfigError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ConfigError("adjacency must have a false diagonal")
        if feats.shape != (adj.shape[0],):
            raise ConfigError("node feature length must equal node count")
        self.adjacency = adj
        self.node_index_feature = feats

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2


def normalized_index_feature(num_nodes: int) -> np.ndarray:
    k = np.arange(num_nodes, dtype=float)
    return k / (num_nodes - 1) if num_nodes > 1 else k


def build_graph(frames: FrameSequence, pcd: PcdModel) -> DetectionGraph:
    """All-pairs PCD decisions over a frame sequence.

    Edge(k, k') iff the symmetrized statistic is <= the calibrated
    threshold; K(K-1)/2 evaluations, batched through the network.
    """
    if pcd.threshold is None:
        raise MissingPrerequisiteError("PCD model has no calibrated threshold")
    F = frames.features
    k = F.shape[0]
    if k < 2:
        raise ConfigError("need at least 2 frames")
    if F.shape[1] != pcd.num_receivers:
        raise ConfigError(
            f"frames have {F.shape[1]} receivers but PCD expects {pcd.num_receivers}"
        )
    iu, iv = np.triu_indices(k, 1)
    Xf = featurize_pairs(F[iu], F[iv], pcd.epsilon_log)
    Xr = featurize_pairs(F[iv], F[iu], pcd.epsilon_log)
    out, _ = neural.forward_batch(pcd.aux_net, np.vstack([Xf, Xr]))
    n = len(iu)
    stats = (out[:n, 0] + out[n:, 0]) / 2.0
    adjacency = np.zeros((k, k), dtype=bool)
    same = stats <= pcd.threshold
    adjacency[iu[same], iv[same]] = True
    adjacency |= adjacency.T
    return DetectionGraph(adjacency=adjacency, node_index_feature=normalized_index_feature(k))


def graph_components(g: DetectionGraph) -> list[list[int]]:
    """Connected components, each sorted, ordered by smallest node index."""
    n = g.num_nodes
    seen = np.zeros(n, dtype=bool)
    components = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in np.nonzero(g.adjacency[v])[0]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        components.append(sorted(comp))
    return components


def graph_to_edge_list(g: DetectionGraph) -> str:
    """Debug dump: header ``K=<n>`` then one ``k k'`` line per edge."""
    lines = [f"K={g.num_nodes}"]
    iu, iv = np.nonzero(np.triu(g.adjacency, 1))
    for a, b in zip(iu, iv):
        lines.append(f"{a} {b}")
    return "\n".join(lines) + "\n"
