"""Relation-aware message passing over a user graph.

Nodes start from the latent representations of the trained classifier; each
layer aggregates per-relation linear transforms of in-neighbors (mean or
sum) and combines them with a self transform under a rectifier.  Neighbor
contributions are summed in a canonical per-dimension sorted order so node
relabeling permutes the output bitwise-exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import GraphError
from .network import _softmax_ce, softmax
from .optim import AdamW

REVERSE_SUFFIX = "__rev"


@dataclass
class RelationGraph:
    """User relation graph with node features and per-relation adjacency."""

    node_ids: list
    features: np.ndarray  # (N, d)
    relation_types: tuple
    edges: list  # (src_idx, relation, dst_idx)
    dropped_edges: int = 0
    _adj: dict = field(default_factory=dict, repr=False)  # rel -> list of in-neighbor arrays

    def __post_init__(self):
        n = len(self.node_ids)
        if self.features.shape[0] != n:
            raise GraphError("feature row count does not match node count")
        if not self._adj:
            for rel in self.relation_types:
                incoming = [[] for _ in range(n)]
                for src, r, dst in self.edges:
                    if r == rel:
                        incoming[dst].append(src)
                self._adj[rel] = [np.array(sorted(lst), dtype=np.int64) for lst in incoming]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def in_neighbors(self, rel: str, node: int) -> np.ndarray:
        return self._adj[rel][node]


def build_graph(
    node_ids: Sequence[str],
    features: np.ndarray,
    edge_triples: Sequence,
    add_reverse: bool = False,
) -> RelationGraph:
    """Index edges over known nodes; unknown endpoints are dropped and counted.

    ``add_reverse`` mirrors every edge under a distinct reversed relation
    type, the usual trick when influence should flow both ways.
    """
    index = {uid: i for i, uid in enumerate(node_ids)}
    if len(index) != len(node_ids):
        raise GraphError("duplicate node ids")
    features = np.asarray(features)

    edges = []
    relations = []
    dropped = 0
    for src, rel, dst in edge_triples:
        si, di = index.get(str(src)), index.get(str(dst))
        if si is None or di is None:
            dropped += 1
            continue
        edges.append((si, str(rel), di))
    if add_reverse:
        edges.extend((d, r + REVERSE_SUFFIX, s) for s, r, d in list(edges))
    relations = tuple(sorted({r for _, r, _ in edges}))

    return RelationGraph(
        node_ids=list(node_ids),
        features=features,
        relation_types=relations,
        edges=edges,
        dropped_edges=dropped,
    )


def graph_from_records(records, node_ids, latents, add_reverse: bool = False) -> RelationGraph:
    """Graph over the given nodes using the records' declared relation lists."""
    triples = []
    for record in records:
        for rel, neighbor in record.relations:
            triples.append((record.user_id, rel, neighbor))
    return build_graph(node_ids, latents, triples, add_reverse=add_reverse)


def read_edge_csv(path) -> list:
    """Edge list CSV with columns src, relation, dst (header required)."""
    triples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"src", "relation", "dst"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise GraphError(f"{path}: edge CSV must have columns src, relation, dst")
        for row in reader:
            triples.append((row["src"], row["relation"], row["dst"]))
    return triples


def write_edge_csv(path, triples) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "relation", "dst"])
        writer.writerows(triples)


# ---------------------------------------------------------------------------
# Parameters and propagation
# ---------------------------------------------------------------------------

def rel_param(layer: int, relation: str) -> str:
    return f"w_rel_{layer}_{relation}"


def self_param(layer: int) -> str:
    return f"w_self_{layer}"


def init_gnn_params(
    dim: int,
    relation_types: Sequence[str],
    n_layers: int = 2,
    n_classes: int = 2,
    seed: int = 0,
    dtype: str = "float64",
) -> dict:
    rng = np.random.default_rng(seed)
    dt = np.dtype(dtype)
    scale = np.sqrt(1.0 / dim)
    params = {}
    for layer in range(n_layers):
        params[self_param(layer)] = (rng.standard_normal((dim, dim)) * scale).astype(dt)
        for rel in relation_types:
            params[rel_param(layer, rel)] = (rng.standard_normal((dim, dim)) * scale).astype(dt)
    params["out_w"] = (rng.standard_normal((dim, n_classes)) * scale).astype(dt)
    params["out_b"] = np.zeros(n_classes, dtype=dt)
    return params


def _canonical_mean(transformed: np.ndarray, neighbors: np.ndarray, mean: bool) -> np.ndarray:
    # per-dimension sorted summation: invariant to neighbor ordering, hence
    # bitwise permutation equivariance of the whole pass
    vals = np.sort(transformed[neighbors], axis=0).sum(axis=0)
    return vals / len(neighbors) if mean else vals


def message_pass(graph: RelationGraph, params: dict, n_layers: int = 2, agg: str = "mean"):
    """Propagate node states for ``n_layers`` layers; returns (Z, cache)."""
    if agg not in ("mean", "sum"):
        raise ValueError(f"unsupported aggregation {agg!r}")
    mean = agg == "mean"
    H = np.asarray(graph.features)
    dim = H.shape[1]
    for layer in range(n_layers):
        if params[self_param(layer)].shape != (dim, dim):
            raise GraphError("parameter shape does not match feature dimension")

    cache = []
    for layer in range(n_layers):
        M = np.zeros_like(H)
        transforms = {}
        for rel in graph.relation_types:
            T = H @ params[rel_param(layer, rel)]
            transforms[rel] = T
            adj = graph._adj[rel]
            for v in range(graph.n_nodes):
                neigh = adj[v]
                if neigh.size:
                    M[v] += _canonical_mean(T, neigh, mean)
        pre = H @ params[self_param(layer)] + M
        H_next = np.maximum(pre, 0)
        cache.append((H, pre))
        H = H_next
    return H, cache


def graph_classify(Z: np.ndarray, params: dict) -> np.ndarray:
    return softmax(Z @ params["out_w"] + params["out_b"])


def graph_loss(
    graph: RelationGraph,
    labels: np.ndarray,
    params: dict,
    n_layers: int = 2,
    agg: str = "mean",
    mask: Optional[np.ndarray] = None,
):
    """Mean cross-entropy over labeled nodes plus gradients for all params."""
    mean = agg == "mean"
    Z, cache = message_pass(graph, params, n_layers=n_layers, agg=agg)
    labels = np.asarray(labels, dtype=np.int64)
    if mask is None:
        mask = np.ones(graph.n_nodes, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise GraphError("no labeled nodes to train on")

    logits = Z[mask] @ params["out_w"] + params["out_b"]
    value, dlogits = _softmax_ce(logits, labels[mask])

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["out_w"] = Z[mask].T @ dlogits
    grads["out_b"] = dlogits.sum(axis=0)

    dZ = np.zeros_like(Z)
    dZ[mask] = dlogits @ params["out_w"].T

    dH_next = dZ
    for layer in reversed(range(n_layers)):
        H, pre = cache[layer]
        dpre = dH_next * (pre > 0)
        grads[self_param(layer)] = H.T @ dpre
        dH = dpre @ params[self_param(layer)].T
        for rel in graph.relation_types:
            adj = graph._adj[rel]
            dT = np.zeros_like(H)
            for v in range(graph.n_nodes):
                neigh = adj[v]
                if neigh.size:
                    w = 1.0 / neigh.size if mean else 1.0
                    np.add.at(dT, neigh, w * dpre[v])
            grads[rel_param(layer, rel)] = H.T @ dT
            dH += dT @ params[rel_param(layer, rel)].T
        dH_next = dH
    return value, grads


class RelationGraphClassifier(BaseEstimator, ClassifierMixin):
    """Full-batch trained graph head over frozen latent node features."""

    def __init__(
        self,
        n_layers: int = 2,
        agg: str = "mean",
        epochs: int = 100,
        learning_rate: float = 0.01,
        weight_decay: float = 0.01,
        seed: int = 42,
    ):
        self.n_layers = n_layers
        self.agg = agg
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.seed = seed

    def fit(self, graph: RelationGraph, y, train_mask=None):
        y = np.asarray(y, dtype=np.int64)
        if y.shape[0] != graph.n_nodes:
            raise ValueError("label count does not match node count")
        params = init_gnn_params(
            dim=graph.features.shape[1],
            relation_types=graph.relation_types,
            n_layers=self.n_layers,
            seed=self.seed,
            dtype=str(graph.features.dtype),
        )
        optimizer = AdamW(
            params, learning_rate=self.learning_rate, weight_decay=self.weight_decay
        )
        history = []
        for _ in range(self.epochs):
            value, grads = graph_loss(
                graph, y, params, n_layers=self.n_layers, agg=self.agg, mask=train_mask
            )
            if not np.isfinite(value):
                raise GraphError("non-finite graph loss")
            optimizer.step(params, grads)
            history.append(value)
        self.params_ = params
        self.history_ = history
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, graph: RelationGraph) -> np.ndarray:
        Z, _ = message_pass(graph, self.params_, n_layers=self.n_layers, agg=self.agg)
        return graph_classify(Z, self.params_)

    def predict(self, graph: RelationGraph) -> np.ndarray:
        return self.predict_proba(graph).argmax(axis=1)
