"""Confidence-guided edge assignment for synthetic nodes.

A confidence net (an MLP over embeddings, trained on the original graph)
scores every original node by its maximum softmax probability; candidate
edges score as confidence x cosine similarity, and a global top-k budget
with an optional score threshold selects the edges. Synthetic nodes that
win no edge stay isolated, which keeps them out of message passing.
"""

from dataclasses import dataclass, replace

import numpy as np

from .embedding import cosine_matrix
from .neural import confidence_train_defaults, predict, train_classifier


@dataclass
class ConfidenceNet:
    """kappa(z) = max softmax probability of an embedding-space classifier,
    so scores live in [1/C, 1]."""

    model: object

    def kappa(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        _, probs, _ = predict(self.model, rows)
        return probs.max(axis=1)


@dataclass
class EdgeAssignConfig:
    factor: int = 20  # edge budget = synthetic count x factor
    tau_conf: float = 0.0
    allow_synthetic_targets: bool = False
    per_node: bool = False  # per-synthetic-node top-k instead of one global budget

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError("factor must be >= 1")
        if not 0 <= self.tau_conf < 1:
            raise ValueError("tau_conf must lie in [0, 1)")


def train_confidence(emb, labels, train_idx, cfg=None):
    """Train the confidence net on (embedding, label) pairs of train_idx."""
    cfg = cfg or confidence_train_defaults()
    labels = np.asarray(labels, dtype=np.int64)
    model = train_classifier(
        emb.vectors, labels, train_idx, cfg, kind="mlp", adjacency=None
    )
    return ConfidenceNet(model=model)


def score_edges(synthetic_rows, emb, conf):
    """Score every synthetic/original pair as kappa(z_u) * cos(z_vhat, z_u)."""
    synthetic_rows = np.atleast_2d(np.asarray(synthetic_rows, dtype=np.float64))
    if synthetic_rows.shape[1] != emb.dim:
        raise ValueError(
            f"dimension mismatch: synthetic {synthetic_rows.shape[1]} vs "
            f"original {emb.dim}"
        )
    kappa = conf.kappa(emb.vectors)
    sims = cosine_matrix(synthetic_rows, emb.vectors)
    scores = sims * kappa[None, :]
    n_syn, n_orig = scores.shape
    syn_idx = np.repeat(np.arange(n_syn), n_orig)
    orig_id = np.tile(np.arange(n_orig), n_syn)
    return np.column_stack([syn_idx, orig_id, scores.reshape(-1)])


def select_topk_global(candidates, synthetic_count, cfg):
    """Pick the k = synthetic_count x factor best-scoring candidates.

    Candidates under tau_conf are dropped first; ties break toward
    (lower synthetic idx, lower original id). Returns the selected
    (syn, orig, score) rows and the synthetic indices left edgeless.
    """
    if synthetic_count < 1:
        raise ValueError("synthetic_count must be >= 1")
    candidates = np.asarray(candidates, dtype=np.float64).reshape(-1, 3)
    keep = candidates[candidates[:, 2] >= cfg.tau_conf]
    k_edge = synthetic_count * cfg.factor

    if len(keep):
        order = np.lexsort((keep[:, 1], keep[:, 0], -keep[:, 2]))
        keep = keep[order]
        if cfg.per_node:
            rows = []
            for syn in np.unique(keep[:, 0]):
                rows.append(keep[keep[:, 0] == syn][: cfg.factor])
            selected = np.vstack(rows) if rows else keep[:0]
        else:
            selected = keep[:k_edge]
    else:
        selected = keep

    connected = set(int(s) for s in selected[:, 0]) if len(selected) else set()
    isolated = [i for i in range(synthetic_count) if i not in connected]
    return selected, isolated


def duplicate_edges(anchor, graph):
    """Copy the anchor's adjacency: one edge per neighbor of anchor."""
    return graph.neighbors(anchor)


def assign_edges(synthetic, graph, emb, conf, cfg):
    """Fill edges/isolated on copies of the synthetic nodes and summarize.

    emb must hold rows for all original nodes; every synthetic node must
    already carry its embedding.
    """
    if not synthetic:
        return [], {"k_edge": 0, "edges_added": 0, "isolated": 0, "score_quantiles": []}
    rows = np.vstack([node.embedding for node in synthetic])
    candidates = score_edges(rows, emb, conf)
    selected, isolated = select_topk_global(candidates, len(synthetic), cfg)

    per_node = [[] for _ in synthetic]
    for syn, orig, score in selected:
        per_node[int(syn)].append((int(orig), float(score)))
    out = []
    for i, node in enumerate(synthetic):
        edges = sorted(per_node[i])
        out.append(replace(node, edges=edges, isolated=not edges))

    quantiles = (
        [round(float(q), 6) for q in np.quantile(candidates[:, 2], [0.0, 0.25, 0.5, 0.75, 1.0])]
        if len(candidates)
        else []
    )
    summary = {
        "k_edge": len(synthetic) * cfg.factor,
        "edges_added": int(len(selected)),
        "isolated": len(isolated),
        "score_quantiles": quantiles,
    }
    return out, summary
