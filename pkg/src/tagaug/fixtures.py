"""Seeded synthetic text-attributed graphs for tests and offline demos.

Each class owns a token vocabulary. Every tail class is tied to a head
"parent" class two ways: its texts borrow a share of the parent's tokens,
and its nodes link to parent nodes almost as often as to their own class.
With only a couple of labeled tail nodes, message passing folds the tail
into its parent; that is the failure mode augmentation is meant to fix.
Everything is deterministic per seed.
"""

import numpy as np

from .graph import TextGraph, _canonical_edges


def make_toy_tag(
    class_sizes=(60, 60, 25, 25),
    vocab_per_class=10,
    tokens_per_text=30,
    mix_prob=0.1,
    tail_overlap=0.4,
    parent_of=None,
    intra_edge_prob=0.12,
    parent_edge_prob=0.09,
    inter_edge_prob=0.003,
    seed=0,
):
    rng = np.random.default_rng(seed)
    class_count = len(class_sizes)
    if parent_of is None:
        order = sorted(range(class_count), key=lambda c: class_sizes[c])
        half = class_count // 2
        tails, heads = order[:half], order[half:]
        parent_of = {t: heads[i % len(heads)] for i, t in enumerate(tails)}

    labels = []
    for cls, size in enumerate(class_sizes):
        labels.extend([cls] * size)
    n = len(labels)

    def token(cls):
        return f"w{cls}t{int(rng.integers(vocab_per_class))}"

    texts = []
    for lab in labels:
        tokens = []
        for _ in range(tokens_per_text):
            if rng.random() < mix_prob:
                tokens.append(token(int(rng.integers(class_count))))
            elif lab in parent_of and rng.random() < tail_overlap:
                tokens.append(token(parent_of[lab]))
            else:
                tokens.append(token(lab))
        texts.append(" ".join(tokens))

    def link_prob(a, b):
        if a == b:
            return intra_edge_prob
        if parent_of.get(a) == b or parent_of.get(b) == a:
            return parent_edge_prob
        return inter_edge_prob

    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < link_prob(labels[u], labels[v]):
                edges.append((u, v))

    return TextGraph(
        node_count=n,
        texts=tuple(texts),
        labels=tuple(labels),
        class_names=tuple(f"topic{c}" for c in range(class_count)),
        edges=_canonical_edges(edges),
    )
