"""Benchmark the numba kernel against the pure-numpy fallback.

The workload is the sparse-adjacency x dense product that dominates GCN
training, measured standalone and inside a short training loop. Run:

    python3 benchmarks/bench_kernels.py

Backends are switched per call via TAGAUG_BACKEND, so one process
measures both; results are checked against each other with allclose.
"""

import os
import time

import numpy as np

from tagaug import kernels
from tagaug.fixtures import make_toy_tag
from tagaug.graph import TextGraph, _canonical_edges, normalized_adjacency
from tagaug.neural import TrainConfig, train_classifier


def random_graph(n, avg_degree, rng):
    edges = set()
    while len(edges) < n * avg_degree // 2:
        u, v = rng.integers(n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return TextGraph(
        node_count=n,
        texts=("",) * n,
        labels=tuple(int(x) for x in rng.integers(2, size=n)),
        class_names=("a", "b"),
        edges=_canonical_edges(edges),
    )


def time_backend(backend, fn, repeats=5):
    os.environ["TAGAUG_BACKEND"] = backend
    fn()  # warm up (JIT compile / cache touch)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_spmm(rng):
    print(f"{'nodes':>8} {'dim':>5} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for n, d in ((500, 64), (2000, 64), (8000, 64), (8000, 256)):
        graph = random_graph(n, avg_degree=10, rng=rng)
        adj = normalized_adjacency(graph)
        x = rng.normal(size=(n, d))

        def run():
            return kernels.csr_matmul(adj.indptr, adj.indices, adj.data, x)

        t_np, out_np = time_backend("numpy", run)
        t_nb, out_nb = time_backend("numba", run)
        np.testing.assert_allclose(out_np, out_nb, rtol=1e-10, atol=1e-12)
        print(f"{n:>8} {d:>5} {t_np * 1e3:>9.2f}ms {t_nb * 1e3:>9.2f}ms {t_np / t_nb:>7.1f}x")


def bench_training(rng):
    graph = make_toy_tag(seed=0)
    adj = normalized_adjacency(graph)
    x = rng.normal(size=(graph.node_count, 64))
    labels = np.array(graph.labels)
    cfg = TrainConfig(epochs=100, learning_rate=0.01, dropout=0.5, hidden_dims=(64, 64), seed=0)

    def run():
        model = train_classifier(
            x, labels, np.arange(graph.node_count), cfg, kind="gcn", adjacency=adj
        )
        return model.loss_history[-1]

    t_np, loss_np = time_backend("numpy", run, repeats=2)
    t_nb, loss_nb = time_backend("numba", run, repeats=2)
    print(f"\n100-epoch GCN ({graph.node_count} nodes, dims 64/64/64):")
    print(f"  numpy backend: {t_np:.2f}s (final loss {loss_np:.6f})")
    print(f"  numba backend: {t_nb:.2f}s (final loss {loss_nb:.6f})")
    np.testing.assert_allclose(loss_np, loss_nb, rtol=1e-8)


if __name__ == "__main__":
    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print("CSR @ dense (best of 5):")
    bench_spmm(rng)
    bench_training(rng)
    os.environ.pop("TAGAUG_BACKEND", None)
