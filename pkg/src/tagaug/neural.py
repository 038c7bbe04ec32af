"""From-scratch differentiable kernels: dense layers, a graph-convolution
forward/backward pass, an abstract self/neighbor aggregator, softmax
cross-entropy, an Adam optimizer, and a central-difference gradient checker.

Everything is float64 and deterministic for a fixed seed: weight init uses
a seeded PCG64 stream, dropout masks come from a counter-based Philox
stream keyed by (seed, epoch, layer), and the sparse product accumulates
in fixed index order (see kernels.py).
"""

import json
from dataclasses import dataclass, field

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, loss):
        super().__init__(f"non-finite loss at epoch {epoch}: {loss}")
        self.epoch = epoch


@dataclass
class DenseLayer:
    weight: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)

    def __post_init__(self):
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")


@dataclass
class ClassifierModel:
    kind: str  # gcn | mlp
    layers: list
    dropout_rate: float
    class_count: int
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("gcn", "mlp"):
            raise ValueError(f"unknown model kind: {self.kind}")
        dims = [l.weight.shape for l in self.layers]
        for a, b in zip(dims, dims[1:]):
            if a[1] != b[0]:
                raise ValueError(f"layer dimensions do not chain: {a} -> {b}")
        if dims and dims[-1][1] != self.class_count:
            raise ValueError("final out_dim must equal class_count")


@dataclass
class TrainConfig:
    epochs: int = 1000
    learning_rate: float = 0.01
    dropout: float = 0.5
    hidden_dims: tuple = (64, 64)
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


def gcn_train_defaults(seed=0):
    """GCN defaults: two 64-unit hidden layers, dropout 0.5, 1000 epochs, lr 0.01."""
    return TrainConfig(
        epochs=1000, learning_rate=0.01, dropout=0.5, hidden_dims=(64, 64), seed=seed
    )


def confidence_train_defaults(seed=0):
    """Confidence-MLP defaults: one 256-unit hidden layer, dropout 0, lr 0.001."""
    return TrainConfig(
        epochs=1000, learning_rate=0.001, dropout=0.0, hidden_dims=(256,), seed=seed
    )


def init_model(kind, in_dim, class_count, cfg):
    """Fan-in-scaled uniform init, seeded."""
    rng = np.random.default_rng(cfg.seed)
    dims = [in_dim, *cfg.hidden_dims, class_count]
    layers = []
    for a, b in zip(dims, dims[1:]):
        bound = 1.0 / np.sqrt(a)
        layers.append(
            DenseLayer(
                weight=rng.uniform(-bound, bound, size=(a, b)),
                bias=np.zeros(b),
            )
        )
    return ClassifierModel(
        kind=kind, layers=layers, dropout_rate=cfg.dropout, class_count=class_count
    )


def dropout_mask(shape, rate, seed, epoch, layer):
    """Inverted-dropout mask from a Philox stream keyed by (seed, epoch, layer)."""
    key = np.array(
        [int(seed) & 0xFFFFFFFFFFFFFFFF, (int(epoch) << 8) | int(layer)],
        dtype=np.uint64,
    )
    rng = np.random.Generator(np.random.Philox(key=key))
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


@dataclass
class _LayerCache:
    dropped: np.ndarray
    mask: np.ndarray
    pre_act: np.ndarray


def forward(model, features, adjacency=None, train_mode=False, seed=0, epoch=0):
    """Logits plus per-layer caches for backward.

    Each layer computes A_hat @ (drop(h) @ W) + b (the adjacency product is
    skipped for MLPs); ReLU between layers, dropout before every weight
    multiply in train mode.
    """
    if model.kind == "gcn" and adjacency is None:
        raise ValueError("gcn forward requires an adjacency")
    h = np.asarray(features, dtype=np.float64)
    caches = []
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        if h.shape[1] != layer.weight.shape[0]:
            raise ValueError(
                f"layer {i}: input dim {h.shape[1]} != weight rows "
                f"{layer.weight.shape[0]}"
            )
        if train_mode and model.dropout_rate > 0:
            mask = dropout_mask(h.shape, model.dropout_rate, seed, epoch, i)
            dropped = h * mask
        else:
            mask = None
            dropped = h
        z = dropped @ layer.weight
        if model.kind == "gcn":
            z = adjacency.matmul(z)
        z = z + layer.bias
        caches.append(_LayerCache(dropped=dropped, mask=mask, pre_act=z))
        h = np.maximum(z, 0.0) if i < last else z
    return h, caches


def backward(model, caches, dlogits, adjacency=None):
    """Parameter gradients from the logit gradient (adjacency is symmetric)."""
    grads = [None] * len(model.layers)
    g_out = dlogits
    last = len(model.layers) - 1
    for i in range(last, -1, -1):
        cache = caches[i]
        gz = g_out if i == last else g_out * (cache.pre_act > 0.0)
        db = gz.sum(axis=0)
        ga = adjacency.matmul(gz) if model.kind == "gcn" else gz
        dw = cache.dropped.T @ ga
        g_out = ga @ model.layers[i].weight.T
        if cache.mask is not None:
            g_out = g_out * cache.mask
        grads[i] = (dw, db)
    return grads


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    return expv / expv.sum(axis=1, keepdims=True)


def masked_cross_entropy(logits, labels, idx, class_weights=None):
    """Weighted-mean softmax cross-entropy over the rows in idx.

    Returns (loss, dlogits) with dlogits zero outside idx.
    """
    idx = np.asarray(idx, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    sub = logits[idx]
    probs = softmax(sub)
    y = labels[idx]
    if class_weights is None:
        w = np.ones(len(idx))
    else:
        w = np.asarray(class_weights, dtype=np.float64)[y]
    wsum = w.sum()
    picked = np.clip(probs[np.arange(len(idx)), y], 1e-300, None)
    loss = float((w * -np.log(picked)).sum() / wsum)
    dsub = probs
    dsub[np.arange(len(idx)), y] -= 1.0
    dsub *= (w / wsum)[:, None]
    dlogits = np.zeros_like(logits)
    dlogits[idx] = dsub
    return loss, dlogits


def squared_loss(logits, labels, idx):
    """0.5 * mean row squared error against one-hot targets (for checks)."""
    idx = np.asarray(idx, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros((len(idx), logits.shape[1]))
    onehot[np.arange(len(idx)), labels[idx]] = 1.0
    diff = logits[idx] - onehot
    loss = float(0.5 * (diff**2).sum() / len(idx))
    dlogits = np.zeros_like(logits)
    dlogits[idx] = diff / len(idx)
    return loss, dlogits


def inverse_frequency_weights(labels, train_idx, class_count):
    counts = np.bincount(
        np.asarray(labels, dtype=np.int64)[np.asarray(train_idx)], minlength=class_count
    ).astype(np.float64)
    safe = np.where(counts == 0, 1.0, counts)
    weights = 1.0 / safe
    return weights * class_count / weights.sum()


def train_classifier(
    features,
    labels,
    train_idx,
    cfg,
    kind="mlp",
    adjacency=None,
    class_weights=None,
):
    """Full-batch Adam training of a GCN or MLP, deterministic per seed."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(train_idx) == 0:
        raise ValueError("training mask is empty")
    class_count = int(labels.max()) + 1
    if len(set(labels[train_idx].tolist())) < 2:
        raise ValueError("training mask must cover at least 2 classes")

    features = np.asarray(features, dtype=np.float64)
    model = init_model(kind, features.shape[1], class_count, cfg)

    m_state = [
        (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
    ]
    v_state = [
        (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers
    ]

    for epoch in range(cfg.epochs):
        logits, caches = forward(
            model,
            features,
            adjacency=adjacency,
            train_mode=True,
            seed=cfg.seed,
            epoch=epoch,
        )
        loss, dlogits = masked_cross_entropy(logits, labels, train_idx, class_weights)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        model.loss_history.append(loss)
        grads = backward(model, caches, dlogits, adjacency=adjacency)

        t = epoch + 1
        corr1 = 1.0 - ADAM_BETA1**t
        corr2 = 1.0 - ADAM_BETA2**t
        for layer, (dw, db), mom, vel in zip(model.layers, grads, m_state, v_state):
            if cfg.weight_decay:
                dw = dw + cfg.weight_decay * layer.weight
            for param, grad, m, v in (
                (layer.weight, dw, mom[0], vel[0]),
                (layer.bias, db, mom[1], vel[1]),
            ):
                m *= ADAM_BETA1
                m += (1 - ADAM_BETA1) * grad
                v *= ADAM_BETA2
                v += (1 - ADAM_BETA2) * grad**2
                param -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + ADAM_EPS)
    return model


def predict(model, features, adjacency=None):
    """Per-node (label, probability vector, logits); argmax takes the lowest index."""
    logits, _ = forward(model, features, adjacency=adjacency, train_mode=False)
    probs = softmax(logits)
    return np.argmax(logits, axis=1), probs, logits


def gcn_forward(adjacency, features, model, train_mode=False, seed=0, epoch=0):
    logits, _ = forward(
        model, features, adjacency=adjacency, train_mode=train_mode, seed=seed,
        epoch=epoch,
    )
    return logits


def mlp_forward(features, model, train_mode=False, seed=0, epoch=0):
    logits, _ = forward(
        model, features, adjacency=None, train_mode=train_mode, seed=seed, epoch=epoch
    )
    return logits


def gradient_check(
    model,
    features,
    targets,
    epsilon=1e-5,
    adjacency=None,
    loss="xent",
    samples_per_array=6,
    seed=0,
):
    """Max relative error between analytic gradients and central differences.

    Dropout is bypassed (eval-mode forward); the loss covers every row.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    idx = np.arange(features.shape[0])
    loss_fn = masked_cross_entropy if loss == "xent" else squared_loss

    def loss_at():
        logits, caches = forward(model, features, adjacency=adjacency, train_mode=False)
        value, dlogits = loss_fn(logits, targets, idx)
        return value, dlogits, caches

    _, dlogits, caches = loss_at()
    grads = backward(model, caches, dlogits, adjacency=adjacency)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for layer, (dw, db) in zip(model.layers, grads):
        for param, grad in ((layer.weight, dw), (layer.bias, db)):
            flat = param.reshape(-1)
            gflat = grad.reshape(-1)
            count = min(samples_per_array, flat.size)
            picks = rng.choice(flat.size, size=count, replace=False)
            for j in picks:
                orig = flat[j]
                flat[j] = orig + epsilon
                plus = loss_at()[0]
                flat[j] = orig - epsilon
                minus = loss_at()[0]
                flat[j] = orig
                numeric = (plus - minus) / (2 * epsilon)
                denom = max(abs(gflat[j]), abs(numeric), 1e-10)
                worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst


def aggregate_layer(h, neighbor_lists, beta_lists, alpha, weight):
    """One abstract message-passing step.

    out_v = alpha * (h_v @ W) + (1 - alpha) * sum_u beta_vu * (h_u @ W);
    a node with no neighbors gets exactly alpha * (h_v @ W), so its row
    is untouched by every other node.
    """
    h = np.asarray(h, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    wh = h @ weight
    out = np.empty((h.shape[0], weight.shape[1]))
    for v in range(h.shape[0]):
        nbrs = neighbor_lists[v]
        if len(nbrs) == 0:
            out[v] = alpha * wh[v]
            continue
        betas = np.asarray(beta_lists[v], dtype=np.float64)
        if len(betas) != len(nbrs):
            raise ValueError(f"node {v}: beta/neighbor length mismatch")
        if abs(betas.sum() - 1.0) > 1e-9:
            raise ValueError(f"node {v}: neighbor weights sum to {betas.sum()}, not 1")
        agg = betas @ wh[np.asarray(nbrs, dtype=np.int64)]
        out[v] = alpha * wh[v] + (1.0 - alpha) * agg
    return out


def save_model(model, path, encoder_id="", config_digest=""):
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "dropout_rate": model.dropout_rate,
        "class_count": model.class_count,
        "layer_count": len(model.layers),
        "encoder_id": encoder_id,
        "config_digest": config_digest,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for i, layer in enumerate(model.layers):
        arrays[f"w{i}"] = layer.weight
        arrays[f"b{i}"] = layer.bias
    np.savez(path, **arrays)


def load_model(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        layers = [
            DenseLayer(weight=data[f"w{i}"].copy(), bias=data[f"b{i}"].copy())
            for i in range(meta["layer_count"])
        ]
    model = ClassifierModel(
        kind=meta["kind"],
        layers=layers,
        dropout_rate=meta["dropout_rate"],
        class_count=meta["class_count"],
    )
    return model, meta
