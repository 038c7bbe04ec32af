"""Classification, boundary, and margin metrics, plus the margin-bound and
vicinal-risk evaluators used by the theory-verification command.
"""

from dataclasses import dataclass, field

import numpy as np

from .neural import predict


def confusion_matrix(true_labels, pred_labels, class_count):
    true_labels = np.asarray(true_labels, dtype=np.int64)
    pred_labels = np.asarray(pred_labels, dtype=np.int64)
    out = np.zeros((class_count, class_count), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        out[t, p] += 1
    return out


def classification_metrics(confusion):
    """acc, bAcc (mean recall), macro-F1, and GMean from a confusion matrix.

    Classes with zero support are flagged, contribute F1 = 0 to macro-F1,
    and are excluded from the recall average and the geometric mean.
    """
    confusion = np.asarray(confusion, dtype=np.float64)
    total = confusion.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    class_count = confusion.shape[0]
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    diag = np.diag(confusion)

    recalls = []
    f1s = []
    zero_support = []
    for c in range(class_count):
        if support[c] == 0:
            zero_support.append(c)
            f1s.append(0.0)
            continue
        recall = diag[c] / support[c]
        precision = diag[c] / predicted[c] if predicted[c] > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        recalls.append(recall)
        f1s.append(f1)

    recalls = np.array(recalls)
    gmean = float(np.prod(recalls) ** (1.0 / len(recalls))) if len(recalls) else 0.0
    return {
        "acc": float(diag.sum() / total),
        "bacc": float(recalls.mean()) if len(recalls) else 0.0,
        "macro_f1": float(np.mean(f1s)),
        "gmean": gmean,
        "zero_support_classes": zero_support,
    }


def per_class_recall(confusion):
    confusion = np.asarray(confusion, dtype=np.float64)
    support = confusion.sum(axis=1)
    safe = np.where(support == 0, 1.0, support)
    recall = np.diag(confusion) / safe
    return np.where(support == 0, np.nan, recall)


def head_tail_gap(confusion, tail_classes):
    """Mean head-class recall minus mean tail-class recall (NaN-safe)."""
    recall = per_class_recall(confusion)
    tail = sorted(tail_classes)
    head = [c for c in range(len(recall)) if c not in tail_classes]
    head_mean = float(np.nanmean(recall[head])) if head else float("nan")
    tail_mean = float(np.nanmean(recall[tail])) if tail else float("nan")
    return head_mean - tail_mean


@dataclass
class ManifoldIndex:
    """Per-class point sets with min-Euclidean-distance queries."""

    by_class: dict = field(default_factory=dict)

    @property
    def all_points(self):
        rows, labs = [], []
        for cls in sorted(self.by_class):
            pts = self.by_class[cls]
            rows.append(pts)
            labs.extend([cls] * len(pts))
        return np.vstack(rows), np.array(labs, dtype=np.int64)


def build_manifold_index(rows, labels, subset_idx=None):
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    subset = np.arange(len(labels)) if subset_idx is None else np.asarray(subset_idx)
    by_class = {}
    for cls in np.unique(labels[subset]):
        members = subset[labels[subset] == cls]
        by_class[int(cls)] = rows[members].copy()
    return ManifoldIndex(by_class=by_class)


def dist_to_manifold(x, index, cls):
    """Minimum Euclidean distance from x to the stored class-cls points."""
    if cls not in index.by_class or len(index.by_class[cls]) == 0:
        raise KeyError(f"manifold set empty for class {cls}")
    diffs = index.by_class[cls] - np.asarray(x, dtype=np.float64)
    return float(np.sqrt((diffs**2).sum(axis=1)).min())


def bcr(sample_rows, sample_labels, index, k):
    """Fraction of samples whose k-NN majority label on the reference set
    differs from their own label; majority ties count as differing."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ref_rows, ref_labels = index.all_points
    sample_rows = np.atleast_2d(np.asarray(sample_rows, dtype=np.float64))
    sample_labels = np.asarray(sample_labels, dtype=np.int64)
    boundary = 0
    for row, own in zip(sample_rows, sample_labels):
        dists = np.sqrt(((ref_rows - row) ** 2).sum(axis=1))
        order = np.lexsort((np.arange(len(dists)), dists))
        near = ref_labels[order[:k]]
        counts = np.bincount(near)
        best = counts.max()
        winners = np.flatnonzero(counts == best)
        if len(winners) > 1 or winners[0] != own:
            boundary += 1
    return boundary / len(sample_rows)


def bps(sample_rows, sample_labels, centroids, cap=1e6):
    """Mean of d_in / d_out per sample; d_out = 0 clamps to cap.

    d_in is the distance to the own-class centroid, d_out to the nearest
    other-class centroid. Higher means nearer the boundary.
    """
    sample_rows = np.atleast_2d(np.asarray(sample_rows, dtype=np.float64))
    sample_labels = np.asarray(sample_labels, dtype=np.int64)
    scores = []
    for row, own in zip(sample_rows, sample_labels):
        own_centroid = centroids.require(int(own))
        d_in = float(np.linalg.norm(row - own_centroid))
        others = [
            float(np.linalg.norm(row - centroids.by_class[c]))
            for c in centroids.by_class
            if c != own
        ]
        if not others:
            raise ValueError("bps needs at least two defined centroids")
        d_out = min(others)
        scores.append(d_in / d_out if d_out > 0 else (0.0 if d_in == 0 else cap))
    return float(np.mean(scores))


def icr(sample_rows, intended_labels, probe_model):
    """Fraction of samples the balanced probe assigns to their intended class."""
    sample_rows = np.atleast_2d(np.asarray(sample_rows, dtype=np.float64))
    intended_labels = np.asarray(intended_labels, dtype=np.int64)
    pred, _, _ = predict(probe_model, sample_rows)
    return float(np.mean(pred == intended_labels))


@dataclass
class MarginStats:
    margins: np.ndarray
    gamma_min: float
    tie_count: int


def margins(logits, true_labels):
    """Per-sample logit margin (true logit minus best other logit) and its
    minimum; exact ties give margin 0 and are counted."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    true_labels = np.asarray(true_labels, dtype=np.int64)
    out = np.empty(len(logits))
    ties = 0
    for i, (row, y) in enumerate(zip(logits, true_labels)):
        others = np.delete(row, y)
        out[i] = row[y] - others.max()
        if out[i] == 0.0:
            ties += 1
    return MarginStats(margins=out, gamma_min=float(out.min()), tie_count=ties)


def check_margin_bound(gamma0, delta, bcr_value, gamma_min_aug):
    """Evaluate gamma_min_aug >= gamma0 - delta * (1 - BCR).

    Requires delta >= gamma0 (the conservative-ordering assumption) and
    BCR in [0, 1]; returns the truth value and the slack.
    """
    if not 0 <= bcr_value <= 1:
        raise ValueError("bcr must lie in [0, 1]")
    if delta < gamma0:
        raise ValueError("delta must be >= gamma0")
    bound = gamma0 - delta * (1.0 - bcr_value)
    slack = gamma_min_aug - bound
    return {"holds": bool(gamma_min_aug >= bound), "slack": float(slack), "bound": float(bound)}


def cross_entropy_of_probs(probs, label):
    return float(-np.log(np.clip(probs[label], 1e-300, None)))


def vicinal_risk(model, groups):
    """Mean over anchors of the mean cross-entropy over each anchor's
    vicinal samples (uniform weights within an anchor).

    groups: list of (rows, label) per anchor; every anchor needs at least
    one sample. The model must score plain feature rows (MLP-style).
    """
    if not groups:
        raise ValueError("vicinal risk needs at least one anchor")
    per_anchor = []
    for rows, label in groups:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if len(rows) == 0:
            raise ValueError("anchor with no vicinal samples")
        _, probs, _ = predict(model, rows)
        losses = [cross_entropy_of_probs(p, label) for p in probs]
        per_anchor.append(float(np.mean(losses)))
    return float(np.mean(per_anchor))


def vicinal_risk_reduction_bound(risk_orig, lipschitz, gamma0, bcr_value, delta):
    """Upper bound on the post-augmentation vicinal risk implied by the
    boundary-coverage argument: risk_orig - L*gamma0*BCR + L*delta*(1-BCR).

    Evaluated for a user-supplied Lipschitz constant; informational only,
    since it rests on the non-decreasing-margin assumption.
    """
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    eta = delta / gamma0
    bound = risk_orig - lipschitz * gamma0 * bcr_value + lipschitz * delta * (1 - bcr_value)
    return {"bound": float(bound), "eta": float(eta)}
