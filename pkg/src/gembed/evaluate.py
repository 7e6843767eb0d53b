"""Latent-space similarity and downstream-task evaluation.

Link prediction (AUC/AP), node classification with an internal multinomial
logistic regression, k-means clustering with silhouette/NMI scoring, PCA
projection, per-dimension uncertainty analysis with an intrinsic-dimension
estimate, and the snapshot stability constant. All operations are pure
functions over immutable inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Graph, ValidationError
from .walks import substream


def similarity(z_i, z_j, kind: str = "dot") -> float:
    """Dot product, cosine similarity, or Euclidean distance of two vectors."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ValidationError("vectors must have equal length")
    if kind == "dot":
        return float(z_j @ z_i)
    if kind == "cosine":
        ni, nj = np.linalg.norm(z_i), np.linalg.norm(z_j)
        if ni == 0 or nj == 0:
            raise ValidationError("cosine similarity undefined for zero vectors")
        return float((z_i @ z_j) / (ni * nj))
    if kind == "euclidean":
        return float(np.linalg.norm(z_i - z_j))
    raise ValidationError(f"unknown similarity kind {kind!r}")


# -- link prediction ----------------------------------------------------------


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def link_prediction(labels, scores) -> tuple[float, float]:
    """ROC AUC (ties count one half) and step-interpolated average precision."""
    y = np.asarray(labels, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValidationError("labels and scores must be aligned vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("link prediction needs both classes present")
    ranks = _average_ranks(s)
    auc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-s, kind="mergesort")
    y_sorted = y[order]
    s_sorted = s[order]
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    while i < len(y_sorted):
        j = i
        while j + 1 < len(y_sorted) and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        tp += int((y_sorted[i:j + 1] == 1).sum())
        fp += int((y_sorted[i:j + 1] == 0).sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(auc), float(ap)


# -- node classification -------------------------------------------------------


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _f1_scores(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float]:
    classes = np.unique(np.concatenate([y_true, y_pred]))
    tp_total = fp_total = fn_total = 0
    per_class = []
    for c in classes:
        tp = int(((y_pred == c) & (y_true == c)).sum())
        fp = int(((y_pred == c) & (y_true != c)).sum())
        fn = int(((y_pred != c) & (y_true == c)).sum())
        tp_total, fp_total, fn_total = tp_total + tp, fp_total + fp, fn_total + fn
        per_class.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    micro = 2 * tp_total / (2 * tp_total + fp_total + fn_total)
    return float(micro), float(np.mean(per_class))


def _train_logreg(X: np.ndarray, y: np.ndarray, classes: np.ndarray,
                  l2: float = 1e-4, steps: int = 500, lr: float = 0.5):
    n, d = X.shape
    c = len(classes)
    index = {cls: i for i, cls in enumerate(classes)}
    onehot = np.zeros((n, c))
    onehot[np.arange(n), [index[v] for v in y]] = 1.0
    W = np.zeros((d, c))
    b = np.zeros(c)
    for _ in range(steps):
        p = _softmax(X @ W + b)
        diff = (p - onehot) / n
        W -= lr * (X.T @ diff + l2 * W)
        b -= lr * diff.sum(axis=0)
    return W, b


def node_classification(features, labels, train_fraction: float = 0.1,
                        n_repeat: int = 10, seed: int = 0,
                        normalize: bool = True) -> tuple[float, float]:
    """Mean micro/macro F1 of multinomial logistic regression over repeats.

    Each repeat shuffles and splits the labeled nodes; a split missing a
    class in its training part is resampled. The learner is internal (full
    gradient descent, fixed L2 = 1e-4, 500 steps) for determinism.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    mask = y >= 0
    X, y = X[mask], y[mask]
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValidationError("need at least two classes")
    if not (0 < train_fraction < 1):
        raise ValidationError("train_fraction must lie in (0, 1)")
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        X = X / norms
    n = len(y)
    n_train = max(len(classes), int(round(train_fraction * n)))
    micros, macros = [], []
    for rep in range(n_repeat):
        for attempt in range(50):
            rng = substream(seed, 0xC1F, rep, attempt)
            order = rng.permutation(n)
            train_idx, test_idx = order[:n_train], order[n_train:]
            if len(np.unique(y[train_idx])) == len(classes) and len(test_idx):
                break
        else:
            raise ValidationError("could not draw a split covering every class")
        W, b = _train_logreg(X[train_idx], y[train_idx], classes)
        pred = classes[np.argmax(X[test_idx] @ W + b, axis=1)]
        micro, macro = _f1_scores(y[test_idx], pred)
        micros.append(micro)
        macros.append(macro)
    return float(np.mean(micros)), float(np.mean(macros))


# -- clustering ----------------------------------------------------------------


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100) -> np.ndarray:
    """Lloyd iterations from k-means++ seeding; returns cluster assignments."""
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if k > n:
        raise ValidationError("k cannot exceed the number of points")
    if k < 1:
        raise ValidationError("k must be >= 1")
    rng = substream(seed, 0x12EA)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    closest = np.full(n, np.inf)
    for c in range(1, k):
        dist = np.sum((X - centers[c - 1]) ** 2, axis=1)
        closest = np.minimum(closest, dist)
        total = closest.sum()
        if total == 0:
            centers[c] = X[int(rng.integers(n))]
            continue
        r = rng.random() * total
        centers[c] = X[int(np.searchsorted(np.cumsum(closest), r))]
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for c in range(k):
            members = new_assign == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
            else:
                farthest = int(d2.min(axis=1).argmax())
                centers[c] = X[farthest]
                new_assign[farthest] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign


def kmeans_inertia(points, assignments) -> float:
    """Within-cluster sum of squared distances to cluster means."""
    X = np.asarray(points, dtype=np.float64)
    total = 0.0
    for c in np.unique(assignments):
        members = X[assignments == c]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def silhouette(points, assignments) -> float:
    """Mean silhouette value in [-1, 1]; singleton clusters score 0."""
    X = np.asarray(points, dtype=np.float64)
    labels = np.asarray(assignments)
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise ValidationError("silhouette needs at least two clusters")
    n = len(X)
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        if own.sum() == 1:
            scores[i] = 0.0
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(d[i, labels == c].mean() for c in clusters if c != labels[i])
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def nmi_and_accuracy(assignments, truth) -> tuple[float, float]:
    """Normalized mutual information and best-permutation accuracy."""
    u = np.asarray(assignments)
    v = np.asarray(truth)
    if u.shape != v.shape:
        raise ValidationError("assignment vectors must be aligned")
    n = len(u)
    cu, iu = np.unique(u, return_inverse=True)
    cv, iv = np.unique(v, return_inverse=True)
    table = np.zeros((len(cu), len(cv)))
    for a, b in zip(iu, iv):
        table[a, b] += 1
    pu = table.sum(axis=1) / n
    pv = table.sum(axis=0) / n
    h_u = float(-np.sum(pu[pu > 0] * np.log(pu[pu > 0])))
    h_v = float(-np.sum(pv[pv > 0] * np.log(pv[pv > 0])))
    p = table / n
    outer = pu[:, None] * pv[None, :]
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / outer[nz])))
    if h_u == 0.0 and h_v == 0.0:
        nmi = 1.0
    elif mi == 0.0:
        nmi = 0.0
    else:
        nmi = mi / (0.5 * (h_u + h_v))
    size = max(table.shape)
    padded = np.zeros((size, size))
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)
    acc = float(padded[rows, cols].sum() / n)
    return nmi, acc


# -- projection and uncertainty -------------------------------------------------


def pca_project(vectors, out_dim: int = 2) -> np.ndarray:
    """Project centered data onto its top principal directions.

    The sign of each direction is fixed so that its largest-magnitude
    loading is positive, making the output deterministic.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if out_dim > X.shape[1]:
        raise ValidationError("out_dim cannot exceed the input dimension")
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:out_dim]
    for r in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[r])))
        if comps[r, j] < 0:
            comps[r] = -comps[r]
    return centered @ comps.T


def pca_explained_variance(vectors, out_dim: int = 2) -> np.ndarray:
    """Variance captured by each of the top principal directions."""
    X = np.asarray(vectors, dtype=np.float64)
    centered = X - X.mean(axis=0)
    _, s, _ = np.linalg.svd(centered, full_matrices=False)
    return (s[:out_dim] ** 2) / len(X)


def uncertainty_per_dimension(history: np.ndarray
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean-sigma curves plus the final-epoch vector."""
    h = np.asarray(history, dtype=np.float64)
    if h.ndim != 2 or h.size == 0:
        raise ValidationError("history must be a non-empty epochs x dims matrix")
    return h, h[-1].copy()


def intrinsic_dimension_estimate(final_sigma) -> tuple[int, float]:
    """Two-group split of per-dimension sigmas on a log scale.

    Returns (size of the low-sigma group, high/low group-mean ratio). The
    split minimizes within-group variance of log sigma, which is invariant
    to uniform scaling; an all-equal input yields (dims, 1.0).
    """
    sig = np.asarray(final_sigma, dtype=np.float64)
    if sig.ndim != 1 or len(sig) < 2:
        raise ValidationError("need at least two dimensions")
    if np.any(sig <= 0):
        raise ValidationError("sigmas must be positive")
    if np.allclose(sig, sig[0]):
        return len(sig), 1.0
    logs = np.sort(np.log(sig))
    raw = np.sort(sig)
    best_split, best_sse = 1, np.inf
    for s in range(1, len(logs)):
        lo, hi = logs[:s], logs[s:]
        sse = float(((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum())
        if sse < best_sse:
            best_sse, best_split = sse, s
    ratio = float(raw[best_split:].mean() / raw[:best_split].mean())
    return best_split, ratio


# -- dynamic stability ----------------------------------------------------------


def adjacency_matrix(graph: Graph) -> np.ndarray:
    """Dense weighted adjacency (symmetric for undirected graphs)."""
    A = np.zeros((graph.node_count, graph.node_count))
    for u, v, w in graph.edges():
        A[u, v] = w
        if not graph.directed:
            A[v, u] = w
    return A


def stability_constant(embeddings: Sequence[np.ndarray],
                       adjacencies: Sequence,
                       node_sets: Sequence[Sequence[int]] | None = None
                       ) -> tuple[float, np.ndarray]:
    """Stability constant over snapshot transitions.

    For each transition t the relative-change ratio S_r(t) compares the
    Frobenius change of embeddings restricted to the earlier snapshot's
    nodes with the change of the corresponding adjacency blocks. Returns
    (max pairwise |S_r difference|, per-transition S_r). A transition with
    zero adjacency change (or a zero base norm) is undefined and raises.
    """
    mats = [adjacency_matrix(a) if isinstance(a, Graph) else np.asarray(a, float)
            for a in adjacencies]
    embs = [np.asarray(e, dtype=np.float64) for e in embeddings]
    if len(embs) != len(mats):
        raise ValidationError("need one adjacency per snapshot embedding")
    if len(embs) < 3:
        raise ValidationError("stability constant needs at least 3 snapshots")
    s_r = []
    for t in range(len(embs) - 1):
        idx = (np.asarray(node_sets[t], dtype=np.int64) if node_sets is not None
               else np.arange(embs[t].shape[0]))
        f_t = embs[t][idx]
        f_t1 = embs[t + 1][idx]
        s_t = mats[t][np.ix_(idx, idx)]
        s_t1 = mats[t + 1][np.ix_(idx, idx)]
        f_base = np.linalg.norm(f_t)
        s_base = np.linalg.norm(s_t)
        s_change = np.linalg.norm(s_t1 - s_t)
        if f_base == 0 or s_base == 0 or s_change == 0:
            raise ValidationError(
                f"undefined relative stability at transition {t}")
        s_r.append((np.linalg.norm(f_t1 - f_t) / f_base) / (s_change / s_base))
    s_r = np.asarray(s_r)
    ks = float(max(abs(a - b) for a in s_r for b in s_r))
    return ks, s_r


# -- reporting -------------------------------------------------------------------


@dataclass
class MetricsReport:
    """Named scalar metrics plus enough context to reproduce the run."""

    task: str
    metrics: dict[str, float]
    seeds: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.metrics.items():
            if not np.isfinite(v):
                raise ValidationError(f"metric {k!r} is not finite")

    def config_digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps({
            "task": self.task,
            "metrics": {k: self.metrics[k] for k in sorted(self.metrics)},
            "seeds": list(self.seeds),
            "config": self.config,
            "config_digest": self.config_digest(),
        }, indent=2, sort_keys=True)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
