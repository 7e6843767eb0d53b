"""Point-vector embedding trainers.

SkipGram with negative sampling over walk corpora, and LINE first/second
order objectives over edges. Exact softmax evaluators for the first/second
order objectives are provided as test oracles on small graphs; training uses
edge/pair sampling with negative sampling throughout.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .graph import Graph, ValidationError
from .walks import (STREAM_INIT, STREAM_NEGATIVES, STREAM_TRAIN, WalkCorpus,
                    context_pairs, substream)


@dataclass
class PointEmbedding:
    """Center table and parallel context table, both |V| x L."""

    vectors: np.ndarray
    context_vectors: np.ndarray

    @property
    def node_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def copy(self) -> "PointEmbedding":
        return PointEmbedding(self.vectors.copy(), self.context_vectors.copy())


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 128
    epochs: int = 5
    lr: float = 0.025
    linear_decay: bool = True
    negatives: int = 5
    noise_exponent: float = 0.75
    seed: int = 0
    batch_size: int = 256

    def __post_init__(self):
        if self.dim < 1 or self.negatives < 1 or self.epochs < 0:
            raise ValidationError("dim, negatives must be >= 1 and epochs >= 0")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if not (0.0 <= self.noise_exponent <= 1.0):
            raise ValidationError("noise exponent must lie in [0, 1]")


def init_embeddings(node_count: int, dim: int, seed: int) -> PointEmbedding:
    """Uniform [-0.5/L, 0.5/L] center vectors, zero context vectors."""
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    rng = substream(seed, STREAM_INIT)
    z = rng.uniform(-0.5 / dim, 0.5 / dim, size=(node_count, dim))
    return PointEmbedding(z, np.zeros((node_count, dim)))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class NoiseDistribution:
    """Categorical noise distribution over nodes, sampled by inverse CDF."""

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0:
            raise ValidationError("noise weights must be a non-empty vector")
        if w.sum() <= 0:
            w = np.ones_like(w)
        self.probs = w / w.sum()
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    @classmethod
    def from_degrees(cls, graph: Graph, beta: float) -> "NoiseDistribution":
        deg = graph.degrees.astype(np.float64)
        return cls(np.ones(graph.node_count) if beta == 0 else deg ** beta)

    @classmethod
    def from_corpus(cls, corpus: WalkCorpus, node_count: int,
                    beta: float) -> "NoiseDistribution":
        counts = np.zeros(node_count)
        for walk in corpus.walks:
            for v in walk:
                counts[v] += 1
        return cls(np.ones(node_count) if beta == 0 else counts ** beta)

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return np.searchsorted(self._cum, rng.random(shape), side="right")


def negative_sample(graph: Graph, beta: float, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Draw k node ids i.i.d. proportional to degree**beta (beta=0: uniform)."""
    if not (0.0 <= beta <= 1.0):
        raise ValidationError("beta must lie in [0, 1]")
    return NoiseDistribution.from_degrees(graph, beta).sample(rng, k)


# -- pair loss ---------------------------------------------------------------


def sgns_pair_loss(z_u: np.ndarray, z_v: np.ndarray,
                   negatives: Sequence[np.ndarray] | np.ndarray,
                   printed_form: bool = False) -> float:
    """Negative-sampling loss for one (center, context) pair.

    Default: -log sig(z_u.z_v) - sum log sig(-z_u.z_n), which is bounded
    below by zero. printed_form keeps the negative term without the sign
    flip on the logit (study only; unbounded below).
    """
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    zn = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if z_u.shape != z_v.shape or zn.shape[1] != z_u.shape[0]:
        raise ValidationError("dimension mismatch between pair and negatives")
    pos = float(z_u @ z_v)
    neg = zn @ z_u
    loss = np.logaddexp(0.0, -pos)
    if printed_form:
        loss -= np.logaddexp(0.0, -neg).sum()
    else:
        loss += np.logaddexp(0.0, neg).sum()
    return float(loss)


def sgns_pair_loss_grad(z_u, z_v, negatives, printed_form: bool = False):
    """Loss plus analytic gradients w.r.t. z_u, z_v and every negative."""
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    zn = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    loss = sgns_pair_loss(z_u, z_v, zn, printed_form)
    pos = float(z_u @ z_v)
    neg = zn @ z_u
    d_pos = _sigmoid(pos) - 1.0
    d_neg = -(1.0 - _sigmoid(neg)) if printed_form else _sigmoid(neg)
    g_u = d_pos * z_v + d_neg @ zn
    g_v = d_pos * z_u
    g_n = d_neg[:, None] * z_u[None, :]
    return loss, g_u, g_v, g_n


# -- SkipGram training -------------------------------------------------------


def _pair_array(corpus: WalkCorpus) -> np.ndarray:
    pairs = list(context_pairs(corpus))
    if not pairs:
        raise ValidationError("corpus yields no context pairs")
    return np.asarray(pairs, dtype=np.int64)


def _lr_at(step: int, total: int, lr: float, linear_decay: bool) -> float:
    if not linear_decay or total <= 0:
        return lr
    return max(lr * 1e-4, lr * (1.0 - step / total))


def _scatter_add(A: np.ndarray, idx: np.ndarray, g: np.ndarray) -> None:
    """A[idx] += g with duplicate rows accumulated (sort + segment sums)."""
    order = np.argsort(idx, kind="stable")
    idx_sorted = idx[order]
    starts = np.flatnonzero(
        np.concatenate(([True], idx_sorted[1:] != idx_sorted[:-1])))
    A[idx_sorted[starts]] += np.add.reduceat(g[order], starts, axis=0)


# below this node count, score against all context rows and push gradients
# through dense matmuls instead of (batch, k, dim) gathers
_DENSE_NODE_LIMIT = 4096


def _sgns_batch_update_dense(Z: np.ndarray, C: np.ndarray, centers, contexts,
                             negs, lr: float) -> None:
    b = len(centers)
    v = C.shape[0]
    zu = Z[centers]
    logits = zu @ C.T
    rows = np.arange(b)
    pos_g = _sigmoid(logits[rows, contexts]) - 1.0
    neg_g = _sigmoid(np.take_along_axis(logits, negs, axis=1))
    neg_g[negs == contexts[:, None]] = 0.0
    flat = (rows[:, None] * v + negs).ravel()
    coeff = np.bincount(flat, weights=neg_g.ravel().astype(np.float64),
                        minlength=b * v).reshape(b, v).astype(Z.dtype)
    coeff[rows, contexts] += pos_g
    _scatter_add(Z, centers, -lr * (coeff @ C))
    C -= lr * (coeff.T @ zu)


def _sgns_batch_update(Z: np.ndarray, C: np.ndarray, centers, contexts, negs,
                       lr: float) -> None:
    """One minibatch of SGNS updates; negatives equal to the context are masked."""
    if C.shape[0] <= _DENSE_NODE_LIMIT:
        _sgns_batch_update_dense(Z, C, centers, contexts, negs, lr)
        return
    zu = Z[centers]
    zv = C[contexts]
    zn = C[negs]
    pos_g = _sigmoid(np.einsum("bl,bl->b", zu, zv)) - 1.0
    neg_g = _sigmoid(np.einsum("bl,bkl->bk", zu, zn))
    neg_g[negs == contexts[:, None]] = 0.0
    g_u = pos_g[:, None] * zv + np.einsum("bk,bkl->bl", neg_g, zn)
    g_v = pos_g[:, None] * zu
    g_n = neg_g[:, :, None] * zu[:, None, :]
    _scatter_add(Z, centers, -lr * g_u)
    _scatter_add(C, contexts, -lr * g_v)
    _scatter_add(C, negs.ravel(), -lr * g_n.reshape(-1, Z.shape[1]))


def train_skipgram(corpus: WalkCorpus, config: SgnsConfig,
                   node_count: int | None = None,
                   init: PointEmbedding | None = None,
                   noise: NoiseDistribution | None = None,
                   threads: int = 1,
                   epoch_callback: Callable[[int, PointEmbedding], None] | None = None,
                   ) -> PointEmbedding:
    """Train SkipGram with negative sampling over the walk corpus.

    Deterministic for threads=1; threads>1 applies unsynchronized sparse
    updates to the shared tables (non-deterministic, loss-equivalent).
    Noise defaults to corpus occurrence counts raised to the noise exponent.
    """
    if not corpus.walks:
        raise ValidationError("corpus is empty")
    pairs = _pair_array(corpus)
    if node_count is None:
        node_count = init.node_count if init is not None else int(pairs.max()) + 1
    emb = init.copy() if init is not None else init_embeddings(
        node_count, config.dim, config.seed)
    if config.epochs == 0:
        return emb
    if noise is None:
        noise = NoiseDistribution.from_corpus(corpus, node_count,
                                              config.noise_exponent)
    Z = emb.vectors.astype(np.float32)
    C = emb.context_vectors.astype(np.float32)
    n_pairs = len(pairs)
    total = config.epochs * n_pairs
    step = 0
    for epoch in range(config.epochs):
        order = substream(config.seed, STREAM_TRAIN, epoch).permutation(n_pairs)
        negs = noise.sample(substream(config.seed, STREAM_NEGATIVES, epoch),
                            (n_pairs, config.negatives))
        starts = range(0, n_pairs, config.batch_size)

        def run(s: int, epoch_step=step) -> None:
            idx = order[s:s + config.batch_size]
            lr = _lr_at(epoch_step + s, total, config.lr, config.linear_decay)
            _sgns_batch_update(Z, C, pairs[idx, 0], pairs[idx, 1], negs[idx], lr)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run, starts))
        else:
            for s in starts:
                run(s)
        step += n_pairs
        if epoch_callback is not None:
            emb.vectors = Z.astype(np.float64)
            emb.context_vectors = C.astype(np.float64)
            epoch_callback(epoch, emb)
    emb.vectors = Z.astype(np.float64)
    emb.context_vectors = C.astype(np.float64)
    return emb


def pair_sample_loss(emb: PointEmbedding, pairs: np.ndarray,
                     noise: NoiseDistribution, k: int, seed: int) -> float:
    """Mean SGNS loss over a fixed pair sample with seeded negatives."""
    rng = substream(seed, STREAM_NEGATIVES, 0xEA1)
    negs = noise.sample(rng, (len(pairs), k))
    total = 0.0
    for (u, v), nn in zip(pairs, negs):
        total += sgns_pair_loss(emb.vectors[u], emb.context_vectors[v],
                                emb.context_vectors[nn])
    return total / len(pairs)


# -- LINE --------------------------------------------------------------------


def line_first_order_loss(graph: Graph, Z: np.ndarray,
                          edge_batch: Sequence[tuple[int, int, float]]) -> float:
    """Exact first-order objective over the batch.

    p1(i, j) is the softmax of z_i.z_j over the graph's (undirected) edge
    set; the loss is -sum w_ij log p1. Exact evaluator for small graphs.
    """
    if graph.directed:
        raise ValidationError("first-order proximity requires an undirected graph")
    scores = np.array([Z[u] @ Z[v] for u, v, _ in graph.edges()])
    if len(scores) == 0:
        raise ValidationError("graph has no edges")
    m = scores.max()
    log_denom = m + np.log(np.exp(scores - m).sum())
    loss = 0.0
    for i, j, w in edge_batch:
        loss -= w * (Z[i] @ Z[j] - log_denom)
    return float(loss)


def line_first_order_grad(graph: Graph, Z: np.ndarray, edge_batch):
    """Analytic gradient of the exact first-order loss w.r.t. Z."""
    loss = line_first_order_loss(graph, Z, edge_batch)
    edges = graph.edges()
    scores = np.array([Z[u] @ Z[v] for u, v, _ in edges])
    m = scores.max()
    e = np.exp(scores - m)
    p = e / e.sum()
    grad = np.zeros_like(Z)
    w_total = 0.0
    for i, j, w in edge_batch:
        grad[i] -= w * Z[j]
        grad[j] -= w * Z[i]
        w_total += w
    for (s, t, _), p_st in zip(edges, p):
        grad[s] += w_total * p_st * Z[t]
        grad[t] += w_total * p_st * Z[s]
    return loss, grad


def line_second_order_loss(graph: Graph, Z: np.ndarray, C: np.ndarray,
                           edge_batch: Sequence[tuple[int, int, float]]) -> float:
    """Exact second-order objective: per-source softmax over all context vectors."""
    loss = 0.0
    for i, j, w in edge_batch:
        logits = C @ Z[i]
        m = logits.max()
        log_denom = m + np.log(np.exp(logits - m).sum())
        loss -= w * (logits[j] - log_denom)
    return float(loss)


def line_second_order_grad(graph: Graph, Z: np.ndarray, C: np.ndarray, edge_batch):
    """Analytic gradients of the exact second-order loss w.r.t. Z and C."""
    loss = line_second_order_loss(graph, Z, C, edge_batch)
    gZ = np.zeros_like(Z)
    gC = np.zeros_like(C)
    for i, j, w in edge_batch:
        logits = C @ Z[i]
        m = logits.max()
        e = np.exp(logits - m)
        p = e / e.sum()
        gZ[i] -= w * (C[j] - p @ C)
        gC[j] -= w * Z[i]
        gC += w * p[:, None] * Z[i][None, :]
    return loss, gZ, gC


def train_line(graph: Graph, order: int, config: SgnsConfig,
               threads: int = 1) -> PointEmbedding:
    """Edge-sampled SGD with negative sampling for LINE (order 1 or 2).

    Edges are sampled proportional to weight, matching the weighted
    objectives in expectation; undirected edges get a random orientation
    per sample. Noise is degree**beta over nodes.
    """
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    if order == 1 and graph.directed:
        raise ValidationError("first-order training requires an undirected graph")
    if graph.edge_count == 0:
        raise ValidationError("graph has no edges")
    emb = init_embeddings(graph.node_count, config.dim, config.seed)
    if config.epochs == 0:
        return emb
    Z = emb.vectors.astype(np.float32)
    C = emb.context_vectors.astype(np.float32)
    ctx = Z if order == 1 else C
    edges = np.asarray([(u, v) for u, v, _ in graph.edges()], dtype=np.int64)
    weights = np.asarray([w for _, _, w in graph.edges()])
    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0
    noise = NoiseDistribution.from_degrees(graph, config.noise_exponent)
    m = len(edges)
    total = config.epochs * m
    step = 0
    for epoch in range(config.epochs):
        rng = substream(config.seed, STREAM_TRAIN, epoch)
        idx = np.searchsorted(cum, rng.random(m), side="right")
        src, dst = edges[idx, 0].copy(), edges[idx, 1].copy()
        if not graph.directed:
            flip = rng.random(m) < 0.5
            src[flip], dst[flip] = dst[flip], src[flip].copy()
        negs = noise.sample(substream(config.seed, STREAM_NEGATIVES, epoch),
                            (m, config.negatives))
        starts = range(0, m, config.batch_size)

        def run(s: int, epoch_step=step) -> None:
            sl = slice(s, s + config.batch_size)
            lr = _lr_at(epoch_step + s, total, config.lr, config.linear_decay)
            _sgns_batch_update(Z, ctx, src[sl], dst[sl], negs[sl], lr)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(run, starts))
        else:
            for s in starts:
                run(s)
        step += m
    emb.vectors = Z.astype(np.float64)
    emb.context_vectors = C.astype(np.float64)
    return emb


# -- word2vec text format ----------------------------------------------------


def save_point_embedding(emb: PointEmbedding, graph: Graph, stream) -> None:
    """word2vec text format: "count dim" header then "id v1 ... vL" rows."""
    n, dim = emb.vectors.shape
    stream.write(f"{n} {dim}\n")
    for v in range(n):
        vals = " ".join(f"{x:.17g}" for x in emb.vectors[v])
        stream.write(f"{graph.external(v)} {vals}\n")


def load_point_embedding(source) -> tuple[list[str], np.ndarray]:
    """Read the word2vec text format; returns (external ids, |V| x L matrix)."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            return load_point_embedding(fh)
    header = source.readline().split()
    if len(header) != 2:
        raise ValidationError("embedding file must start with 'count dim'")
    n, dim = int(header[0]), int(header[1])
    ids, rows = [], []
    for line in source:
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != dim + 1:
            raise ValidationError(f"expected {dim + 1} columns, got {len(tokens)}")
        ids.append(tokens[0])
        rows.append([float(t) for t in tokens[1:]])
    if len(ids) != n:
        raise ValidationError(f"expected {n} rows, found {len(ids)}")
    return ids, np.asarray(rows)
