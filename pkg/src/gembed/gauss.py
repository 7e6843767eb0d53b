"""Gaussian-distribution node embeddings.

Every node (or knowledge-graph entity/relation) is a diagonal Gaussian with
mean vector mu and strictly positive variance vector sigma. This module
provides the three energies between such Gaussians (expected likelihood,
KL divergence, 2-Wasserstein), hop-ordered triplet sampling, an attributed
feedforward encoder trained with the square-exponential ranking loss and
Adam, and a knowledge-graph trainer with margin ranking loss and unif/bern
triple corruption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph, KnowledgeTriples, ValidationError, k_hop_neighborhoods
from .walks import STREAM_INIT, STREAM_TRAIN, STREAM_TRIPLETS, substream


@dataclass
class GaussianEmbedding:
    """Per-node mean (|V| x L/2) and diagonal variance (|V| x L/2, > 0)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ValidationError("mu and sigma must have identical shape")
        if not np.all(np.isfinite(self.mu)) or not np.all(np.isfinite(self.sigma)):
            raise ValidationError("embedding entries must be finite")
        if np.any(self.sigma <= 0):
            raise ValidationError("all sigma entries must be strictly positive")

    @property
    def node_count(self) -> int:
        return self.mu.shape[0]

    @property
    def dim(self) -> int:
        """Total embedding size L = 2 * (mu width)."""
        return 2 * self.mu.shape[1]


# -- energies ----------------------------------------------------------------


def _check_pair(mu_i, sigma_i, mu_j, sigma_j):
    mu_i = np.asarray(mu_i, dtype=np.float64)
    mu_j = np.asarray(mu_j, dtype=np.float64)
    sigma_i = np.asarray(sigma_i, dtype=np.float64)
    sigma_j = np.asarray(sigma_j, dtype=np.float64)
    if not (mu_i.shape == mu_j.shape == sigma_i.shape == sigma_j.shape):
        raise ValidationError("mean/variance vectors must share one length")
    if np.any(sigma_i <= 0) or np.any(sigma_j <= 0):
        raise ValidationError("variances must be strictly positive")
    return mu_i, sigma_i, mu_j, sigma_j


def kl_energy(mu_i, sigma_i, mu_j, sigma_j) -> float:
    """KL divergence KL(N_i || N_j) between diagonal Gaussians (asymmetric)."""
    mu_i, sigma_i, mu_j, sigma_j = _check_pair(mu_i, sigma_i, mu_j, sigma_j)
    ratio = sigma_i / sigma_j
    quad = (mu_i - mu_j) ** 2 / sigma_j
    return float(0.5 * np.sum(ratio + quad - 1.0 + np.log(sigma_j) - np.log(sigma_i)))


def el_energy(mu_i, sigma_i, mu_j, sigma_j) -> float:
    """Expected likelihood: the Gaussian product integral (symmetric).

    Equals the density of N(mu_i - mu_j, sigma_i + sigma_j) evaluated at the
    origin.
    """
    mu_i, sigma_i, mu_j, sigma_j = _check_pair(mu_i, sigma_i, mu_j, sigma_j)
    s = sigma_i + sigma_j
    d = len(mu_i)
    quad = np.sum((mu_i - mu_j) ** 2 / s)
    log_norm = -0.5 * (d * math.log(2.0 * math.pi) + np.sum(np.log(s)))
    return float(np.exp(log_norm - 0.5 * quad))


def w2_distance(mu_i, sigma_i, mu_j, sigma_j) -> float:
    """2-Wasserstein distance between diagonal Gaussians (variances in sigma)."""
    mu_i, sigma_i, mu_j, sigma_j = _check_pair(mu_i, sigma_i, mu_j, sigma_j)
    mean_term = np.sum((mu_i - mu_j) ** 2)
    std_term = np.sum((np.sqrt(sigma_i) - np.sqrt(sigma_j)) ** 2)
    return float(np.sqrt(mean_term + std_term))


def _kl_batch(mu_i, sigma_i, mu_j, sigma_j) -> np.ndarray:
    ratio = sigma_i / sigma_j
    quad = (mu_i - mu_j) ** 2 / sigma_j
    return 0.5 * np.sum(ratio + quad - 1.0 + np.log(sigma_j) - np.log(sigma_i),
                        axis=-1)


def _kl_batch_grads(mu_i, sigma_i, mu_j, sigma_j, dE):
    """Gradients of sum(dE * KL_row) w.r.t. the four input arrays."""
    diff = mu_i - mu_j
    dE = dE[:, None]
    dmu_i = dE * diff / sigma_j
    dmu_j = -dmu_i
    dsig_i = dE * 0.5 * (1.0 / sigma_j - 1.0 / sigma_i)
    dsig_j = dE * 0.5 * (1.0 / sigma_j - sigma_i / sigma_j ** 2
                         - diff ** 2 / sigma_j ** 2)
    return dmu_i, dsig_i, dmu_j, dsig_j


# -- ranking losses ----------------------------------------------------------


def square_exp_loss(energies: Sequence[tuple[float, float]]) -> float:
    """Sum of E_pos**2 + exp(-E_neg) over (positive, negative) energy pairs."""
    total = 0.0
    for e_pos, e_neg in energies:
        if not (math.isfinite(e_pos) and math.isfinite(e_neg)):
            raise ValidationError("energies must be finite")
        total += e_pos ** 2 + math.exp(-e_neg)
    return total


def margin_ranking_loss(pos_energies, neg_energies, gamma: float,
                        printed_form: bool = False) -> float:
    """Hinge ranking loss over paired positive/negative energies.

    Default is the conventional max(0, E_pos + gamma - E_neg); printed_form
    switches to max(0, E_pos - gamma + E_neg), which rewards large negative
    energies being small instead (study only).
    """
    if gamma < 0:
        raise ValidationError("gamma must be >= 0")
    pos = np.asarray(pos_energies, dtype=np.float64)
    neg = np.asarray(neg_energies, dtype=np.float64)
    if pos.shape != neg.shape:
        raise ValidationError("positive/negative energy lists must align")
    if printed_form:
        margins = pos - gamma + neg
    else:
        margins = pos + gamma - neg
    return float(np.maximum(0.0, margins).sum())


# -- triplets ----------------------------------------------------------------


class Triplet(NamedTuple):
    anchor: int
    positive: int
    positive_hop: int
    negative: int
    negative_hop: int


@dataclass(frozen=True)
class TripletSet:
    triplets: tuple[Triplet, ...]
    seed: int
    K: int

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = np.fromiter((t.anchor for t in self.triplets), dtype=np.int64)
        p = np.fromiter((t.positive for t in self.triplets), dtype=np.int64)
        n = np.fromiter((t.negative for t in self.triplets), dtype=np.int64)
        return a, p, n


def sample_triplets(graph: Graph, K: int, per_anchor: int, seed: int) -> TripletSet:
    """Node-anchored hop-ordered triplet sampling.

    For every anchor, per_anchor rounds each draw one representative per
    non-empty hop bucket (hop = min(sp, K)); every bucket pair k < l yields
    the triplet (anchor, rep_k, rep_l). Anchors with fewer than two
    non-empty buckets contribute nothing; if no anchor qualifies the graph
    cannot support ranking and an error is raised.
    """
    if K < 1:
        raise ValidationError("K must be >= 1")
    if per_anchor < 1:
        raise ValidationError("per_anchor must be >= 1")
    rng = substream(seed, STREAM_TRIPLETS)
    out: list[Triplet] = []
    any_eligible = False
    for anchor in range(graph.node_count):
        hops = k_hop_neighborhoods(graph, anchor, K)
        buckets = [(k, sorted(nodes)) for k, nodes in hops.items() if nodes]
        if len(buckets) < 2:
            continue
        any_eligible = True
        for _ in range(per_anchor):
            reps = [(k, nodes[rng.integers(len(nodes))]) for k, nodes in buckets]
            for a in range(len(reps)):
                for b in range(a + 1, len(reps)):
                    k, jk = reps[a]
                    l, jl = reps[b]
                    out.append(Triplet(anchor, jk, k, jl, l))
    if not any_eligible:
        raise ValidationError(
            "no node has two non-empty hop buckets; cannot build triplets")
    return TripletSet(tuple(out), seed, K)


def ranking_satisfaction(emb: GaussianEmbedding, triplets: TripletSet) -> float:
    """Fraction of triplets with E(anchor, pos) < E(anchor, neg) under KL."""
    a, p, n = triplets.arrays()
    e_pos = _kl_batch(emb.mu[a], emb.sigma[a], emb.mu[p], emb.sigma[p])
    e_neg = _kl_batch(emb.mu[a], emb.sigma[a], emb.mu[n], emb.sigma[n])
    return float(np.mean(e_pos < e_neg))


# -- feedforward encoder -----------------------------------------------------

_SIGMA_EPS = 1e-14


@dataclass
class EncoderParams:
    """Feedforward net: input -> relu hidden layers -> mu head + sigma head.

    The sigma head output passes through elu(x) + 1 + 1e-14, keeping every
    variance strictly positive (exactly 1 + 1e-14 at zero activation).
    """

    hidden_w: list[np.ndarray]
    hidden_b: list[np.ndarray]
    mu_w: np.ndarray
    mu_b: np.ndarray
    sigma_w: np.ndarray
    sigma_b: np.ndarray

    def flat(self) -> dict[str, np.ndarray]:
        d = {}
        for i, (w, b) in enumerate(zip(self.hidden_w, self.hidden_b)):
            d[f"hidden_w{i}"] = w
            d[f"hidden_b{i}"] = b
        d["mu_w"] = self.mu_w
        d["mu_b"] = self.mu_b
        d["sigma_w"] = self.sigma_w
        d["sigma_b"] = self.sigma_b
        return d

    @property
    def out_dim(self) -> int:
        return self.mu_w.shape[1]

    @property
    def in_dim(self) -> int:
        return (self.hidden_w[0] if self.hidden_w else self.mu_w).shape[0]


def init_encoder(input_dim: int, hidden: Sequence[int], out_dim: int,
                 seed: int) -> EncoderParams:
    """Glorot-uniform weights, zero biases."""
    rng = substream(seed, STREAM_INIT)

    def glorot(fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    hw, hb = [], []
    prev = input_dim
    for h in hidden:
        hw.append(glorot(prev, h))
        hb.append(np.zeros(h))
        prev = h
    return EncoderParams(hw, hb, glorot(prev, out_dim), np.zeros(out_dim),
                         glorot(prev, out_dim), np.zeros(out_dim))


def _sigma_transform(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, a + 1.0 + _SIGMA_EPS, np.exp(np.minimum(a, 0.0)) + _SIGMA_EPS)


def _sigma_transform_deriv(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, 1.0, np.exp(np.minimum(a, 0.0)))


def encode_batch(params: EncoderParams, X):
    """Forward pass for a batch (dense or CSR rows); returns mu, sigma, cache."""
    acts = [X]
    pre = []
    h = X
    for w, b in zip(params.hidden_w, params.hidden_b):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    a_mu = h @ params.mu_w + params.mu_b
    a_sigma = h @ params.sigma_w + params.sigma_b
    return a_mu, _sigma_transform(a_sigma), (acts, pre, a_sigma)


def encode(params: EncoderParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Encode one attribute row into (mu, sigma); sigma strictly positive."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.in_dim:
        raise ValidationError(
            f"input length {x.shape} does not match encoder input {params.in_dim}")
    mu, sigma, _ = encode_batch(params, x[None, :])
    return mu[0], sigma[0]


def encoder_backward(params: EncoderParams, cache, dmu: np.ndarray,
                     dsigma: np.ndarray) -> dict[str, np.ndarray]:
    """Backprop output gradients to parameter gradients (keys match flat())."""
    acts, pre, a_sigma = cache
    h_last = acts[-1]
    da_sigma = dsigma * _sigma_transform_deriv(a_sigma)
    grads: dict[str, np.ndarray] = {
        "mu_w": h_last.T @ dmu,
        "mu_b": dmu.sum(axis=0),
        "sigma_w": h_last.T @ da_sigma,
        "sigma_b": da_sigma.sum(axis=0),
    }
    dh = dmu @ params.mu_w.T + da_sigma @ params.sigma_w.T
    for i in range(len(params.hidden_w) - 1, -1, -1):
        dz = dh * (pre[i] > 0)
        a_prev = acts[i]
        grads[f"hidden_w{i}"] = a_prev.T @ dz
        grads[f"hidden_b{i}"] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ params.hidden_w[i].T
    return grads


# -- Adam --------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: dict[str, np.ndarray], beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()},
                   0, beta1, beta2, eps)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> dict[str, np.ndarray]:
    """Bias-corrected Adam update applied in place; returns params."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValidationError(f"gradient shape mismatch for {k!r}")
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g ** 2
        m_hat = state.m[k] / (1 - b1 ** state.t)
        v_hat = state.v[k] / (1 - b2 ** state.t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


# -- G2G training ------------------------------------------------------------


@dataclass(frozen=True)
class G2GConfig:
    dim: int = 64
    hidden: tuple[int, ...] = (512,)
    K: int = 2
    per_anchor: int = 3
    epochs: int = 200
    lr: float = 1e-3
    seed: int = 0
    energy: str = "kl"
    batch_size: int = 128

    def __post_init__(self):
        if self.dim % 2 != 0 or self.dim < 2:
            raise ValidationError("embedding size L must be even and >= 2")
        if self.energy != "kl":
            raise ValidationError("the attributed encoder trains with the KL energy")
        if self.epochs < 0 or self.lr <= 0:
            raise ValidationError("epochs must be >= 0 and lr positive")


@dataclass
class G2GResult:
    embedding: GaussianEmbedding
    params: EncoderParams
    sigma_history: np.ndarray  # epochs x (L/2): mean sigma per dimension


def node_features(graph: Graph):
    """Attribute matrix, or one-hot identity rows when attributes are absent."""
    if graph.attributes is not None:
        return graph.attributes
    return sp.identity(graph.node_count, format="csr", dtype=np.float64)


def _ranking_loss_and_grads(params: EncoderParams, X_rows, a, p, n):
    """Loss and parameter grads for triplets indexed into the given rows."""
    mu, sigma, cache = encode_batch(params, X_rows)
    e_pos = _kl_batch(mu[a], sigma[a], mu[p], sigma[p])
    e_neg = _kl_batch(mu[a], sigma[a], mu[n], sigma[n])
    loss = float(np.sum(e_pos ** 2) + np.sum(np.exp(-e_neg)))
    d_pos = 2.0 * e_pos
    d_neg = -np.exp(-e_neg)
    dmu = np.zeros_like(mu)
    dsigma = np.zeros_like(sigma)
    for (i, j, dE) in ((a, p, d_pos), (a, n, d_neg)):
        dmu_i, dsig_i, dmu_j, dsig_j = _kl_batch_grads(
            mu[i], sigma[i], mu[j], sigma[j], dE)
        np.add.at(dmu, i, dmu_i)
        np.add.at(dsigma, i, dsig_i)
        np.add.at(dmu, j, dmu_j)
        np.add.at(dsigma, j, dsig_j)
    return loss, encoder_backward(params, cache, dmu, dsigma)


def g2g_loss_and_grads(params: EncoderParams, X, triplets: TripletSet):
    """Square-exponential ranking loss over triplets and its parameter grads."""
    a, p, n = triplets.arrays()
    return _ranking_loss_and_grads(params, X, a, p, n)


def train_g2g(graph: Graph, config: G2GConfig) -> G2GResult:
    """Train the attributed Gaussian encoder with hop-ranked triplets.

    Triplets are resampled every epoch and consumed in shuffled minibatches,
    one Adam step per batch; only the nodes a batch touches are encoded.
    The mean sigma per dimension after each epoch is recorded for
    uncertainty analysis.
    """
    X = node_features(graph)
    d = config.dim // 2
    params = init_encoder(X.shape[1], config.hidden, d, config.seed)
    flat = params.flat()
    state = AdamState.init(flat)
    seed_rng = substream(config.seed, STREAM_TRAIN)
    history = np.zeros((config.epochs, d))
    for epoch in range(config.epochs):
        trip_seed = int(seed_rng.integers(2 ** 62))
        triplets = sample_triplets(graph, config.K, config.per_anchor, trip_seed)
        rows = np.array([(t.anchor, t.positive, t.negative)
                         for t in triplets.triplets], dtype=np.int64)
        order = seed_rng.permutation(len(rows))
        for s in range(0, len(rows), config.batch_size):
            batch = rows[order[s:s + config.batch_size]]
            uniq, inv = np.unique(batch.ravel(), return_inverse=True)
            local = inv.reshape(-1, 3)
            _, grads = _ranking_loss_and_grads(
                params, X[uniq], local[:, 0], local[:, 1], local[:, 2])
            adam_step(flat, grads, state, config.lr)
        _, sigma, _ = encode_batch(params, X)
        history[epoch] = sigma.mean(axis=0)
    mu, sigma, _ = encode_batch(params, X)
    return G2GResult(GaussianEmbedding(mu, sigma), params, history)


# -- KG2E --------------------------------------------------------------------


@dataclass
class KgEmbedding:
    entities: GaussianEmbedding
    relations: GaussianEmbedding

    def __post_init__(self):
        if self.entities.dim != self.relations.dim:
            raise ValidationError("entity and relation embeddings must share L")


@dataclass(frozen=True)
class Kg2eConfig:
    dim: int = 40
    gamma: float = 1.0
    energy: str = "kl"
    mode: str = "unif"
    epochs: int = 200
    lr: float = 0.02
    seed: int = 0
    batch_size: int = 64
    sigma_min: float = 0.05
    sigma_max: float = 5.0

    def __post_init__(self):
        if self.dim % 2 != 0 or self.dim < 2:
            raise ValidationError("embedding size L must be even and >= 2")
        if self.energy not in ("kl", "el"):
            raise ValidationError("energy must be 'kl' or 'el'")
        if self.mode not in ("unif", "bern"):
            raise ValidationError("mode must be 'unif' or 'bern'")
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")


def _bern_head_probs(kt: KnowledgeTriples) -> np.ndarray:
    """Per-relation probability of corrupting the head (tph/(tph+hpt))."""
    nr = len(kt.relations)
    probs = np.full(nr, 0.5)
    for r in range(nr):
        rt = [(h, t) for h, rr, t in kt.triples if rr == r]
        if not rt:
            continue
        heads = {h for h, _ in rt}
        tails = {t for _, t in rt}
        tph = len(rt) / len(heads)
        hpt = len(rt) / len(tails)
        probs[r] = tph / (tph + hpt)
    return probs


def corrupt_triple(kt: KnowledgeTriples, mode: str, rng: np.random.Generator,
                   triple: tuple[int, int, int] | None = None,
                   max_tries: int = 100) -> tuple[int, int, int]:
    """Corrupt a triple's head or tail into a negative not present in the store.

    unif flips a fair coin; bern biases the choice by the relation's
    tail-per-head vs head-per-tail ratios, corrupting the side that keeps
    the negative more likely false.
    """
    if not kt.triples:
        raise ValidationError("empty triple store")
    if mode not in ("unif", "bern"):
        raise ValidationError("mode must be 'unif' or 'bern'")
    if triple is None:
        triple = kt.triples[int(rng.integers(len(kt.triples)))]
    h, r, t = triple
    head_prob = 0.5 if mode == "unif" else _bern_head_probs(kt)[r]
    known = kt.triple_set
    ne = len(kt.entities)
    # one coin per corruption; only the replacement entity is resampled, so
    # the head/tail split stays exactly at head_prob under collisions
    replace_head = rng.random() < head_prob
    for _ in range(max_tries):
        candidate = int(rng.integers(ne))
        neg = (candidate, r, t) if replace_head else (h, r, candidate)
        if neg not in known and neg != triple:
            return neg
    raise ValidationError("could not find a negative triple within the retry bound")


def _trans_energy_and_grads(mu_h, sig_h, mu_t, sig_t, mu_r, sig_r, energy: str):
    """Energy of N(mu_h - mu_t, sig_h + sig_t) against N(mu_r, sig_r).

    Returns per-row energies and gradients w.r.t. the six input arrays.
    The EL path uses the negative log product integral so that lower energy
    always means more similar, matching the KL path's orientation.
    """
    mu_e = mu_h - mu_t
    sig_e = sig_h + sig_t
    if energy == "kl":
        e = _kl_batch(mu_e, sig_e, mu_r, sig_r)
        ones = np.ones(len(np.atleast_1d(e)))
        dmu_e, dsig_e, dmu_r, dsig_r = _kl_batch_grads(mu_e, sig_e, mu_r, sig_r, ones)
    else:
        s = sig_e + sig_r
        diff = mu_e - mu_r
        e = 0.5 * np.sum(np.log(2.0 * math.pi * s) + diff ** 2 / s, axis=-1)
        dmu_e = diff / s
        dmu_r = -dmu_e
        dsig_e = 0.5 * (1.0 / s - diff ** 2 / s ** 2)
        dsig_r = dsig_e
    return e, (dmu_e, dsig_e, -dmu_e, dsig_e, dmu_r, dsig_r)


def kg_triple_energy(kg: KgEmbedding, h: int, r: int, t: int,
                     energy: str = "kl") -> float:
    """Ranking energy of a triple; lower means the triple fits better."""
    ent, rel = kg.entities, kg.relations
    e, _ = _trans_energy_and_grads(
        ent.mu[None, h], ent.sigma[None, h], ent.mu[None, t], ent.sigma[None, t],
        rel.mu[None, r], rel.sigma[None, r], energy)
    return float(e[0])


def kg2e_loss_and_grads(ent_mu, ent_sig, rel_mu, rel_sig,
                        pos: np.ndarray, neg: np.ndarray, gamma: float,
                        energy: str = "kl", printed_form: bool = False):
    """Hinge ranking loss over aligned (pos, neg) triple arrays and its grads.

    Returns (loss, grads) with grads keyed ent_mu/ent_sig/rel_mu/rel_sig,
    each the same shape as the corresponding table.
    """
    e_pos, g_pos = _trans_energy_and_grads(
        ent_mu[pos[:, 0]], ent_sig[pos[:, 0]],
        ent_mu[pos[:, 2]], ent_sig[pos[:, 2]],
        rel_mu[pos[:, 1]], rel_sig[pos[:, 1]], energy)
    e_neg, g_neg = _trans_energy_and_grads(
        ent_mu[neg[:, 0]], ent_sig[neg[:, 0]],
        ent_mu[neg[:, 2]], ent_sig[neg[:, 2]],
        rel_mu[neg[:, 1]], rel_sig[neg[:, 1]], energy)
    if printed_form:
        margins = e_pos - gamma + e_neg
        neg_sign = 1.0
    else:
        margins = e_pos + gamma - e_neg
        neg_sign = -1.0
    active = margins > 0
    loss = float(margins[active].sum())
    grads = {"ent_mu": np.zeros_like(ent_mu), "ent_sig": np.zeros_like(ent_sig),
             "rel_mu": np.zeros_like(rel_mu), "rel_sig": np.zeros_like(rel_sig)}
    w_pos = active.astype(np.float64)[:, None]
    for rows, g, w in ((pos, g_pos, w_pos), (neg, g_neg, neg_sign * w_pos)):
        dmu_h, dsig_h, dmu_t, dsig_t, dmu_r, dsig_r = g
        np.add.at(grads["ent_mu"], rows[:, 0], w * dmu_h)
        np.add.at(grads["ent_sig"], rows[:, 0], w * dsig_h)
        np.add.at(grads["ent_mu"], rows[:, 2], w * dmu_t)
        np.add.at(grads["ent_sig"], rows[:, 2], w * dsig_t)
        np.add.at(grads["rel_mu"], rows[:, 1], w * dmu_r)
        np.add.at(grads["rel_sig"], rows[:, 1], w * dsig_r)
    return loss, grads


def train_kg2e(kt: KnowledgeTriples, config: Kg2eConfig) -> KgEmbedding:
    """Margin-ranking SGD over Gaussian entity/relation embeddings.

    Negatives come from unif/bern corruption; sigma entries are clamped to
    [sigma_min, sigma_max] after every step. Deterministic under the seed.
    """
    if not kt.triples:
        raise ValidationError("empty triple store")
    d = config.dim // 2
    ne, nr = len(kt.entities), len(kt.relations)
    rng = substream(config.seed, STREAM_INIT)
    ent_mu = rng.uniform(-0.5, 0.5, size=(ne, d)) * (6.0 / math.sqrt(d))
    rel_mu = rng.uniform(-0.5, 0.5, size=(nr, d)) * (6.0 / math.sqrt(d))
    ent_sig = np.ones((ne, d))
    rel_sig = np.ones((nr, d))
    tables = {"ent_mu": ent_mu, "ent_sig": ent_sig,
              "rel_mu": rel_mu, "rel_sig": rel_sig}
    triples = np.asarray(kt.triples, dtype=np.int64)
    m = len(triples)
    train_rng = substream(config.seed, STREAM_TRAIN)
    for _ in range(config.epochs):
        order = train_rng.permutation(m)
        negs = np.array([corrupt_triple(kt, config.mode, train_rng,
                                        tuple(triples[i]))
                         for i in order], dtype=np.int64)
        for s in range(0, m, config.batch_size):
            pos = triples[order[s:s + config.batch_size]]
            neg = negs[s:s + config.batch_size]
            _, grads = kg2e_loss_and_grads(ent_mu, ent_sig, rel_mu, rel_sig,
                                           pos, neg, config.gamma,
                                           config.energy)
            for key, table in tables.items():
                table -= config.lr * grads[key]
            np.clip(ent_sig, config.sigma_min, config.sigma_max, out=ent_sig)
            np.clip(rel_sig, config.sigma_min, config.sigma_max, out=rel_sig)
    return KgEmbedding(GaussianEmbedding(ent_mu, ent_sig),
                       GaussianEmbedding(rel_mu, rel_sig))


# -- serialization -----------------------------------------------------------


def save_gaussian_embedding(emb: GaussianEmbedding, external_ids: Iterable,
                            stream) -> None:
    """Text format: "count L" header, then "id mu_1..mu_d sigma_1..sigma_d"."""
    n, d = emb.mu.shape
    stream.write(f"{n} {2 * d}\n")
    for v, ext in zip(range(n), external_ids):
        vals = " ".join(f"{x:.17g}" for x in np.concatenate([emb.mu[v], emb.sigma[v]]))
        stream.write(f"{ext} {vals}\n")


def load_gaussian_embedding(source) -> tuple[list[str], GaussianEmbedding]:
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            return load_gaussian_embedding(fh)
    header = source.readline().split()
    if len(header) != 2:
        raise ValidationError("gaussian embedding file must start with 'count L'")
    n, L = int(header[0]), int(header[1])
    if L % 2 != 0:
        raise ValidationError("embedding size L must be even")
    d = L // 2
    ids, mus, sigmas = [], [], []
    for line in source:
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != L + 1:
            raise ValidationError(f"expected {L + 1} columns, got {len(tokens)}")
        ids.append(tokens[0])
        vals = [float(t) for t in tokens[1:]]
        mus.append(vals[:d])
        sigmas.append(vals[d:])
    if len(ids) != n:
        raise ValidationError(f"expected {n} rows, found {len(ids)}")
    return ids, GaussianEmbedding(np.asarray(mus), np.asarray(sigmas))


def save_variance_history(history: np.ndarray, stream) -> None:
    """CSV "epoch,dim,mean_sigma" rows from an epochs x (L/2) history."""
    stream.write("epoch,dim,mean_sigma\n")
    for e in range(history.shape[0]):
        for d in range(history.shape[1]):
            stream.write(f"{e},{d},{history[e, d]:.17g}\n")
