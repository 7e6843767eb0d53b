import io
import math

import numpy as np
import pytest
from scipy.stats import chi2

from gembed.graph import Graph, IdMap, ValidationError, load_edge_list
from gembed.sgns import (NoiseDistribution, PointEmbedding, SgnsConfig,
                         init_embeddings, line_first_order_grad,
                         line_first_order_loss, line_second_order_grad,
                         line_second_order_loss, load_point_embedding,
                         negative_sample, pair_sample_loss,
                         save_point_embedding, sgns_pair_loss,
                         sgns_pair_loss_grad, train_line, train_skipgram)
from gembed.walks import WalkConfig, WalkCorpus
from conftest import random_graph


def make_corpus(walks, window=2):
    return WalkCorpus(tuple(tuple(w) for w in walks),
                      WalkConfig(num_walks=1, walk_length=99, window=window,
                                 seed=0))


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


# -- initialization ------------------------------------------------------------


def test_init_shapes_and_range():
    emb = init_embeddings(34, 128, seed=0)
    assert emb.vectors.shape == (34, 128)
    assert emb.context_vectors.shape == (34, 128)
    assert np.abs(emb.vectors).max() <= 0.5 / 128
    assert np.all(emb.context_vectors == 0.0)


def test_init_deterministic():
    a = init_embeddings(10, 8, seed=4)
    b = init_embeddings(10, 8, seed=4)
    c = init_embeddings(10, 8, seed=5)
    assert np.array_equal(a.vectors, b.vectors)
    assert not np.array_equal(a.vectors, c.vectors)


# -- negative sampling -----------------------------------------------------------


def test_negative_sample_count():
    g = random_graph(12, 0.3, seed=0)
    ids = negative_sample(g, 0.75, 5, np.random.default_rng(0))
    assert len(ids) == 5
    assert all(0 <= i < 12 for i in ids)


def test_negative_sample_uniform_chi2():
    g = random_graph(8, 0.4, seed=1)
    dist = NoiseDistribution.from_degrees(g, 0.0)
    draws = dist.sample(np.random.default_rng(3), 200_000)
    counts = np.bincount(draws, minlength=8)
    expected = 200_000 / 8
    stat = ((counts - expected) ** 2 / expected).sum()
    assert stat < chi2.ppf(0.999, df=7)


def test_negative_sample_star_degree_power_law():
    # hub degree n-1 = 10, leaves degree 1: exact categorical oracle
    edges = [(0, i) for i in range(1, 11)]
    g = Graph.from_edges(edges, id_map=IdMap.identity(11), node_count=11)
    dist = NoiseDistribution.from_degrees(g, 0.75)
    p_hub = 10 ** 0.75 / (10 ** 0.75 + 10.0)
    assert dist.probs[0] == pytest.approx(p_hub)
    n = 1_000_000
    draws = dist.sample(np.random.default_rng(8), n)
    observed = int((draws == 0).sum())
    sigma = math.sqrt(n * p_hub * (1 - p_hub))
    assert abs(observed - n * p_hub) < 3 * sigma


def test_negative_sample_beta_range():
    g = random_graph(5, 0.5, seed=0)
    with pytest.raises(ValidationError):
        negative_sample(g, 1.5, 3, np.random.default_rng(0))


# -- pair loss --------------------------------------------------------------------


def test_pair_loss_zero_vectors():
    z = np.zeros(6)
    negs = np.zeros((4, 6))
    assert sgns_pair_loss(z, z, negs) == pytest.approx(5 * math.log(2))


def test_pair_loss_saturation_near_zero():
    e = np.zeros(4)
    e[0] = 40.0
    assert sgns_pair_loss(e, e, [-e]) < 1e-12


def test_pair_loss_nonnegative_default():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z_u, z_v = rng.normal(size=(2, 5))
        negs = rng.normal(size=(3, 5))
        assert sgns_pair_loss(z_u, z_v, negs) >= 0.0


def test_pair_loss_printed_form_value():
    rng = np.random.default_rng(1)
    z_u, z_v = rng.normal(size=(2, 4))
    negs = rng.normal(size=(2, 4))
    expected = -math.log(sigmoid(z_u @ z_v)) + sum(
        math.log(sigmoid(z_u @ n)) for n in negs)
    assert sgns_pair_loss(z_u, z_v, negs,
                          printed_form=True) == pytest.approx(expected)


def test_pair_loss_dimension_mismatch():
    with pytest.raises(ValidationError):
        sgns_pair_loss(np.zeros(3), np.zeros(4), np.zeros((1, 3)))


def test_pair_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    eps = 1e-5
    for _ in range(20):
        z_u, z_v = rng.normal(size=(2, 8))
        negs = rng.normal(size=(3, 8))
        _, g_u, g_v, g_n = sgns_pair_loss_grad(z_u, z_v, negs)

        def check(vec, grad, setter):
            for i in range(len(vec)):
                orig = vec[i]
                vec[i] = orig + eps
                up = sgns_pair_loss(z_u, z_v, negs)
                vec[i] = orig - eps
                down = sgns_pair_loss(z_u, z_v, negs)
                vec[i] = orig
                fd = (up - down) / (2 * eps)
                assert abs(grad[i] - fd) <= 1e-4 * max(1.0, abs(fd))

        check(z_u, g_u, None)
        check(z_v, g_v, None)
        for j in range(3):
            check(negs[j], g_n[j], None)


# -- skipgram training ------------------------------------------------------------


def test_train_zero_epochs_returns_init():
    corpus = make_corpus([[0, 1, 2], [2, 1, 0]])
    cfg = SgnsConfig(dim=8, epochs=0, seed=1)
    emb = train_skipgram(corpus, cfg)
    ref = init_embeddings(3, 8, seed=1)
    assert np.array_equal(emb.vectors, ref.vectors)
    assert np.array_equal(emb.context_vectors, ref.context_vectors)


def test_train_empty_corpus_rejected():
    corpus = WalkCorpus((), WalkConfig(seed=0))
    with pytest.raises(ValidationError):
        train_skipgram(corpus, SgnsConfig(dim=4))


def test_single_repeated_pair_converges():
    corpus = make_corpus([[0, 1]], window=1)
    cfg = SgnsConfig(dim=8, epochs=300, lr=0.1, negatives=2, seed=3,
                     batch_size=8)
    emb = train_skipgram(corpus, cfg, node_count=2)
    score = emb.vectors[0] @ emb.context_vectors[1]
    assert sigmoid(score) >= 0.95


def test_train_deterministic_single_threaded():
    corpus = make_corpus([[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2]])
    cfg = SgnsConfig(dim=6, epochs=3, seed=9)
    a = train_skipgram(corpus, cfg)
    b = train_skipgram(corpus, cfg)
    assert np.array_equal(a.vectors, b.vectors)


def test_heldout_loss_non_increasing_median():
    g = random_graph(20, 0.25, seed=6)
    walks = []
    rng = np.random.default_rng(0)
    for start in range(20):
        for _ in range(3):
            walk = [start]
            for _ in range(9):
                nbrs = g.neighbors(walk[-1])
                if not nbrs:
                    break
                walk.append(int(nbrs[rng.integers(len(nbrs))][0]))
            walks.append(walk)
    corpus = make_corpus(walks, window=3)
    probe = np.asarray([(w[i], w[i + 1]) for w in walks[:40]
                        for i in range(len(w) - 1)][:150], dtype=np.int64)
    curves = []
    for seed in (0, 1, 2):
        noise = NoiseDistribution.from_corpus(corpus, 20, 0.75)
        losses = []
        cfg = SgnsConfig(dim=12, epochs=4, lr=0.05, seed=seed)
        train_skipgram(corpus, cfg, node_count=20, epoch_callback=lambda e, emb:
                       losses.append(pair_sample_loss(emb, probe, noise, 5, 77)))
        curves.append(losses)
    diffs = np.median(np.diff(np.asarray(curves), axis=1), axis=0)
    assert np.all(diffs <= 1e-3)


def test_training_permutation_equivariance():
    class Replay:
        """Noise source yielding a recorded stream, optionally relabeled."""

        def __init__(self, base, perm=None):
            self.base = base
            self.perm = perm

        def sample(self, rng, shape):
            draws = self.base.sample(rng, shape)
            return draws if self.perm is None else self.perm[draws]

    walks = [[0, 1, 2, 3], [2, 0, 3, 1], [3, 2, 1, 0]]
    corpus = make_corpus(walks, window=2)
    perm = np.array([2, 0, 3, 1])  # node i -> perm[i]
    permuted = make_corpus([[int(perm[v]) for v in w] for w in walks], window=2)
    init = init_embeddings(4, 6, seed=5)
    init_p = PointEmbedding(init.vectors[np.argsort(perm)].copy(),
                            init.context_vectors[np.argsort(perm)].copy())
    base = NoiseDistribution(np.ones(4))
    cfg = SgnsConfig(dim=6, epochs=3, lr=0.05, seed=2)
    emb = train_skipgram(corpus, cfg, node_count=4, init=init,
                         noise=Replay(base))
    emb_p = train_skipgram(permuted, cfg, node_count=4, init=init_p,
                           noise=Replay(base, perm))
    # row v of the base run corresponds to row perm[v] of the permuted run
    assert np.allclose(emb.vectors, emb_p.vectors[perm], atol=1e-6)
    assert np.allclose(emb.context_vectors, emb_p.context_vectors[perm],
                       atol=1e-6)


def test_parallel_mode_runs():
    corpus = make_corpus([[0, 1, 2, 3, 4]] * 6, window=2)
    cfg = SgnsConfig(dim=8, epochs=2, seed=0)
    emb = train_skipgram(corpus, cfg, threads=3)
    assert np.all(np.isfinite(emb.vectors))


# -- LINE exact losses -------------------------------------------------------------


def triangle_fixture():
    g = load_edge_list(io.StringIO("0 1 1.0\n1 2 2.0\n0 2 0.5\n"), weighted=True)
    rng = np.random.default_rng(5)
    Z = rng.normal(size=(3, 4))
    C = rng.normal(size=(3, 4))
    return g, Z, C


def test_line1_two_node_single_edge_zero_loss():
    g = load_edge_list(io.StringIO("a b\n"))
    Z = np.random.default_rng(0).normal(size=(2, 3))
    assert line_first_order_loss(g, Z, g.edges()) == pytest.approx(0.0)


def test_line1_loss_linear_in_weights():
    g, Z, _ = triangle_fixture()
    base = line_first_order_loss(g, Z, g.edges())
    doubled_graph = g.with_edges([(u, v, 2 * w) for u, v, w in g.edges()])
    batch = [(u, v, 2 * w) for u, v, w in g.edges()]
    # p1 does not involve weights, so doubling every w doubles the loss
    assert line_first_order_loss(doubled_graph, Z, batch) == pytest.approx(2 * base)


def test_line1_matches_direct_summation():
    g, Z, _ = triangle_fixture()
    denom = sum(math.exp(Z[s] @ Z[t]) for s, t, _ in g.edges())
    expected = -sum(w * math.log(math.exp(Z[i] @ Z[j]) / denom)
                    for i, j, w in g.edges())
    assert line_first_order_loss(g, Z, g.edges()) == pytest.approx(expected,
                                                                   abs=1e-9)


def test_line1_requires_undirected():
    g = load_edge_list(io.StringIO("a b\n"), directed=True)
    with pytest.raises(ValidationError):
        line_first_order_loss(g, np.zeros((2, 2)), g.edges())


def test_line2_star_equal_vectors_uniform():
    g = load_edge_list(io.StringIO("0 1\n0 2\n0 3\n"))
    Z = np.ones((4, 3))
    C = np.ones((4, 3))
    w_total = 3.0
    loss = line_second_order_loss(g, Z, C, g.edges())
    assert loss == pytest.approx(w_total * math.log(4))


def test_line2_empty_batch_zero():
    g, Z, C = triangle_fixture()
    assert line_second_order_loss(g, Z, C, []) == 0.0


def test_line2_matches_direct_summation():
    g, Z, C = triangle_fixture()
    expected = 0.0
    for i, j, w in g.edges():
        denom = sum(math.exp(C[k] @ Z[i]) for k in range(3))
        expected -= w * math.log(math.exp(C[j] @ Z[i]) / denom)
    assert line_second_order_loss(g, Z, C, g.edges()) == pytest.approx(
        expected, abs=1e-9)


@pytest.mark.parametrize("order", [1, 2])
def test_line_gradients_match_finite_differences(order):
    eps = 1e-5
    rng = np.random.default_rng(11)
    for trial in range(10):
        g = random_graph(5, 0.6, seed=trial, weighted=True)
        if g.edge_count < 2:
            continue
        Z = rng.normal(scale=0.5, size=(5, 3))
        C = rng.normal(scale=0.5, size=(5, 3))
        batch = g.edges()
        if order == 1:
            loss, gZ = line_first_order_grad(g, Z, batch)
            tables = [(Z, gZ)]
            evaluate = lambda: line_first_order_loss(g, Z, batch)
        else:
            loss, gZ, gC = line_second_order_grad(g, Z, C, batch)
            tables = [(Z, gZ), (C, gC)]
            evaluate = lambda: line_second_order_loss(g, Z, C, batch)
        for table, grad in tables:
            it = np.nditer(table, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = table[idx]
                table[idx] = orig + eps
                up = evaluate()
                table[idx] = orig - eps
                down = evaluate()
                table[idx] = orig
                fd = (up - down) / (2 * eps)
                assert abs(grad[idx] - fd) <= 1e-4 * max(1.0, abs(fd))


# -- LINE training -----------------------------------------------------------------


def two_cliques(size=8):
    edges = []
    for base in (0, size):
        for i in range(size):
            for j in range(i + 1, size):
                edges.append((base + i, base + j))
    n = 2 * size
    return Graph.from_edges(edges, id_map=IdMap.identity(n), node_count=n)


def test_train_line_separates_cliques():
    g = two_cliques()
    cfg = SgnsConfig(dim=16, epochs=300, lr=0.05, negatives=5, seed=0,
                     batch_size=64)
    Z = train_line(g, 1, cfg).vectors
    def cos(a, b):
        return a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    intra = np.mean([cos(Z[i], Z[j]) for i in range(16) for j in range(16)
                     if i < j and (i < 8) == (j < 8)])
    inter = np.mean([cos(Z[i], Z[j]) for i in range(8) for j in range(8, 16)])
    assert intra - inter >= 0.3


def test_train_line_zero_epochs_is_init():
    g = two_cliques(4)
    cfg = SgnsConfig(dim=8, epochs=0, seed=7)
    emb = train_line(g, 2, cfg)
    ref = init_embeddings(8, 8, seed=7)
    assert np.array_equal(emb.vectors, ref.vectors)


def test_train_line_deterministic():
    g = two_cliques(4)
    cfg = SgnsConfig(dim=8, epochs=4, seed=3)
    a = train_line(g, 2, cfg)
    b = train_line(g, 2, cfg)
    assert np.array_equal(a.vectors, b.vectors)


def test_train_line_order_validation():
    g = load_edge_list(io.StringIO("a b\n"), directed=True)
    with pytest.raises(ValidationError):
        train_line(g, 1, SgnsConfig(dim=4))
    with pytest.raises(ValidationError):
        train_line(g, 3, SgnsConfig(dim=4))


# -- word2vec text format -------------------------------------------------------------


def test_point_embedding_roundtrip(tmp_path):
    g = load_edge_list(io.StringIO("alpha beta\nbeta gamma\n"))
    emb = init_embeddings(3, 5, seed=2)
    path = tmp_path / "emb.txt"
    with open(path, "w") as fh:
        save_point_embedding(emb, g, fh)
    ids, mat = load_point_embedding(str(path))
    assert ids == ["alpha", "beta", "gamma"]
    assert np.array_equal(mat, emb.vectors)
    header = open(path).readline().split()
    assert header == ["3", "5"]
