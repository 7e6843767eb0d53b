"""Uniform and second-order biased random walks with alias sampling.

The transition mass from current node v to candidate x given previous node t
is alpha_pq(t, x) * k_vx, where k_vx is the edge weight and alpha is 1/p when
x == t, 1 when t-x is an edge, and 1/q otherwise. The first step of a walk
has no previous node and samples proportional to edge weight alone.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .graph import Graph, ValidationError

_MASK64 = (1 << 64) - 1

# spawn-key tags for named random sub-streams
STREAM_WALK = 1
STREAM_SHUFFLE = 2
STREAM_NEGATIVES = 3
STREAM_INIT = 4
STREAM_TRIPLETS = 5
STREAM_TRAIN = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...); reproducible and order-free."""
    return np.random.default_rng(
        np.random.SeedSequence(seed & _MASK64, spawn_key=tuple(key)))


def _alias_setup(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias tables for O(1) categorical draws."""
    n = len(probs)
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    scaled = probs * n
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] - (1.0 - scaled[s])
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large:
        prob[i] = 1.0
    for i in small:
        prob[i] = 1.0
    return prob, alias


def _alias_draw(prob: np.ndarray, alias: np.ndarray, rng: np.random.Generator) -> int:
    i = int(rng.integers(len(prob)))
    return i if rng.random() < prob[i] else int(alias[i])


@dataclass(frozen=True)
class WalkConfig:
    num_walks: int = 10
    walk_length: int = 80
    window: int = 10
    p: float = 1.0
    q: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_walks < 1 or self.walk_length < 1 or self.window < 1:
            raise ValidationError("num_walks, walk_length and window must be >= 1")
        if not (self.p > 0 and self.q > 0):
            raise ValidationError("p and q must be positive")


@dataclass(frozen=True)
class WalkCorpus:
    walks: tuple[tuple[int, ...], ...]
    config: WalkConfig


class _AliasEntry:
    __slots__ = ("nodes", "probs", "prob", "alias")

    def __init__(self, nodes: np.ndarray, probs: np.ndarray):
        self.nodes = nodes
        self.probs = probs
        self.prob, self.alias = _alias_setup(probs)

    def draw(self, rng: np.random.Generator) -> int:
        return int(self.nodes[_alias_draw(self.prob, self.alias, rng)])


class TransitionTable:
    """Alias tables for biased second-order transitions.

    First-step tables (one per node) are weight-proportional. Step tables are
    keyed by the directed context (prev, cur) and built lazily on first use
    with publish-once semantics, so concurrent walkers build each entry once.
    """

    def __init__(self, graph: Graph, p: float, q: float):
        if not (p > 0 and q > 0):
            raise ValidationError("p and q must be positive")
        self.graph = graph
        self.p = p
        self.q = q
        self._node_entries: dict[int, _AliasEntry | None] = {}
        self._edge_entries: dict[tuple[int, int], _AliasEntry | None] = {}
        self._lock = threading.Lock()

    def _build_node_entry(self, v: int) -> _AliasEntry | None:
        nbrs = self.graph.neighbors(v)
        if not nbrs:
            return None
        nodes = np.array([x for x, _ in nbrs], dtype=np.int64)
        w = np.array([w for _, w in nbrs], dtype=np.float64)
        return _AliasEntry(nodes, w / w.sum())

    def _build_edge_entry(self, t: int, v: int) -> _AliasEntry | None:
        nbrs = self.graph.neighbors(v)
        if not nbrs:
            return None
        nodes = np.array([x for x, _ in nbrs], dtype=np.int64)
        mass = np.empty(len(nbrs))
        for i, (x, w) in enumerate(nbrs):
            if x == t:
                alpha = 1.0 / self.p
            elif self.graph.has_edge(t, x):
                alpha = 1.0
            else:
                alpha = 1.0 / self.q
            mass[i] = alpha * w
        return _AliasEntry(nodes, mass / mass.sum())

    def _node_entry(self, v: int) -> _AliasEntry | None:
        entry = self._node_entries.get(v, False)
        if entry is not False:
            return entry
        with self._lock:
            if v not in self._node_entries:
                self._node_entries[v] = self._build_node_entry(v)
            return self._node_entries[v]

    def _edge_entry(self, t: int, v: int) -> _AliasEntry | None:
        key = (t, v)
        entry = self._edge_entries.get(key, False)
        if entry is not False:
            return entry
        with self._lock:
            if key not in self._edge_entries:
                self._edge_entries[key] = self._build_edge_entry(t, v)
            return self._edge_entries[key]

    def sample_first(self, v: int, rng: np.random.Generator) -> int | None:
        entry = self._node_entry(v)
        return entry.draw(rng) if entry is not None else None

    def sample_step(self, t: int, v: int, rng: np.random.Generator) -> int | None:
        entry = self._edge_entry(t, v)
        return entry.draw(rng) if entry is not None else None

    def first_step_distribution(self, v: int) -> dict[int, float]:
        entry = self._node_entry(v)
        if entry is None:
            return {}
        return {int(x): float(p) for x, p in zip(entry.nodes, entry.probs)}

    def step_distribution(self, t: int, v: int) -> dict[int, float]:
        """Normalized next-step probabilities for the context (prev=t, cur=v)."""
        entry = self._edge_entry(t, v)
        if entry is None:
            return {}
        return {int(x): float(p) for x, p in zip(entry.nodes, entry.probs)}


def preprocess_transition_probs(graph: Graph, p: float, q: float) -> TransitionTable:
    """Prepare (lazy) alias tables for biased walks on this graph."""
    return TransitionTable(graph, p, q)


def _single_walk(table: TransitionTable, start: int, length: int,
                 rng: np.random.Generator) -> tuple[int, ...]:
    walk = [start]
    if length == 1:
        return tuple(walk)
    nxt = table.sample_first(start, rng)
    if nxt is None:
        return tuple(walk)
    walk.append(nxt)
    while len(walk) < length:
        nxt = table.sample_step(walk[-2], walk[-1], rng)
        if nxt is None:
            break
        walk.append(nxt)
    return tuple(walk)


def simulate_walks(graph: Graph, table: TransitionTable, config: WalkConfig,
                   threads: int = 1) -> WalkCorpus:
    """Generate num_walks walks per node; start order shuffled per pass.

    Each walk draws from its own (seed, pass, start) stream, so the corpus is
    byte-identical regardless of thread count; a walk reaching a sink node
    terminates early.
    """
    n = graph.node_count
    seed = config.seed
    tasks: list[tuple[int, int]] = []
    for pass_idx in range(config.num_walks):
        order = substream(seed, STREAM_SHUFFLE, pass_idx).permutation(n)
        tasks.extend((pass_idx, int(s)) for s in order)

    def run(task: tuple[int, int]) -> tuple[int, ...]:
        pass_idx, start = task
        rng = substream(seed, STREAM_WALK, pass_idx, start)
        return _single_walk(table, start, config.walk_length, rng)

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            walks = list(pool.map(run, tasks, chunksize=64))
    else:
        walks = [run(t) for t in tasks]
    return WalkCorpus(tuple(walks), config)


def context_pairs(corpus: WalkCorpus, window: int | None = None
                  ) -> Iterator[tuple[int, int]]:
    """Emit (center, context) pairs within the window along every walk."""
    w = corpus.config.window if window is None else window
    if w < 1:
        raise ValidationError("window must be >= 1")
    for walk in corpus.walks:
        n = len(walk)
        for i in range(n):
            for j in range(max(0, i - w), min(n, i + w + 1)):
                if j != i:
                    yield walk[i], walk[j]


def dump_walks(corpus: WalkCorpus, graph: Graph, stream) -> None:
    """One walk per line, space-separated external node ids."""
    for walk in corpus.walks:
        stream.write(" ".join(str(graph.external(v)) for v in walk) + "\n")
