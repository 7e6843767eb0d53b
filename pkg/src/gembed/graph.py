"""Graph data model and file ingestion.

Immutable adjacency-list graphs (directed/undirected, weighted/binary) with
optional sparse node attributes and labels, plus knowledge-graph triples,
temporal edge lists, snapshot sequences, and train/val/test edge splitting.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp


class ParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(ValueError):
    """Input violates a structural contract (bad ids, bad weights, ...)."""


class IdMap:
    """Bidirectional table between external node ids and dense indices.

    Dense indices are assigned in first-seen order. External ids may be
    arbitrary strings (or ints, kept as given).
    """

    def __init__(self):
        self._dense: dict = {}
        self._external: list = []

    def add(self, external) -> int:
        idx = self._dense.get(external)
        if idx is None:
            idx = len(self._external)
            self._dense[external] = idx
            self._external.append(external)
        return idx

    def dense(self, external) -> int:
        try:
            return self._dense[external]
        except KeyError:
            raise ValidationError(f"unknown node id: {external!r}") from None

    def external(self, dense: int):
        return self._external[dense]

    def __contains__(self, external) -> bool:
        return external in self._dense

    def __len__(self) -> int:
        return len(self._external)

    def items(self) -> Iterator[tuple[object, int]]:
        return iter(self._dense.items())

    @classmethod
    def identity(cls, n: int) -> "IdMap":
        m = cls()
        for i in range(n):
            m.add(i)
        return m


class Graph:
    """Immutable adjacency-list graph.

    Undirected graphs store each edge once logically but expose symmetric
    neighbor queries. Weights are strictly positive; binary graphs carry
    weight 1.0 on every edge. Self-loops are retained and contribute one
    adjacency entry at their endpoint.
    """

    __slots__ = ("node_count", "directed", "weighted", "id_map",
                 "attributes", "labels", "_adj", "_edges", "_edge_set",
                 "_degrees")

    def __init__(self, node_count: int, edges: Sequence[tuple[int, int, float]],
                 directed: bool, weighted: bool, id_map: IdMap,
                 attributes: sp.csr_matrix | None = None,
                 labels: np.ndarray | None = None):
        self.node_count = node_count
        self.directed = directed
        self.weighted = weighted
        self.id_map = id_map
        adj: list[list[tuple[int, float]]] = [[] for _ in range(node_count)]
        edge_set = set()
        for u, v, w in edges:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValidationError(f"edge ({u},{v}) outside node range")
            if not (w > 0 and math.isfinite(w)):
                raise ValidationError(f"edge ({u},{v}) has non-positive weight {w}")
            adj[u].append((v, w))
            if not directed and u != v:
                adj[v].append((u, w))
            edge_set.add((u, v))
            if not directed:
                edge_set.add((v, u))
        self._adj = tuple(tuple(nbrs) for nbrs in adj)
        self._edges = tuple((u, v, float(w)) for u, v, w in edges)
        self._edge_set = frozenset(edge_set)
        degrees = np.zeros(node_count, dtype=np.int64)
        for u, v, _ in self._edges:
            degrees[u] += 1
            if u != v or directed:
                degrees[v] += 1
        self._degrees = degrees
        if attributes is not None and attributes.shape[0] != node_count:
            raise ValidationError(
                f"attribute matrix has {attributes.shape[0]} rows, expected {node_count}")
        self.attributes = attributes
        if labels is not None and len(labels) != node_count:
            raise ValidationError("label vector length must equal node count")
        self.labels = labels

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], directed: bool = False,
                   weighted: bool = False, id_map: IdMap | None = None,
                   node_count: int | None = None) -> "Graph":
        """Build a graph from (src, dst[, weight]) tuples with external ids.

        Dense indices follow first-seen order. Duplicate edges collapse;
        for weighted graphs their weights are summed, binary graphs keep
        weight 1.
        """
        own_map = id_map is None
        if own_map:
            id_map = IdMap()
        acc: dict[tuple[int, int], float] = {}
        for e in edges:
            if len(e) == 3:
                src, dst, w = e
            else:
                src, dst = e
                w = 1.0
            u = id_map.add(src) if own_map else id_map.dense(src)
            v = id_map.add(dst) if own_map else id_map.dense(dst)
            if not weighted:
                w = 1.0
            key = (u, v)
            if not directed and v < u:
                key = (v, u)
            if key in acc:
                acc[key] = acc[key] + w if weighted else 1.0
            else:
                acc[key] = float(w)
        n = node_count if node_count is not None else len(id_map)
        dense_edges = [(u, v, w) for (u, v), w in acc.items()]
        return cls(n, dense_edges, directed, weighted, id_map)

    # -- queries ---------------------------------------------------------

    def neighbors(self, v: int) -> tuple[tuple[int, float], ...]:
        """Out-neighbors of v as (neighbor, weight) pairs (symmetric when undirected)."""
        return self._adj[v]

    def degree(self, v: int) -> int:
        return int(self._degrees[v])

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    def edges(self) -> tuple[tuple[int, int, float], ...]:
        """Logical edge list; each undirected edge appears exactly once."""
        return self._edges

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def external(self, v: int):
        return self.id_map.external(v)

    # -- derived copies (the graph itself is never mutated) ---------------

    def with_attributes(self, attributes: sp.csr_matrix) -> "Graph":
        return Graph(self.node_count, self._edges, self.directed, self.weighted,
                     self.id_map, attributes=attributes, labels=self.labels)

    def with_labels(self, labels: np.ndarray) -> "Graph":
        return Graph(self.node_count, self._edges, self.directed, self.weighted,
                     self.id_map, attributes=self.attributes, labels=labels)

    def with_edges(self, edges: Sequence[tuple[int, int, float]]) -> "Graph":
        """Same nodes/id space/attributes, different edge set (e.g. train split)."""
        return Graph(self.node_count, edges, self.directed, self.weighted,
                     self.id_map, attributes=self.attributes, labels=self.labels)


@dataclass(frozen=True)
class KnowledgeTriples:
    """Knowledge-graph store: (head, relation, tail) triples over id tables."""

    entities: IdMap
    relations: IdMap
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        ne, nr = len(self.entities), len(self.relations)
        for h, r, t in self.triples:
            if not (0 <= h < ne and 0 <= t < ne):
                raise ValidationError(f"triple ({h},{r},{t}) has invalid entity id")
            if not (0 <= r < nr):
                raise ValidationError(f"triple ({h},{r},{t}) has invalid relation id")

    @property
    def triple_set(self) -> frozenset:
        return frozenset(self.triples)


@dataclass(frozen=True)
class TemporalGraph:
    """Continuous-time graph: temporal edges (src, dst, time), times >= 0.

    Edges are directed as stored; for undirected temporal data include both
    orientations.
    """

    node_count: int
    temporal_edges: tuple[tuple[int, int, float], ...]
    _edge_lookup: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for u, v, t in self.temporal_edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValidationError(f"temporal edge ({u},{v},{t}) has invalid node id")
            if not (math.isfinite(t) and t >= 0):
                raise ValidationError(f"temporal edge ({u},{v},{t}) has invalid time")
        object.__setattr__(self, "_edge_lookup",
                           frozenset((u, v, t) for u, v, t in self.temporal_edges))

    def has_temporal_edge(self, u: int, v: int, t: float) -> bool:
        return (u, v, t) in self._edge_lookup


@dataclass(frozen=True)
class SnapshotSequence:
    """Temporally ordered static snapshots sharing one node-id universe."""

    snapshots: tuple[Graph, ...]
    interval_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.snapshots) != len(self.interval_labels):
            raise ValidationError("one interval label per snapshot required")
        if self.snapshots:
            n = self.snapshots[0].node_count
            if any(g.node_count != n for g in self.snapshots):
                raise ValidationError("snapshots must share one node universe")


@dataclass(frozen=True)
class EdgeSplit:
    """Partition of a graph's edges into train/val/test plus sampled non-edges."""

    train_edges: tuple[tuple[int, int, float], ...]
    val_edges: tuple[tuple[int, int, float], ...]
    test_edges: tuple[tuple[int, int, float], ...]
    val_nonedges: tuple[tuple[int, int], ...]
    test_nonedges: tuple[tuple[int, int], ...]
    seed: int


# -- loaders ---------------------------------------------------------------


def _iter_lines(source) -> Iterator[tuple[int, str]]:
    """Yield (line_no, stripped line) skipping blanks and '#' comments."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from _iter_lines(fh)
        return
    for i, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield i, line


def load_edge_list(source, directed: bool = False, weighted: bool = False) -> Graph:
    """Parse whitespace-separated "src dst [weight]" lines into a Graph.

    '#'-prefixed lines are comments. Dense node ids follow first-seen order.
    Duplicate edges collapse (weights summed on weighted graphs). Raises
    ParseError with the offending line number on malformed input and
    ValidationError on non-positive weights.
    """
    id_map = IdMap()
    acc: dict[tuple[int, int], float] = {}
    for line_no, line in _iter_lines(source):
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {line!r}", line_no)
        u = id_map.add(tokens[0])
        v = id_map.add(tokens[1])
        w = 1.0
        if weighted and len(tokens) == 3:
            try:
                w = float(tokens[2])
            except ValueError:
                raise ParseError(f"bad weight {tokens[2]!r}", line_no) from None
            if not (w > 0 and math.isfinite(w)):
                raise ValidationError(f"line {line_no}: non-positive weight {w}")
        key = (u, v)
        if not directed and v < u:
            key = (v, u)
        if key in acc:
            acc[key] = acc[key] + w if weighted else 1.0
        else:
            acc[key] = w
    edges = [(u, v, w) for (u, v), w in acc.items()]
    return Graph(len(id_map), edges, directed, weighted, id_map)


def dump_edge_list(graph: Graph, stream) -> None:
    """Write the logical edge list back out using external node ids."""
    for u, v, w in graph.edges():
        a, b = graph.external(u), graph.external(v)
        if graph.weighted:
            stream.write(f"{a} {b} {w:.17g}\n")
        else:
            stream.write(f"{a} {b}\n")


def load_attributes(graph: Graph, source) -> Graph:
    """Attach sparse attributes from "node feat value" triples.

    D = 1 + max feature index. Duplicate (node, feat) entries are summed.
    An empty stream leaves the graph without attributes (D = 0).
    """
    rows, cols, vals = [], [], []
    max_feat = -1
    for line_no, line in _iter_lines(source):
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"expected 'node feat value', got {line!r}", line_no)
        node = graph.id_map.dense(tokens[0])
        try:
            feat = int(tokens[1])
            val = float(tokens[2])
        except ValueError:
            raise ParseError(f"bad attribute triple {line!r}", line_no) from None
        if feat < 0:
            raise ValidationError(f"line {line_no}: negative feature index {feat}")
        rows.append(node)
        cols.append(feat)
        vals.append(val)
        max_feat = max(max_feat, feat)
    if not rows:
        return graph
    mat = sp.csr_matrix((vals, (rows, cols)),
                        shape=(graph.node_count, max_feat + 1), dtype=np.float64)
    mat.sum_duplicates()
    return graph.with_attributes(mat)


def load_labels(graph: Graph, source) -> Graph:
    """Attach integer class labels from "node label" lines (-1 = unlabeled)."""
    labels = np.full(graph.node_count, -1, dtype=np.int64)
    for line_no, line in _iter_lines(source):
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected 'node label', got {line!r}", line_no)
        node = graph.id_map.dense(tokens[0])
        try:
            labels[node] = int(tokens[1])
        except ValueError:
            raise ParseError(f"bad label {tokens[1]!r}", line_no) from None
    return graph.with_labels(labels)


def load_knowledge_triples(source) -> KnowledgeTriples:
    """Parse "head relation tail" lines; ids assigned in first-seen order."""
    entities, relations = IdMap(), IdMap()
    seen = set()
    triples = []
    for line_no, line in _iter_lines(source):
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"expected 'head relation tail', got {line!r}", line_no)
        h = entities.add(tokens[0])
        r = relations.add(tokens[1])
        t = entities.add(tokens[2])
        if (h, r, t) not in seen:
            seen.add((h, r, t))
            triples.append((h, r, t))
    return KnowledgeTriples(entities, relations, tuple(triples))


def load_temporal_edges(source, node_count: int | None = None,
                        id_map: IdMap | None = None) -> tuple[TemporalGraph, IdMap]:
    """Parse "src dst time" lines into a TemporalGraph plus its id map."""
    own_map = id_map is None
    if own_map:
        id_map = IdMap()
    edges = []
    for line_no, line in _iter_lines(source):
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"expected 'src dst time', got {line!r}", line_no)
        u = id_map.add(tokens[0]) if own_map else id_map.dense(tokens[0])
        v = id_map.add(tokens[1]) if own_map else id_map.dense(tokens[1])
        try:
            t = float(tokens[2])
        except ValueError:
            raise ParseError(f"bad time {tokens[2]!r}", line_no) from None
        edges.append((u, v, t))
    n = node_count if node_count is not None else len(id_map)
    return TemporalGraph(n, tuple(edges)), id_map


def load_snapshots(directory, directed: bool = False,
                   weighted: bool = False) -> SnapshotSequence:
    """Load a directory of edge-list files (lexicographic order) as snapshots.

    All snapshots share one id universe: the union of node ids across files,
    assigned in (file order, first-seen) order.
    """
    paths = sorted(p for p in os.listdir(directory)
                   if os.path.isfile(os.path.join(directory, p)))
    if not paths:
        raise ValidationError(f"no snapshot files in {directory!r}")
    id_map = IdMap()
    per_file_edges = []
    for name in paths:
        edges = []
        for line_no, line in _iter_lines(os.path.join(directory, name)):
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise ParseError(f"expected 'src dst [weight]', got {line!r}", line_no)
            w = float(tokens[2]) if (weighted and len(tokens) == 3) else 1.0
            edges.append((tokens[0], tokens[1], w))
        per_file_edges.append(edges)
        for a, b, _ in edges:
            id_map.add(a)
            id_map.add(b)
    n = len(id_map)
    snapshots = [Graph.from_edges(edges, directed=directed, weighted=weighted,
                                  id_map=id_map, node_count=n)
                 for edges in per_file_edges]
    return SnapshotSequence(tuple(snapshots), tuple(paths))


# -- shortest paths and neighborhoods --------------------------------------


def _bfs_distances(graph: Graph, source: int) -> np.ndarray:
    """Hop counts from source over out-edges; -1 marks unreachable."""
    dist = np.full(graph.node_count, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v, _ in graph.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path_length(graph: Graph, i: int, j: int) -> int | None:
    """Unweighted BFS hop count from i to j; None if unreachable."""
    if not (0 <= i < graph.node_count and 0 <= j < graph.node_count):
        raise ValidationError("node id out of range")
    if i == j:
        return 0
    dist = _bfs_distances(graph, i)
    return int(dist[j]) if dist[j] >= 0 else None


def k_hop_neighborhoods(graph: Graph, source: int, K: int) -> dict[int, set[int]]:
    """Bucket nodes j != source by hop k = min(sp(source, j), K).

    Nodes at distance >= K land in the K bucket; unreachable nodes (sp
    infinite) are excluded from every bucket.
    """
    if not (0 <= source < graph.node_count):
        raise ValidationError(f"invalid source node {source}")
    if K < 1:
        raise ValidationError("K must be >= 1")
    dist = _bfs_distances(graph, source)
    hops: dict[int, set[int]] = {k: set() for k in range(1, K + 1)}
    for j in range(graph.node_count):
        if j == source or dist[j] < 0:
            continue
        hops[min(int(dist[j]), K)].add(j)
    return hops


# -- edge splitting ---------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_edges(graph: Graph, p_val: float, p_test: float, seed: int,
                max_tries_per_sample: int = 100) -> EdgeSplit:
    """Split edges into train/val/test and sample matching non-edges.

    |val| = round(p_val * |E|), |test| = round(p_test * |E|); the three sets
    partition the edge set. Non-edges are drawn uniformly from absent pairs
    (no self-pairs), equal in number to the corresponding edge set.
    Deterministic under the seed.
    """
    if p_val < 0 or p_test < 0 or p_val + p_test >= 1:
        raise ValidationError("require p_val, p_test >= 0 and p_val + p_test < 1")
    edges = list(graph.edges())
    m = len(edges)
    n_val = _round_half_up(p_val * m)
    n_test = _round_half_up(p_test * m)
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    val = tuple(edges[i] for i in order[:n_val])
    test = tuple(edges[i] for i in order[n_val:n_val + n_test])
    train = tuple(edges[i] for i in order[n_val + n_test:])

    needed = n_val + n_test
    n = graph.node_count
    if graph.directed:
        capacity = n * (n - 1) - sum(1 for u, v, _ in edges if u != v)
    else:
        capacity = n * (n - 1) // 2 - sum(1 for u, v, _ in edges if u != v)
    if needed > capacity:
        raise ValidationError(
            f"graph too dense: need {needed} non-edges, only {capacity} exist")
    nonedges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    budget = max_tries_per_sample * max(needed, 1)
    while len(nonedges) < needed:
        if budget <= 0:
            raise ValidationError(
                "could not sample enough non-edges within the retry budget")
        budget -= 1
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v:
            continue
        if not graph.directed and v < u:
            u, v = v, u
        if (u, v) in seen or graph.has_edge(u, v):
            continue
        seen.add((u, v))
        nonedges.append((u, v))
    return EdgeSplit(train, val, test,
                     tuple(nonedges[:n_val]), tuple(nonedges[n_val:]),
                     seed)


# -- temporal walk validity --------------------------------------------------


def is_temporally_valid_walk(tg: TemporalGraph,
                             walk: Sequence[tuple[int, float]]) -> bool:
    """True iff edge times along the walk are non-decreasing (ties allowed).

    Each walk element is (node, arrival time); the first element's time is
    the start time and is unconstrained. A consecutive pair that is not a
    temporal edge of tg raises ValidationError, which is distinct from a
    mere ordering violation (returns False).
    """
    if not walk:
        raise ValidationError("walk must be non-empty")
    for node, _ in walk:
        if not (0 <= node < tg.node_count):
            raise ValidationError(f"walk visits invalid node {node}")
    if len(walk) == 1:
        return True
    for (u, _), (v, t) in zip(walk, walk[1:]):
        if not tg.has_temporal_edge(u, v, t):
            raise ValidationError(f"({u},{v}) at time {t} is not a temporal edge")
    times = [t for _, t in walk[1:]]
    return all(a <= b for a, b in zip(times, times[1:]))
