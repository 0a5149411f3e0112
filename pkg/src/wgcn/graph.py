"""Directed graph container, dataset ingestion, k-hop neighborhoods and splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an input file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph stored as sorted in- and out-neighbor lists.

    Build one with :meth:`from_edges` (or :func:`load_edge_list`) so that
    self-loops are dropped and duplicate edges collapsed.
    """

    num_nodes: int
    out_adj: tuple[np.ndarray, ...]
    in_adj: tuple[np.ndarray, ...]
    num_edges: int
    node_ids: np.ndarray | None = None
    dropped_self_loops: int = 0
    dropped_duplicates: int = 0

    @classmethod
    def from_edges(cls, num_nodes, src, dst, node_ids=None) -> "DirectedGraph":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if src.size and (src.min() < 0 or dst.min() < 0
                         or src.max() >= num_nodes or dst.max() >= num_nodes):
            raise ValueError("edge endpoint outside [0, num_nodes)")
        loops = src == dst
        n_loops = int(loops.sum())
        src, dst = src[~loops], dst[~loops]
        keys = np.unique(src * num_nodes + dst)
        n_dup = src.size - keys.size
        src, dst = keys // num_nodes, keys % num_nodes

        out_adj = _split_sorted(src, dst, num_nodes)
        order = np.lexsort((src, dst))
        in_adj = _split_sorted(dst[order], src[order], num_nodes)
        return cls(num_nodes=int(num_nodes), out_adj=out_adj, in_adj=in_adj,
                   num_edges=int(keys.size), node_ids=node_ids,
                   dropped_self_loops=n_loops, dropped_duplicates=int(n_dup))

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(src, dst)`` arrays, sorted by source then target."""
        counts = np.fromiter((a.size for a in self.out_adj), dtype=np.int64,
                             count=self.num_nodes)
        src = np.repeat(np.arange(self.num_nodes), counts)
        dst = np.concatenate(self.out_adj) if self.num_nodes else np.empty(0, np.int64)
        return src, dst.astype(np.int64)

    def transpose(self) -> "DirectedGraph":
        src, dst = self.edges()
        return DirectedGraph.from_edges(self.num_nodes, dst, src, self.node_ids)

    def adjacency(self) -> sp.csr_matrix:
        """Sparse 0/1 matrix with ``A[i, j] = 1`` for the edge i -> j."""
        src, dst = self.edges()
        data = np.ones(src.size)
        return sp.csr_matrix((data, (src, dst)), shape=(self.num_nodes,) * 2)

    def undirected(self) -> sp.csr_matrix:
        a = self.adjacency()
        u = (a + a.T).tocsr()
        u.data[:] = 1.0
        return u

    @cached_property
    def csr_out(self) -> tuple[np.ndarray, np.ndarray]:
        return _to_csr(self.out_adj)

    @cached_property
    def csr_in(self) -> tuple[np.ndarray, np.ndarray]:
        return _to_csr(self.in_adj)

    @cached_property
    def csr_undirected(self) -> tuple[np.ndarray, np.ndarray]:
        u = self.undirected()
        return u.indptr.astype(np.int64), u.indices.astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted union of in- and out-neighbors of ``i``."""
        return np.union1d(self.in_adj[i], self.out_adj[i])

    def check_node(self, i: int) -> None:
        if not 0 <= i < self.num_nodes:
            raise IndexError(f"node {i} not in graph with {self.num_nodes} nodes")


def _to_csr(adj):
    counts = np.fromiter((a.size for a in adj), dtype=np.int64, count=len(adj))
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate(adj) if len(adj) else np.empty(0, np.int64)
    return indptr, indices.astype(np.int64)


def gather(indptr, indices, nodes):
    """Concatenated CSR rows of ``nodes`` plus the position of each row's owner."""
    starts, stops = indptr[nodes], indptr[nodes + 1]
    counts = stops - starts
    owner = np.repeat(np.arange(nodes.size), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, indices[np.repeat(starts, counts) + offsets]


def _split_sorted(keys, values, n):
    starts = np.searchsorted(keys, np.arange(n + 1))
    values = values.astype(np.int64)
    return tuple(values[starts[i]:starts[i + 1]] for i in range(n))


@dataclass(frozen=True)
class DegreeProfile:
    d_in: np.ndarray
    d_out: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.d_in + self.d_out


def degrees(g: DirectedGraph) -> DegreeProfile:
    d_in = np.fromiter((a.size for a in g.in_adj), dtype=np.int64, count=g.num_nodes)
    d_out = np.fromiter((a.size for a in g.out_adj), dtype=np.int64, count=g.num_nodes)
    return DegreeProfile(d_in=d_in, d_out=d_out)


@dataclass(frozen=True)
class KHopSubgraph:
    origin: int
    members: np.ndarray
    hop: np.ndarray

    def index_of(self) -> dict[int, int]:
        return {int(m): p for p, m in enumerate(self.members)}


def khop_subgraph(g: DirectedGraph, o: int, k: int, _mark=None) -> KHopSubgraph:
    """Nodes reachable from ``o`` within ``k`` hops, ignoring edge direction."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g.check_node(o)
    indptr, indices = g.csr_undirected
    mark = np.full(g.num_nodes, -1, dtype=np.int64) if _mark is None else _mark
    members, hop = _bfs(indptr, indices, int(o), k, mark)
    order = np.argsort(members)
    return KHopSubgraph(origin=int(o), members=members[order], hop=hop[order])


def _bfs(indptr, indices, o, radius, mark):
    # mark is a caller-owned scratch array of -1s, restored before returning
    mark[o] = 0
    layers = [np.array([o], dtype=np.int64)]
    for h in range(1, radius + 1):
        _, nxt = gather(indptr, indices, layers[-1])
        nxt = np.unique(nxt)
        nxt = nxt[mark[nxt] < 0]
        if nxt.size == 0:
            break
        mark[nxt] = h
        layers.append(nxt)
    members = np.concatenate(layers)
    hop = mark[members].copy()
    mark[members] = -1
    return members, hop


def hop_ball(g: DirectedGraph, o: int, radius: int, _mark=None) -> np.ndarray:
    """Sorted ids within ``radius`` undirected hops of ``o``."""
    indptr, indices = g.csr_undirected
    mark = np.full(g.num_nodes, -1, dtype=np.int64) if _mark is None else _mark
    members, _ = _bfs(indptr, indices, int(o), radius, mark)
    return np.sort(members)


# ---------------------------------------------------------------- ingestion

def load_edge_list(path) -> DirectedGraph:
    """Read a whitespace-separated ``src dst`` edge list.

    Lines starting with ``#`` and blank lines are skipped. Node ids need not be
    contiguous; they are remapped to ``0..N-1`` in increasing order and the
    original ids are kept in ``node_ids``.
    """
    path = Path(path)
    src, dst = [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
            try:
                src.append(int(parts[0]))
                dst.append(int(parts[1]))
            except ValueError:
                raise GraphFormatError(
                    f"{path}:{lineno}: non-integer node id in {line!r}") from None
    if not src:
        raise GraphFormatError(f"{path}: no edges")
    raw = np.array(src + dst, dtype=np.int64)
    ids, inverse = np.unique(raw, return_inverse=True)
    n_in = len(src)
    g = DirectedGraph.from_edges(ids.size, inverse[:n_in], inverse[n_in:], node_ids=ids)
    if g.num_edges == 0:
        raise GraphFormatError(f"{path}: graph has no edges after self-loop removal")
    logger.info("loaded %s: N=%d E=%d (dropped %d self-loops, %d duplicates)",
                path, g.num_nodes, g.num_edges, g.dropped_self_loops, g.dropped_duplicates)
    return g


def load_labels(path) -> np.ndarray:
    labels = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if labels.min() < 0:
        raise GraphFormatError(f"{path}: negative class id")
    return labels


def load_features(path) -> np.ndarray:
    """Dense content features.

    A ``.json`` sidecar descriptor ``{"file": ..., "rows": N, "cols": F}``
    points at raw little-endian float64 data; anything else is parsed as
    headerless delimited text (comma, tab or space).
    """
    path = Path(path)
    if path.suffix == ".json":
        import json
        desc = json.loads(path.read_text())
        raw = np.fromfile(path.parent / desc["file"], dtype="<f8")
        return raw.reshape(int(desc["rows"]), int(desc["cols"]))
    text = path.read_text()
    delimiter = "," if "," in text.split("\n", 1)[0] else None
    x = np.loadtxt(path, delimiter=delimiter, ndmin=2, dtype=np.float64)
    if (x < 0).any():
        raise GraphFormatError(f"{path}: content features must be non-negative")
    return x


# ---------------------------------------------------------------- node table

@dataclass(frozen=True)
class NodeTable:
    features: np.ndarray
    labels: np.ndarray
    train: np.ndarray = field(repr=False)
    val: np.ndarray = field(repr=False)
    test: np.ndarray = field(repr=False)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


def stratified_split(labels, ratios=(0.6, 0.2, 0.2), seed=0):
    """Per-class shuffled train/val/test masks.

    Every class needs at least three members. Negative labels mark unlabeled
    nodes and are left out of all masks.
    """
    labels = np.asarray(labels)
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or (ratios < 0).any() or not np.isclose(ratios.sum(), 1.0):
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    rng = np.random.default_rng(seed)
    masks = np.zeros((3, labels.size), dtype=bool)
    for c in np.unique(labels[labels >= 0]):
        idx = np.flatnonzero(labels == c)
        if idx.size < 3:
            raise ValueError(f"class {c} has {idx.size} members; need at least 3")
        idx = rng.permutation(idx)
        n_train = int(round(ratios[0] * idx.size))
        n_val = int(round(ratios[1] * idx.size))
        n_train = min(n_train, idx.size - 2) if ratios[1] and ratios[2] else n_train
        n_val = min(n_val, idx.size - n_train - (1 if ratios[2] else 0))
        masks[0, idx[:n_train]] = True
        masks[1, idx[n_train:n_train + n_val]] = True
        masks[2, idx[n_train + n_val:]] = True
    return masks[0], masks[1], masks[2]


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True)
class StatsReport:
    cat_zero: float
    cat_equal: float
    cat_diff: float
    conform: float
    n_conform: int
    n_judged: int

    def as_dict(self) -> dict:
        return {"cat_zero": self.cat_zero, "cat_equal": self.cat_equal,
                "cat_diff": self.cat_diff,
                "conform": None if np.isnan(self.conform) else self.conform}


def dataset_stats(g: DirectedGraph, labels) -> StatsReport:
    """Degree categories and the smaller-degree-direction homophily check.

    ``conform`` is the fraction of nodes with different non-zero in/out degrees
    whose smaller-degree side has a strictly larger same-class fraction among
    its 1-hop neighbors. Nodes whose two fractions tie are left out of the
    denominator. NaN when no node qualifies.
    """
    labels = np.asarray(labels)
    if labels.size != g.num_nodes:
        raise ValueError("labels must cover all nodes")
    deg = degrees(g)
    zero = (deg.d_in == 0) | (deg.d_out == 0)
    equal = ~zero & (deg.d_in == deg.d_out)
    diff = ~zero & ~equal
    n = max(g.num_nodes, 1)

    hits = judged = 0
    for i in np.flatnonzero(diff):
        f_in = np.mean(labels[g.in_adj[i]] == labels[i])
        f_out = np.mean(labels[g.out_adj[i]] == labels[i])
        if f_in == f_out:
            continue
        judged += 1
        small_is_in = deg.d_in[i] < deg.d_out[i]
        hits += int((f_in > f_out) == small_is_in)
    conform = hits / judged if judged else float("nan")
    return StatsReport(cat_zero=zero.sum() / n, cat_equal=equal.sum() / n,
                       cat_diff=diff.sum() / n, conform=conform,
                       n_conform=hits, n_judged=judged)
