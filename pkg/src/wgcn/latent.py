"""Latent geometry: Isomap embedding, latent neighbors and relation buckets.

Relation ids follow one fixed layout::

    0            self
    1..4         in-neighbor      x (upper-left, upper-right, lower-left, lower-right)
    5..8         out-neighbor     x quadrants
    9..12        latent neighbor  x quadrants

Quadrants come from ``z_j - z_i``: upper means second coordinate >= 0 and
right means first coordinate >= 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .graph import DirectedGraph

logger = logging.getLogger(__name__)

NUM_RELATIONS = 13
KINDS = ("self", "in", "out", "latent")
KIND_CODE = {name: code for code, name in enumerate(KINDS)}
_KIND_BASE = {"in": 1, "out": 5, "latent": 9}
UPPER_LEFT, UPPER_RIGHT, LOWER_LEFT, LOWER_RIGHT = range(4)


@dataclass(frozen=True, eq=False)
class LatentEmbedding:
    coords: np.ndarray
    component: np.ndarray

    @property
    def dims(self) -> int:
        return self.coords.shape[1]


# ---------------------------------------------------------------- embedding

def classical_mds(D, m=2):
    """Classical (Torgerson) MDS of a distance matrix.

    Returns ``(coords, eigenvalues)``; negative eigenvalues are clamped to 0
    so coordinates along them vanish.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n == 1:
        return np.zeros((1, m)), np.zeros(m)
    D2 = D ** 2
    # double centering without forming J explicitly
    B = -0.5 * (D2 - D2.mean(axis=0) - D2.mean(axis=1)[:, None] + D2.mean())
    B = 0.5 * (B + B.T)
    top = min(m, n)
    evals, evecs = scipy.linalg.eigh(B, subset_by_index=(n - top, n - 1))
    order = np.argsort(evals)[::-1]
    evals, evecs = np.clip(evals[order], 0.0, None), evecs[:, order]
    coords = np.zeros((n, m))
    coords[:, :top] = evecs * np.sqrt(evals)
    # fix the sign of each axis so results do not depend on the eigensolver
    for a in range(top):
        col = coords[:, a]
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0:
            coords[:, a] = -col
    vals = np.zeros(m)
    vals[:top] = evals
    return coords, vals


def hop_distances(g: DirectedGraph, nodes=None) -> np.ndarray:
    """All-pairs hop counts on the undirected view (``inf`` when unreachable)."""
    A = g.undirected()
    if nodes is not None:
        A = A[nodes][:, nodes]
    return shortest_path(A, method="D", unweighted=True, directed=False)


def isomap_embed(g: DirectedGraph, m=2, knn=None) -> LatentEmbedding:
    """Isomap with the graph itself as the neighborhood graph.

    Geodesic distances are undirected hop counts, embedded with classical MDS.
    ``knn`` is accepted for interface compatibility and ignored because the
    graph already fixes the neighborhoods.

    A disconnected graph is embedded one component at a time: the largest
    component is embedded normally and every other component is embedded on
    its own and shifted along the first axis beyond three times the main
    diameter. Coordinates are mean-centered at the end.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    n_comp, comp = connected_components(g.undirected(), directed=False)
    sizes = np.bincount(comp, minlength=n_comp)
    order = np.argsort(-sizes, kind="stable")
    relabel = np.empty(n_comp, dtype=np.int64)
    relabel[order] = np.arange(n_comp)
    comp = relabel[comp]

    coords = np.zeros((g.num_nodes, m))
    if n_comp > 1:
        logger.warning("graph has %d undirected components; embedding them separately", n_comp)
    offset = 0.0
    gap = None
    for c in range(n_comp):
        nodes = np.flatnonzero(comp == c)
        D = hop_distances(g, nodes)
        sub, _ = classical_mds(D, m)
        sub -= sub.mean(axis=0)
        if c == 0:
            diam = float(D.max()) if nodes.size > 1 else 1.0
            # strictly beyond three diameters
            gap = 3.0 * max(diam, 1.0) + 1.0
            coords[nodes] = sub
            offset = np.abs(sub[:, 0]).max() if nodes.size else 0.0
            continue
        extent = np.abs(sub[:, 0]).max()
        offset += gap + extent
        sub[:, 0] += offset
        offset += extent
        coords[nodes] = sub
    coords -= coords.mean(axis=0)
    return LatentEmbedding(coords=coords, component=comp)


# ---------------------------------------------------------------- latent neighbors

def _count_latent(trees, radius, adjacent_dist):
    # unordered pairs strictly closer than radius, same component, not adjacent
    r = np.nextafter(radius, 0.0)
    total = 0
    for tree in trees:
        total += (tree.count_neighbors(tree, r) - tree.n) // 2
    total -= int(np.count_nonzero(adjacent_dist < radius))
    return total


def select_rho(emb: LatentEmbedding, target_avg: float, g: DirectedGraph | None = None,
               tol=0.1, max_iter=200) -> float:
    """Distance threshold giving about ``target_avg`` latent neighbors per node.

    Latent neighbors are pairs in the same component, not adjacent in ``g``,
    at distance strictly below the threshold. The threshold is found by
    bisection until the mean count is within ``tol`` (relative) of the
    target. If the target cannot be met exactly the closest achievable
    threshold is returned and a warning is logged.
    """
    if target_avg < 1:
        raise ValueError("target_avg must be >= 1")
    n = emb.coords.shape[0]
    trees = [cKDTree(emb.coords[emb.component == c]) for c in np.unique(emb.component)]
    if g is not None:
        src, dst = g.edges()
        lo_, hi_ = np.minimum(src, dst), np.maximum(src, dst)
        pairs = np.unique(lo_ * n + hi_)
        a, b = pairs // n, pairs % n
        same = emb.component[a] == emb.component[b]
        adjacent_dist = np.linalg.norm(emb.coords[a[same]] - emb.coords[b[same]], axis=1)
    else:
        adjacent_dist = np.empty(0)

    def mean_count(radius):
        return 2.0 * _count_latent(trees, radius, adjacent_dist) / n

    max_dist = max((_diameter(t.data) for t in trees), default=0.0)
    # strict inequality: the saturating threshold sits just above the diameter
    hi = float(np.nextafter(max_dist, np.inf))
    full = mean_count(hi)
    if full < target_avg * (1 - tol):
        logger.warning("target of %.2f latent neighbors unreachable (max %.2f); "
                       "using the largest meaningful threshold", target_avg, full)
        return float(hi)
    lo = 0.0
    best, best_err = hi, abs(full - target_avg)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        got = mean_count(mid)
        err = abs(got - target_avg)
        if err < best_err or (err == best_err and mid < best):
            best, best_err = mid, err
        if err <= tol * target_avg:
            return float(mid)
        if got < target_avg:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    if best_err > tol * target_avg:
        logger.warning("no threshold within %.0f%% of %.2f latent neighbors; off by %.2f",
                       100 * tol, target_avg, best_err)
    return float(best)


def _diameter(points):
    if len(points) < 2:
        return 0.0
    if len(points) > 3000 and points.shape[1] > 1:
        from scipy.spatial import ConvexHull
        points = points[ConvexHull(points).vertices]
    return float(pdist(points).max())


def latent_neighbors(g: DirectedGraph, emb: LatentEmbedding, rho: float):
    """``(i, j)`` arrays of ordered latent pairs (both directions present)."""
    n = g.num_nodes
    pairs = []
    for c in np.unique(emb.component):
        nodes = np.flatnonzero(emb.component == c)
        if nodes.size < 2:
            continue
        tree = cKDTree(emb.coords[nodes])
        p = tree.query_pairs(np.nextafter(rho, 0.0), output_type="ndarray")
        if p.size:
            pairs.append(nodes[p])
    if not pairs:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    p = np.concatenate(pairs)
    a, b = np.minimum(p[:, 0], p[:, 1]), np.maximum(p[:, 0], p[:, 1])
    dist = np.linalg.norm(emb.coords[a] - emb.coords[b], axis=1)
    p_keys = a * n + b
    keep = dist < rho
    src, dst = g.edges()
    adj_keys = np.minimum(src, dst) * n + np.maximum(src, dst)
    keep &= ~np.isin(p_keys, adj_keys)
    a, b = a[keep], b[keep]
    i = np.concatenate([a, b])
    j = np.concatenate([b, a])
    order = np.lexsort((j, i))
    return i[order], j[order]


# ---------------------------------------------------------------- relations

def quadrant(delta) -> np.ndarray:
    """Quadrant index of offset vectors; ties on an axis go upper/right."""
    delta = np.atleast_2d(np.asarray(delta, dtype=np.float64))
    if delta.shape[1] != 2:
        raise ValueError("quadrant relations are defined for 2-D embeddings only")
    upper = delta[:, 1] >= 0
    right = delta[:, 0] >= 0
    return np.where(upper, np.where(right, UPPER_RIGHT, UPPER_LEFT),
                    np.where(right, LOWER_RIGHT, LOWER_LEFT))


def relation_of(z_i, z_j, edge_kind: str) -> int:
    """Relation id of neighbor ``j`` as seen from node ``i``."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if edge_kind == "self":
        if not np.array_equal(z_i, z_j):
            raise ValueError("kind 'self' requires the node itself")
        return 0
    if edge_kind not in _KIND_BASE:
        raise ValueError(f"unknown edge kind {edge_kind!r}")
    return _KIND_BASE[edge_kind] + int(quadrant(z_j - z_i)[0])


@dataclass(frozen=True, eq=False)
class RelationPartition:
    """Flat list of ``(center, neighbor, kind, relation)`` entries.

    Entries are sorted by relation, then center, then neighbor. A mutual
    graph neighbor appears twice: once as an in- and once as an
    out-neighbor.
    """

    num_nodes: int
    center: np.ndarray
    neighbor: np.ndarray
    kind: np.ndarray
    relation: np.ndarray
    num_relations: int = NUM_RELATIONS

    def entries_of(self, i: int):
        sel = self.center == i
        return list(zip(self.neighbor[sel].tolist(),
                        [KINDS[k] for k in self.kind[sel]],
                        self.relation[sel].tolist()))

    def counts(self) -> np.ndarray:
        """Entries per (node, relation) as an ``N x num_relations`` array."""
        out = np.zeros((self.num_nodes, self.num_relations), dtype=np.int64)
        np.add.at(out, (self.center, self.relation), 1)
        return out

    def buckets(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        sel = self.relation == r
        return self.center[sel], self.neighbor[sel]


def _sorted_partition(n, center, neighbor, kind, relation, num_relations):
    order = np.lexsort((neighbor, center, relation))
    return RelationPartition(num_nodes=n, center=center[order], neighbor=neighbor[order],
                             kind=kind[order], relation=relation[order],
                             num_relations=num_relations)


def partition_neighbors(g: DirectedGraph, emb: LatentEmbedding, rho: float) -> RelationPartition:
    """Assign every in-, out-, latent neighbor and the node itself a relation."""
    if emb.dims != 2:
        raise ValueError("relation partition needs a 2-D embedding")
    n = g.num_nodes
    z = emb.coords
    src, dst = g.edges()
    lat_i, lat_j = latent_neighbors(g, emb, rho)
    nodes = np.arange(n)
    # for center i: in-neighbors are sources of edges into i, out-neighbors are targets
    center = np.concatenate([nodes, dst, src, lat_i])
    neighbor = np.concatenate([nodes, src, dst, lat_j])
    kind = np.concatenate([np.full(n, 0), np.full(src.size, 1), np.full(src.size, 2),
                           np.full(lat_i.size, 3)]).astype(np.int64)
    base = np.array([0, 1, 5, 9])[kind]
    quad = quadrant(z[neighbor] - z[center]) if center.size else np.empty(0, np.int64)
    relation = np.where(kind == 0, 0, base + quad).astype(np.int64)
    return _sorted_partition(n, center, neighbor, kind, relation, NUM_RELATIONS)


def apply_ablation(part: RelationPartition, ablation: str) -> RelationPartition:
    """Coarsen or prune a full partition for the geometry/latent ablations.

    ``no_geometry`` merges the four quadrants of each kind (relations become
    self, in, out, latent). ``no_latent`` drops latent entries and keeps
    relation ids 0..8. ``full`` and ``rwr_weights`` leave it unchanged.
    """
    if ablation in ("full", "rwr_weights", "no_structure"):
        return part
    if ablation == "no_geometry":
        return _sorted_partition(part.num_nodes, part.center, part.neighbor, part.kind,
                                 part.kind.copy(), len(KINDS))
    if ablation == "no_latent":
        keep = part.kind != KIND_CODE["latent"]
        return _sorted_partition(part.num_nodes, part.center[keep], part.neighbor[keep],
                                 part.kind[keep], part.relation[keep], 9)
    raise ValueError(f"unknown ablation {ablation!r}")


def default_latent_target(g: DirectedGraph) -> float:
    """Mean undirected degree, the default number of latent neighbors per node."""
    u = g.undirected()
    return max(1.0, u.nnz / max(g.num_nodes, 1))
