"""Pairwise structural interactions between node fingerprints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fingerprint import Fingerprint
from .graph import DirectedGraph, gather, hop_ball


@dataclass(frozen=True, eq=False)
class StructuralFeatureMatrix:
    """Symmetric sparse matrix of weighted-Jaccard scores; row i is node i's feature."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, i: int) -> dict[int, float]:
        m = self.matrix
        sl = slice(m.indptr[i], m.indptr[i + 1])
        return dict(zip(m.indices[sl].tolist(), m.data[sl].tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def weighted_jaccard(w_i: Fingerprint, w_j: Fingerprint) -> float:
    """Sum of element-wise minima over sum of maxima on the union of supports."""
    a, b = w_i.as_dict(), w_j.as_dict()
    keys = a.keys() | b.keys()
    if not keys:
        raise ValueError("weighted Jaccard of two empty fingerprints is undefined")
    lo = sum(min(a.get(g, 0.0), b.get(g, 0.0)) for g in keys)
    hi = sum(max(a.get(g, 0.0), b.get(g, 0.0)) for g in keys)
    if hi == 0:
        raise ValueError("weighted Jaccard of two all-zero fingerprints is undefined")
    return lo / hi


def fingerprint_matrix(fingerprints, n: int) -> sp.csr_matrix:
    """Stack fingerprints as rows of an ``n x n`` sparse matrix."""
    rows = np.concatenate([np.full(f.support.size, f.origin) for f in fingerprints])
    cols = np.concatenate([f.support for f in fingerprints])
    vals = np.concatenate([f.weights for f in fingerprints])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    return W


def build_structural_features(fingerprints, g: DirectedGraph | None = None,
                              k: int | None = None) -> StructuralFeatureMatrix:
    """Weighted Jaccard for every pair of nodes within ``2k`` undirected hops.

    Fingerprints live on k-hop subgraphs, so pairs further apart than ``2k``
    share no support and score exactly zero; skipping them is lossless.
    Without a graph, candidate pairs come from overlapping supports instead,
    which selects the same nonzero entries.
    """
    n = g.num_nodes if g is not None else 1 + max(
        max(int(f.origin), int(f.support.max(initial=0))) for f in fingerprints)
    if g is not None and len(fingerprints) != n:
        raise ValueError(f"expected {n} fingerprints, got {len(fingerprints)}")
    W = fingerprint_matrix(fingerprints, n)
    if g is not None:
        if k is None:
            raise ValueError("k is required together with the graph")
        mark = np.full(n, -1, dtype=np.int64)

        def candidates(i):
            return hop_ball(g, i, 2 * k, _mark=mark)
    else:
        B = W.copy()
        B.data[:] = 1.0
        overlap = (B @ B.T).tocsr()

        def candidates(i):
            return overlap.indices[overlap.indptr[i]:overlap.indptr[i + 1]]

    mass = np.asarray(W.sum(axis=1)).ravel()
    dense_row = np.zeros(n)
    out_r, out_c, out_v = [], [], []
    for i in range(n):
        cand = np.sort(candidates(i))
        cand = cand[cand >= i]
        sl = slice(W.indptr[i], W.indptr[i + 1])
        dense_row[W.indices[sl]] = W.data[sl]
        owner, cols = gather(W.indptr, W.indices, cand)
        _, vals = gather(W.indptr, W.data, cand)
        other = dense_row[cols]
        lo = np.bincount(owner, weights=np.minimum(vals, other), minlength=cand.size)
        # sum(max) = sum(a) + sum over b's support of the excess of b over a
        hi = mass[i] + np.bincount(owner, weights=np.maximum(vals - other, 0.0),
                                   minlength=cand.size)
        dense_row[W.indices[sl]] = 0.0
        s = np.divide(lo, hi, out=np.zeros_like(lo), where=hi > 0)
        s[(cand == i) & (mass[i] > 0)] = 1.0
        keep = s > 0
        out_r.append(np.full(keep.sum(), i))
        out_c.append(cand[keep])
        out_v.append(s[keep])

    r = np.concatenate(out_r)
    c = np.concatenate(out_c)
    v = np.concatenate(out_v)
    off = r != c
    S = sp.csr_matrix((np.concatenate([v, v[off]]),
                       (np.concatenate([r, c[off]]), np.concatenate([c, r[off]]))),
                      shape=(n, n))
    S.sort_indices()
    return StructuralFeatureMatrix(matrix=S)
