"""Direction- and degree-aware random walk with restart (DDRWR).

A node's fingerprint is the restart-walk proximity vector over its k-hop
subgraph. The walk moves along edges in either direction; the step weight
depends on whether the neighbor was reached through an in- or an out-edge
and on how lopsided the current node's in/out degrees are::

    raw(i -> j) = 1 + b * M_ij * ((d_in_i - d_out_i) / (d_in_i + d_out_i)) ** eps

with ``M_ij = -1`` for in-neighbors and ``+1`` for out-neighbors. A neighbor
that is both gets the sum of the two contributions. Each column of the
transition matrix is then normalized to sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import DirectedGraph, KHopSubgraph, degrees, gather, khop_subgraph

VALID_EPSILON = (0, 1, 3, 5, 7, 9)
DIRECT_MAX_MEMBERS = 2000


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Column-stochastic step matrix restricted to one k-hop subgraph.

    ``entries[j, i]`` is the probability of stepping from member ``i`` to
    member ``j`` (both as positions in ``subgraph.members``).
    """

    subgraph: KHopSubgraph
    entries: sp.csc_matrix
    b: float
    epsilon: int
    absorbing: np.ndarray

    @property
    def origin_pos(self) -> int:
        return int(np.searchsorted(self.subgraph.members, self.subgraph.origin))

    def dense(self) -> np.ndarray:
        return self.entries.toarray()


@dataclass(frozen=True, eq=False)
class Fingerprint:
    origin: int
    support: np.ndarray
    weights: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support.tolist(), self.weights.tolist()))


def direction_tilt(d_in, d_out, epsilon: int) -> np.ndarray:
    """``((d_in - d_out) / (d_in + d_out)) ** epsilon``, zero when epsilon is 0.

    An exponent of 0 means in- and out-neighbors weigh the same, so the tilt
    vanishes instead of becoming 1.
    """
    d_in = np.asarray(d_in, dtype=np.float64)
    d_out = np.asarray(d_out, dtype=np.float64)
    tot = d_in + d_out
    ratio = np.divide(d_in - d_out, tot, out=np.zeros_like(tot), where=tot > 0)
    if epsilon == 0:
        return np.zeros_like(ratio)
    return ratio ** epsilon


def _check_params(b, epsilon, mode):
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    if epsilon not in VALID_EPSILON:
        raise ValueError(f"epsilon must be one of {VALID_EPSILON}, got {epsilon}")
    if mode not in ("ddrwr", "rwr"):
        raise ValueError(f"mode must be 'ddrwr' or 'rwr', got {mode!r}")


def transition_weights(g: DirectedGraph, sub: KHopSubgraph, b=0.3, epsilon=3,
                       mode="ddrwr", *, _tilt=None, _local=None) -> TransitionMatrix:
    """Build the normalized DDRWR step matrix on ``sub``.

    ``mode='rwr'`` gives every edge the same weight (equivalent to ``b=0``).
    Degrees in the tilt are whole-graph degrees. A member with no neighbor in
    the subgraph (only possible for an isolated origin) becomes absorbing.
    """
    _check_params(b, epsilon, mode)
    members = sub.members
    n = members.size
    if _tilt is None:
        deg = degrees(g)
        _tilt = direction_tilt(deg.d_in, deg.d_out, epsilon)
    if mode == "rwr":
        b = 0.0

    # global id -> local position; scratch may be shared across calls
    local = np.full(g.num_nodes, -1, dtype=np.int64) if _local is None else _local
    local[members] = np.arange(n)
    rows, cols, vals = [], [], []
    for (indptr, indices), sign in ((g.csr_out, 1.0), (g.csr_in, -1.0)):
        owner, nbr = gather(indptr, indices, members)
        pos = local[nbr]
        keep = pos >= 0
        owner, pos = owner[keep], pos[keep]
        rows.append(pos)
        cols.append(owner)
        vals.append(1.0 + sign * b * _tilt[members[owner]])
    local[members] = -1

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()

    col_sum = np.asarray(mat.sum(axis=0)).ravel()
    has_nbr = np.diff(mat.indptr) > 0
    # b=1 with a one-sided node zeroes every raw weight; the b->1 limit is uniform
    zero_mass = has_nbr & (col_sum <= 0)
    for i in np.flatnonzero(zero_mass):
        mat.data[mat.indptr[i]:mat.indptr[i + 1]] = 1.0
    if zero_mass.any():
        col_sum = np.asarray(mat.sum(axis=0)).ravel()
    absorbing = ~has_nbr
    scale = np.divide(1.0, col_sum, out=np.zeros(n), where=col_sum > 0)
    mat = mat @ sp.diags(scale)
    if absorbing.any():
        idx = np.flatnonzero(absorbing)
        mat = (mat + sp.csc_matrix((np.ones(idx.size), (idx, idx)), shape=(n, n))).tocsc()
    mat = sp.csc_matrix(mat)
    mat.sort_indices()
    return TransitionMatrix(subgraph=sub, entries=mat, b=float(b),
                            epsilon=int(epsilon), absorbing=absorbing)


def _normalize(P: TransitionMatrix, w) -> Fingerprint:
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ArithmeticError("fingerprint has no mass")
    return Fingerprint(origin=P.subgraph.origin, support=P.subgraph.members.copy(),
                       weights=w / total)


def ddrwr_fixed_point(P: TransitionMatrix, c=0.5, tol=1e-10, max_iter=10_000) -> Fingerprint:
    """Iterate ``w <- (1-c) P w + c e_o`` from ``e_o`` until the L1 step is below tol."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"restart probability must lie in [0, 1], got {c}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    o = P.origin_pos
    M = P.entries if P.entries.shape[0] > 64 else P.dense()
    w = np.zeros(P.entries.shape[0])
    w[o] = 1.0
    residual = np.inf
    for _ in range(max_iter):
        nxt = (1.0 - c) * (M @ w)
        nxt[o] += c
        residual = np.abs(nxt - w).sum()
        w = nxt
        if residual < tol:
            return _normalize(P, w)
    raise ConvergenceError(f"no convergence in {max_iter} iterations", residual)


def ddrwr_direct(P: TransitionMatrix, c=0.5) -> Fingerprint:
    """Solve ``(I - (1-c) P) w = c e_o`` directly."""
    if not 0.0 < c <= 1.0:
        raise ValueError(f"direct solve needs c in (0, 1], got {c}")
    n = P.entries.shape[0]
    o = P.origin_pos
    rhs = np.zeros(n)
    rhs[o] = c
    if n <= DIRECT_MAX_MEMBERS:
        A = np.eye(n) - (1.0 - c) * P.dense()
        try:
            w = scipy.linalg.solve(A, rhs, check_finite=False)
        except scipy.linalg.LinAlgError as err:
            raise ArithmeticError(f"singular restart system: {err}") from err
    else:
        import scipy.sparse.linalg as spla
        A = sp.identity(n, format="csc") - (1.0 - c) * P.entries
        w = spla.spsolve(A, rhs)
    return _normalize(P, w)


def fingerprint(g: DirectedGraph, o: int, k=2, b=0.3, epsilon=3, c=0.5, mode="ddrwr",
                method="auto", **solver_kw) -> Fingerprint:
    sub = khop_subgraph(g, o, k)
    P = transition_weights(g, sub, b, epsilon, mode)
    return _solve(P, c, method, **solver_kw)


def _solve(P, c, method, **solver_kw):
    if method == "auto":
        method = "direct" if P.entries.shape[0] <= DIRECT_MAX_MEMBERS and c > 0 else "iterate"
    if method == "direct":
        return ddrwr_direct(P, c)
    if method == "iterate":
        return ddrwr_fixed_point(P, c, **solver_kw)
    raise ValueError(f"unknown method {method!r}")


def compute_fingerprints(g: DirectedGraph, k=2, b=0.3, epsilon=3, c=0.5, mode="ddrwr",
                         method="auto", nodes=None) -> list[Fingerprint]:
    """Fingerprint every node (or ``nodes``) of ``g``.

    Work per node touches only its k-hop subgraph, so the total cost is
    linear in the number of nodes for a fixed average subgraph size.
    """
    _check_params(b, epsilon, mode)
    deg = degrees(g)
    tilt = direction_tilt(deg.d_in, deg.d_out, epsilon)
    mark = np.full(g.num_nodes, -1, dtype=np.int64)
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    nodes = range(g.num_nodes) if nodes is None else nodes
    out = []
    for o in nodes:
        sub = khop_subgraph(g, o, k, _mark=mark)
        P = transition_weights(g, sub, b, epsilon, mode, _tilt=tilt, _local=local)
        out.append(_solve(P, c, method))
    return out


def reach_probability_1hop(g: DirectedGraph, origin: int, same_class_set, mode="ddrwr",
                           b=0.3, epsilon=3, c=0.2) -> float:
    """Exact probability that the first step lands in ``same_class_set``.

    The restart mass ``c`` is counted as a hit, as in the one-step reach
    formula for restart walks.
    """
    g.check_node(origin)
    if g.in_adj[origin].size + g.out_adj[origin].size == 0:
        raise ValueError(f"node {origin} has no neighbors")
    sub = khop_subgraph(g, origin, 1)
    P = transition_weights(g, sub, b, epsilon, mode)
    col = P.entries[:, P.origin_pos].toarray().ravel()
    targets = np.isin(sub.members, np.fromiter(same_class_set, dtype=np.int64))
    targets[P.origin_pos] = False
    return float(c + (1.0 - c) * col[targets].sum())
