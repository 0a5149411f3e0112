"""Small graph builders shared by the tests."""

import numpy as np

from wgcn.graph import DirectedGraph


def random_digraph(rng, n, p):
    A = rng.random((n, n)) < p
    np.fill_diagonal(A, False)
    src, dst = np.nonzero(A)
    return DirectedGraph.from_edges(n, src, dst)


def from_edges(n, edges):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return DirectedGraph.from_edges(n, edges[:, 0], edges[:, 1])


def popular_ego():
    """Node 0 with 4 in-neighbors (1..4) and 20 out-neighbors (5..24).

    Three of the in-neighbors and four of the out-neighbors share node 0's
    class. Returns ``(graph, labels)``.
    """
    edges = [(i, 0) for i in range(1, 5)] + [(0, j) for j in range(5, 25)]
    labels = np.ones(25, dtype=np.int64)
    labels[[0, 1, 2, 3, 5, 6, 7, 8]] = 0
    return from_edges(25, edges), labels


def ego_union(rng, count, max_side=12):
    """Disjoint ego networks whose smaller-degree side is strictly more
    same-class than the larger side.

    Returns ``(graph, labels, centers)``. Some centers have equal in- and
    out-degree.
    """
    edges, labels, centers = [], [], []
    nxt = 0
    for t in range(count):
        o = nxt
        nxt += 1
        centers.append(o)
        labels.append(0)
        if t % 10 == 0:
            d_in = d_out = int(rng.integers(1, max_side))
        else:
            d_in, d_out = (int(x) for x in rng.choice(np.arange(1, max_side + 1), 2,
                                                      replace=False))
        small, large = sorted((d_in, d_out))
        while True:
            s_same = int(rng.integers(0, small + 1))
            l_same = int(rng.integers(0, large + 1))
            if d_in == d_out or s_same / small > l_same / large:
                break
        if d_in <= d_out:
            in_same, out_same = s_same, l_same
        else:
            in_same, out_same = l_same, s_same
        for side, deg, same in (("in", d_in, in_same), ("out", d_out, out_same)):
            for q in range(deg):
                v = nxt
                nxt += 1
                labels.append(0 if q < same else 1)
                edges.append((v, o) if side == "in" else (o, v))
    return from_edges(nxt, edges), np.array(labels), np.array(centers)
