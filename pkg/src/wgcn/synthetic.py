"""Planted-class directed graphs with degree-asymmetric homophily.

Half of each class is "popular" (many in-edges, few out-edges), the other
half "non-popular" (the reverse). Every edge runs between the two roles:

* popular -> non-popular edges sit on the smaller-degree side of both
  endpoints and join the same class with probability ``p_same_small_dir``;
* non-popular -> popular edges sit on the larger-degree side of both and
  join the same class with probability ``p_same_large_dir``.

Stubs are matched so that every node gets exactly ``base_degree`` edges on
its small side and ``asymmetry * base_degree`` on its large side. Repeated
pairs are swapped apart, so multi-edges only survive when a block is too
dense to avoid them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph, NodeTable, stratified_split


@dataclass(frozen=True)
class SyntheticSpec:
    nodes_per_class: int = 200
    classes: int = 2
    p_same_small_dir: float = 0.8
    p_same_large_dir: float = 0.2
    asymmetry: int = 4
    base_degree: int = 3
    num_features: int = 50
    words_per_node: int = 10
    feature_signal: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("p_same_small_dir", "p_same_large_dir", "feature_signal"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.asymmetry < 1 or self.base_degree < 1:
            raise ValueError("asymmetry and base_degree must be >= 1")
        if self.classes < 1 or self.nodes_per_class < 6:
            raise ValueError("need at least one class of at least 6 nodes")
        if self.num_features < self.classes:
            raise ValueError("need at least one feature per class")


def _match(rng, src_nodes, tgt_nodes, labels, per_src, per_tgt, p_same, classes):
    """Pair ``per_src`` out-stubs of each source with ``per_tgt`` in-stubs of targets.

    Stub counts per class block are fixed up front so both sides balance
    exactly; stubs are then shuffled within each block.
    """
    src_stubs = {c: rng.permutation(np.repeat(src_nodes[labels[src_nodes] == c], per_src))
                 for c in range(classes)}
    tgt_stubs = {c: rng.permutation(np.repeat(tgt_nodes[labels[tgt_nodes] == c], per_tgt))
                 for c in range(classes)}
    src_pos = {c: 0 for c in range(classes)}
    tgt_pos = {c: 0 for c in range(classes)}
    out_s, out_t = [], []
    for c in range(classes):
        total = src_stubs[c].size
        same = int(round(p_same * total)) if classes > 1 else total
        others = [o for o in range(classes) if o != c]
        split = np.full(len(others), (total - same) // max(len(others), 1))
        split[: (total - same) - split.sum()] += 1
        for tc, cnt in zip([c] + others, [same] + split.tolist()):
            s = src_stubs[c][src_pos[c]:src_pos[c] + cnt]
            t = tgt_stubs[tc][tgt_pos[tc]:tgt_pos[tc] + cnt]
            src_pos[c] += cnt
            tgt_pos[tc] += cnt
            # odd class sizes leave the two sides off by a few stubs
            m = min(s.size, t.size)
            s, t = s[:m], _repair(rng, s[:m], t[:m].copy())
            out_s.append(s)
            out_t.append(t)
    return np.concatenate(out_s), np.concatenate(out_t)


def _repair(rng, s, t, passes=50):
    """Swap targets inside a block until no (source, target) pair repeats.

    Swaps keep every node's stub count, so degrees stay exact. Gives up after
    ``passes`` rounds; leftover repeats collapse when the graph is built.
    """
    if s.size < 2:
        return t
    for _ in range(passes):
        keys = s * (t.max() + 1) + t
        _, first = np.unique(keys, return_index=True)
        dup = np.setdiff1d(np.arange(s.size), first)
        if dup.size == 0:
            break
        for i in dup:
            j = int(rng.integers(s.size))
            # accept the swap only if neither new pair already exists
            a = (s == s[i]) & (t == t[j])
            b = (s == s[j]) & (t == t[i])
            if not a.any() and not b.any():
                t[i], t[j] = t[j], t[i]
    return t


def generate_synthetic(spec: SyntheticSpec, ratios=(0.6, 0.2, 0.2)):
    """Return ``(graph, node_table)`` for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    C, n_c = spec.classes, spec.nodes_per_class
    n = C * n_c
    labels = np.repeat(np.arange(C), n_c)
    popular = np.zeros(n, dtype=bool)
    for c in range(C):
        idx = rng.permutation(np.flatnonzero(labels == c))
        popular[idx[: n_c // 2]] = True
    pop, non = np.flatnonzero(popular), np.flatnonzero(~popular)
    k_small = spec.base_degree
    k_large = spec.base_degree * spec.asymmetry

    s1, t1 = _match(rng, pop, non, labels, k_small, k_small, spec.p_same_small_dir, C)
    s2, t2 = _match(rng, non, pop, labels, k_large, k_large, spec.p_same_large_dir, C)
    g = DirectedGraph.from_edges(n, np.concatenate([s1, s2]), np.concatenate([t1, t2]))

    features = _bag_of_words(rng, labels, spec)
    train, val, test = stratified_split(labels, ratios, seed=spec.seed)
    table = NodeTable(features=features, labels=labels, train=train, val=val, test=test)
    return g, table


def _bag_of_words(rng, labels, spec: SyntheticSpec) -> np.ndarray:
    """Binary word counts: each word comes from the node's class vocabulary with
    probability ``feature_signal`` and from the whole vocabulary otherwise."""
    F, C = spec.num_features, spec.classes
    vocab = np.array_split(np.arange(F), C)
    X = np.zeros((labels.size, F))
    for i, y in enumerate(labels):
        from_class = rng.random(spec.words_per_node) < spec.feature_signal
        words = np.where(from_class, rng.choice(vocab[y], spec.words_per_node),
                         rng.integers(0, F, spec.words_per_node))
        X[i, words] = 1.0
    return X
