"""Acceptance criteria, one test each, at their stated tolerances.

A pass/fail line per criterion is printed in the terminal summary.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.distance import pdist, squareform

from wgcn.fingerprint import (compute_fingerprints, ddrwr_direct, ddrwr_fixed_point, fingerprint,
                              reach_probability_1hop, transition_weights)
from wgcn.graph import DirectedGraph, degrees, khop_subgraph
from wgcn.harness import Dataset, RunConfig, run_pipeline
from wgcn.latent import (KIND_CODE, apply_ablation, classical_mds, default_latent_target,
                         isomap_embed, latent_neighbors, partition_neighbors, quadrant,
                         select_rho)
from wgcn.model import ModelConfig
from wgcn.structural import build_structural_features
from wgcn.synthetic import SyntheticSpec, generate_synthetic

from _graphs import ego_union, popular_ego, random_digraph
from _instances import gradient_errors, small_instance


@pytest.mark.criterion(1, "fixed-point and direct fingerprints agree within 1e-8 L1")
def test_solver_equivalence(record_property):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        g = random_digraph(rng, int(rng.integers(2, 51)), rng.uniform(0.1, 0.3))
        c = rng.uniform(0.1, 0.9)
        for o in range(g.num_nodes):
            P = transition_weights(g, khop_subgraph(g, o, 2))
            a = ddrwr_fixed_point(P, c).weights
            b = ddrwr_direct(P, c).weights
            worst = max(worst, float(np.abs(a - b).sum()))
    elapsed = time.perf_counter() - t0
    record_property("max_l1", f"{worst:.2e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert worst < 1e-8
    assert elapsed < 10


@pytest.mark.criterion(2, "1-hop reach under DDRWR >= RWR, strict when d_in != d_out")
def test_improvement_inequality(record_property):
    g, labels, centers = ego_union(np.random.default_rng(202), 100)
    same = set(np.flatnonzero(labels == 0).tolist())
    d = degrees(g)
    strict = ties = 0
    for o in centers:
        rwr = reach_probability_1hop(g, o, same, mode="rwr", b=0.3, epsilon=3, c=0.5)
        dd = reach_probability_1hop(g, o, same, mode="ddrwr", b=0.3, epsilon=3, c=0.5)
        assert dd >= rwr
        if d.d_in[o] != d.d_out[o]:
            assert dd > rwr
            strict += 1
        else:
            ties += 1
    record_property("strict", strict)
    record_property("equal_degree", ties)


@pytest.mark.criterion(3, "popular-node RWR reach equals 0.2 + 7*0.8/24; DDRWR exceeds it")
def test_popular_node_arithmetic(record_property):
    g, labels = popular_ego()
    same = set(np.flatnonzero(labels == 0).tolist())
    rwr = reach_probability_1hop(g, 0, same, mode="rwr", c=0.2)
    expected = 0.2 + 7 * 0.8 / 24
    assert abs(rwr - expected) < 1e-12
    lowest = np.inf
    for b in (0.05, 0.3, 0.7, 1.0):
        for eps in (1, 3, 5, 7, 9):
            dd = reach_probability_1hop(g, 0, same, mode="ddrwr", b=b, epsilon=eps, c=0.2)
            assert dd > rwr
            lowest = min(lowest, dd - rwr)
    record_property("rwr", f"{rwr:.6f}")
    record_property("min_gain", f"{lowest:.2e}")


def _dense_jaccard(fps, n):
    W = np.zeros((n, n))
    for f in fps:
        W[f.origin, f.support] = f.weights
    out = np.zeros((n, n))
    for i in range(n):
        lo = np.minimum(W[i], W).sum(axis=1)
        hi = np.maximum(W[i], W).sum(axis=1)
        out[i] = np.divide(lo, hi, out=np.zeros(n), where=hi > 0)
    return out


@pytest.mark.criterion(4, "sparse 2k-scoped S equals brute-force weighted Jaccard")
def test_jaccard_oracle(record_property):
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 61))
        g = random_digraph(rng, n, rng.uniform(0.02, 0.15))
        k = int(rng.integers(1, 3))
        fps = compute_fingerprints(g, k=k)
        S = build_structural_features(fps, g, k).toarray()
        worst = max(worst, float(np.abs(S - _dense_jaccard(fps, n)).max()))
    elapsed = time.perf_counter() - t0
    record_property("max_abs_diff", f"{worst:.2e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert worst < 1e-12
    assert elapsed < 5


@pytest.mark.criterion(5, "analytic gradients match central differences (rel < 1e-4)")
def test_gradient_check(record_property):
    t0 = time.perf_counter()
    inst = small_instance(seed=505, n=12, f=4, c=3, hidden=6)
    errors = gradient_errors(inst, h=1e-6)
    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    record_property("worst", f"{worst}={errors[worst]:.2e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert len(errors) == 8
    assert errors[worst] < 1e-4
    assert elapsed < 30


@pytest.mark.criterion(6, "classical MDS recovers 30 planar points (Procrustes < 1e-6)")
def test_mds_recovery(record_property):
    P = np.random.default_rng(606).uniform(-5, 5, size=(30, 2))
    X, _ = classical_mds(squareform(pdist(P)), 2)
    Pc = P - P.mean(axis=0)
    R, _ = orthogonal_procrustes(X, Pc)
    residual = float(np.linalg.norm(X @ R - Pc))
    record_property("residual", f"{residual:.2e}")
    assert residual < 1e-6


def _bucket_sets(part):
    return [set(zip(*(x.tolist() for x in part.buckets(r)))) for r in range(part.num_relations)]


@pytest.mark.criterion(7, "every neighbor maps to exactly one of 13 relations; ablations coarsen")
def test_partition_exhaustive(record_property):
    rng = np.random.default_rng(707)
    entries = 0
    for _ in range(20):
        g = random_digraph(rng, int(rng.integers(5, 60)), rng.uniform(0.03, 0.2))
        emb = isomap_embed(g)
        rho = select_rho(emb, default_latent_target(g), g)
        part = partition_neighbors(g, emb, rho)
        n = g.num_nodes
        triples = list(zip(part.center.tolist(), part.neighbor.tolist(), part.kind.tolist()))
        assert len(triples) == len(set(triples))
        assert np.all((part.relation >= 0) & (part.relation < 13))
        # expected triples from the graph and the latent pairs
        lat_i, lat_j = latent_neighbors(g, emb, rho)
        want = {(i, i, 0) for i in range(n)}
        src, dst = g.edges()
        want |= {(j, i, KIND_CODE["in"]) for i, j in zip(src.tolist(), dst.tolist())}
        want |= {(i, j, KIND_CODE["out"]) for i, j in zip(src.tolist(), dst.tolist())}
        want |= {(i, j, KIND_CODE["latent"]) for i, j in zip(lat_i.tolist(), lat_j.tolist())}
        assert set(triples) == want
        # relation is the kind block plus the quadrant of the offset
        quad = quadrant(emb.coords[part.neighbor] - emb.coords[part.center])
        base = np.array([0, 1, 5, 9])[part.kind]
        assert np.array_equal(part.relation, np.where(part.kind == 0, 0, base + quad))
        assert np.array_equal(np.bincount(part.center[part.relation == 0], minlength=n),
                              np.ones(n, dtype=int))
        d = degrees(g)
        per_node = d.d_in + d.d_out + np.bincount(lat_i, minlength=n) + 1
        assert np.array_equal(np.bincount(part.center, minlength=n), per_node)
        # ablations are unions or subsets of the full buckets
        full = _bucket_sets(part)
        geo = _bucket_sets(apply_ablation(part, "no_geometry"))
        assert geo[0] == full[0]
        for kind, block in ((1, range(1, 5)), (2, range(5, 9)), (3, range(9, 13))):
            assert geo[kind] == set().union(*(full[r] for r in block))
        lat = _bucket_sets(apply_ablation(part, "no_latent"))
        assert lat == full[:9]
        entries += len(triples)
    record_property("entries", entries)


@pytest.mark.criterion(8, "synthetic: full beats the untilted walk by >= 2 and structure-free by >= 5 points")
@pytest.mark.slow
def test_synthetic_separation(record_property):
    spec = SyntheticSpec(nodes_per_class=200, classes=2, p_same_small_dir=0.8,
                         p_same_large_dir=0.2, asymmetry=4, feature_signal=0.2, seed=0)
    g, table = generate_synthetic(spec)
    data = Dataset(graph=g, features=table.features, labels=table.labels, name="synthetic")
    # k=1 because the graph is disassortative; 200 epochs keep the run inside the budget
    base = RunConfig(k=1, b=0.3, c=0.5, epsilon=3, seeds=tuple(range(5)),
                     model=ModelConfig(epochs=200))
    t0 = time.perf_counter()
    acc = {}
    for variant in ("full", "rwr_weights", "no_structure"):
        rep = run_pipeline(RunConfig(**{**base.__dict__, "ablation": variant}), data)
        acc[variant] = rep.mean
    elapsed = time.perf_counter() - t0
    for v, a in acc.items():
        record_property(v, f"{100 * a:.2f}")
    record_property("seconds", f"{elapsed:.0f}")
    assert elapsed < 300
    assert acc["full"] - acc["rwr_weights"] >= 0.02
    assert acc["full"] - acc["no_structure"] >= 0.05


@pytest.mark.criterion(9, "Cora-ML mean accuracy within 3 points of 87.31 (optional)")
@pytest.mark.slow
def test_cora_ml(record_property):
    root = os.environ.get("WGCN_CORA_ML")
    if not root or not Path(root).is_dir():
        pytest.skip("set WGCN_CORA_ML to a directory with graph.txt, features.txt, labels.txt")
    root = Path(root)
    data = Dataset.from_files(root / "graph.txt", root / "features.txt", root / "labels.txt")
    rep = run_pipeline(RunConfig(k=2, seeds=tuple(range(10))), data)
    record_property("mean", f"{100 * rep.mean:.2f}")
    record_property("std", f"{100 * rep.std:.2f}")
    assert abs(100 * rep.mean - 87.31) <= 3.0


@pytest.mark.criterion(10, "fingerprint time per node at N=2k,4k within 1.3x of N=1k")
@pytest.mark.slow
def test_linear_scaling(record_property):
    sizes = (1000, 2000, 4000)
    times, kbar = [], []
    for n in sizes:
        g, _ = generate_synthetic(SyntheticSpec(nodes_per_class=n // 2, base_degree=2,
                                                asymmetry=2, seed=0))
        kbar.append(np.mean([khop_subgraph(g, o, 2).members.size for o in range(0, n, 40)]))
        best = np.inf
        for _ in range(2):
            t0 = time.perf_counter()
            compute_fingerprints(g, k=2)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    per_node = np.array(times) / np.array(sizes)
    ratio = per_node / per_node[0]
    exponent = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    record_property("Kbar", "/".join(f"{k:.0f}" for k in kbar))
    record_property("seconds", "/".join(f"{t:.2f}" for t in times))
    record_property("slope_ratio", "/".join(f"{r:.2f}" for r in ratio))
    record_property("loglog_exponent", f"{exponent:.2f}")
    assert max(kbar) / min(kbar) < 1.1
    assert np.all(ratio <= 1.3)


@pytest.mark.criterion(11, "trivial limits: c=1 gives e_o; b=0 and balanced degrees give RWR")
def test_trivial_limits(record_property):
    rng = np.random.default_rng(1111)
    checked = 0
    for _ in range(10):
        g = random_digraph(rng, int(rng.integers(3, 30)), rng.uniform(0.05, 0.3))
        for o in range(g.num_nodes):
            for method in ("direct", "iterate"):
                fp = fingerprint(g, o, k=2, c=1.0, method=method)
                unit = (fp.support == o).astype(float)
                assert np.array_equal(fp.weights, unit)
        a = compute_fingerprints(g, k=2, b=0.0, epsilon=3)
        b = compute_fingerprints(g, k=2, mode="rwr")
        assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a, b))
        checked += g.num_nodes
    # every node with d_in == d_out: a union of two directed ring orders
    n = 40
    perm = rng.permutation(n)
    src = np.concatenate([np.arange(n), perm])
    dst = np.concatenate([np.roll(np.arange(n), -1), np.roll(perm, -1)])
    g = DirectedGraph.from_edges(n, src, dst)
    d = degrees(g)
    assert np.array_equal(d.d_in, d.d_out)
    for eps in (1, 3, 9):
        a = compute_fingerprints(g, k=2, b=0.8, epsilon=eps)
        b = compute_fingerprints(g, k=2, mode="rwr")
        assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a, b))
    record_property("nodes", checked + n)
