import logging

import numpy as np
import pytest
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.distance import pdist, squareform

from wgcn.graph import DirectedGraph
from wgcn.latent import (KIND_CODE, LatentEmbedding, apply_ablation, classical_mds,
                         default_latent_target, isomap_embed, latent_neighbors,
                         partition_neighbors, relation_of, select_rho)

from _graphs import from_edges, random_digraph


def test_path_mds_is_evenly_spaced():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)])
    x = isomap_embed(g, m=1).coords[:, 0]
    gaps = np.diff(x)
    assert np.all(gaps > 0) or np.all(gaps < 0)
    assert np.allclose(np.abs(gaps), 1.0, atol=1e-9)
    assert abs(x.mean()) < 1e-12


def test_single_edge():
    g = from_edges(2, [(0, 1)])
    z = isomap_embed(g, m=2).coords
    assert np.allclose(z[:, 1], 0.0)
    assert np.linalg.norm(z[0] - z[1]) == pytest.approx(1.0, abs=1e-12)


def test_mds_recovers_points():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(25, 2))
    X, evals = classical_mds(squareform(pdist(P)), 2)
    R, _ = orthogonal_procrustes(X, P - P.mean(axis=0))
    assert np.linalg.norm(X @ R - (P - P.mean(axis=0))) < 1e-6
    assert np.all(evals >= 0)


def test_mds_clamps_negative_eigenvalues():
    # distances of a 4-cycle are not Euclidean in 3 dims; embedding must stay finite
    D = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], float) ** 0.5
    D[0, 2] = D[2, 0] = 3.0
    X, evals = classical_mds(D, 4)
    assert np.all(np.isfinite(X)) and np.all(evals >= 0)


def test_disconnected_components_are_separated(caplog):
    g = from_edges(7, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6)])
    with caplog.at_level(logging.WARNING):
        emb = isomap_embed(g)
    assert "components" in caplog.text
    assert emb.component.tolist() == [0, 0, 0, 0, 1, 1, 1]
    main = emb.coords[:4]
    other = emb.coords[4:]
    gap = np.min(np.linalg.norm(main[:, None] - other[None], axis=-1))
    assert gap > 3 * 3
    assert np.allclose(emb.coords.mean(axis=0), 0.0)
    # latent pairs never cross components
    i, j = latent_neighbors(g, emb, 1e6)
    assert np.all(emb.component[i] == emb.component[j])


def test_relation_of_examples():
    assert relation_of([0, 0], [1, 1], "in") == 2
    assert relation_of([0, 0], [0, -1], "latent") == 12
    assert relation_of([3, 4], [3, 4], "self") == 0
    assert relation_of([0, 0], [-1, 0], "out") == 5
    with pytest.raises(ValueError):
        relation_of([0, 0], [1, 0], "self")


def _emb(coords):
    coords = np.asarray(coords, dtype=float)
    return LatentEmbedding(coords=coords, component=np.zeros(len(coords), dtype=np.int64))


def test_select_rho_equidistant():
    # a regular tetrahedron: every pair sits at distance 1
    pts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float) / np.sqrt(8)
    emb = _emb(pts)
    d = pdist(pts)
    assert np.allclose(d, 1.0)
    rho = select_rho(emb, 3)
    assert rho > d.max() and rho < d.max() + 1e-9


def test_select_rho_saturation(caplog):
    rng = np.random.default_rng(1)
    emb = _emb(rng.normal(size=(10, 2)))
    with caplog.at_level(logging.WARNING):
        rho = select_rho(emb, 50)
    assert rho >= pdist(emb.coords).max()
    assert "unreachable" in caplog.text


def test_select_rho_hits_target():
    rng = np.random.default_rng(2)
    g = random_digraph(rng, 100, 0.03)
    emb = isomap_embed(g)
    target = default_latent_target(g)
    rho = select_rho(emb, target, g)
    i, _ = latent_neighbors(g, emb, rho)
    assert abs(i.size / g.num_nodes - target) <= 0.1 * target


def test_select_rho_rejects_small_target():
    with pytest.raises(ValueError):
        select_rho(_emb([[0, 0], [1, 0]]), 0.5)


def test_lonely_node_partition():
    g = DirectedGraph.from_edges(3, [0], [1])
    emb = _emb([[0, 0], [1, 0], [50, 50]])
    part = partition_neighbors(g, emb, 0.5)
    assert part.entries_of(2) == [(2, "self", 0)]


def test_example_node_buckets():
    # node 1 with in {2,3}, out {4,5,6}, latent {7}; coordinates put each in its own bucket
    g = from_edges(8, [(2, 1), (3, 1), (1, 4), (1, 5), (1, 6)])
    coords = {1: (0, 0), 2: (-1, 1), 3: (1, -1), 4: (1, 1), 5: (-1, -1), 6: (1, -2),
              7: (-0.5, 0.5), 0: (9, 9)}
    emb = _emb([coords[i] for i in range(8)])
    part = partition_neighbors(g, emb, 0.8)
    entries = part.entries_of(1)
    assert len(entries) == 7
    got = {(j, kind): r for j, kind, r in entries}
    assert got == {(1, "self"): 0, (2, "in"): 1, (3, "in"): 4, (4, "out"): 6,
                   (5, "out"): 7, (6, "out"): 8, (7, "latent"): 9}


def test_mutual_pair_appears_twice():
    g = from_edges(2, [(0, 1), (1, 0)])
    part = partition_neighbors(g, _emb([[0, 0], [1, 1]]), 0.1)
    assert sorted(part.entries_of(0)) == [(0, "self", 0), (1, "in", 2), (1, "out", 6)]


def test_graph_role_beats_latent():
    g = from_edges(3, [(0, 1)])
    part = partition_neighbors(g, _emb([[0, 0], [0.1, 0], [0.2, 0]]), 10.0)
    kinds = {(j, k) for j, k, _ in part.entries_of(0)}
    assert (1, "out") in kinds and (1, "latent") not in kinds
    assert (2, "latent") in kinds


def test_ablations():
    rng = np.random.default_rng(3)
    g = random_digraph(rng, 40, 0.05)
    emb = isomap_embed(g)
    part = partition_neighbors(g, emb, select_rho(emb, default_latent_target(g), g))
    geo = apply_ablation(part, "no_geometry")
    assert geo.num_relations == 4
    assert np.array_equal(geo.relation, geo.kind)
    lat = apply_ablation(part, "no_latent")
    assert lat.num_relations == 9
    assert not np.any(lat.kind == KIND_CODE["latent"])
    assert lat.center.size == np.count_nonzero(part.kind != KIND_CODE["latent"])
    for name in ("full", "rwr_weights", "no_structure"):
        assert apply_ablation(part, name) is part
    with pytest.raises(ValueError):
        apply_ablation(part, "nothing")


def test_partition_needs_2d():
    g = from_edges(2, [(0, 1)])
    with pytest.raises(ValueError):
        partition_neighbors(g, isomap_embed(g, m=3), 1.0)
