import numpy as np
import pytest

from wgcn.graph import dataset_stats, degrees
from wgcn.synthetic import SyntheticSpec, generate_synthetic


def test_shapes_and_degrees():
    spec = SyntheticSpec(nodes_per_class=40, classes=2, asymmetry=4, base_degree=3)
    g, table = generate_synthetic(spec)
    assert g.num_nodes == 80
    assert table.features.shape == (80, spec.num_features)
    assert table.num_classes == 2
    d = degrees(g)
    # every node has base_degree edges on one side and asymmetry times that on the other
    assert np.all(d.total == 3 + 12)
    assert np.all(np.sort(np.stack([d.d_in, d.d_out]), axis=0) == [[3], [12]])
    popular = d.d_in > d.d_out
    assert 0.4 < popular.mean() < 0.6


def test_perfect_direction_signal_conforms():
    spec = SyntheticSpec(nodes_per_class=60, p_same_small_dir=1.0, p_same_large_dir=0.0)
    g, table = generate_synthetic(spec)
    assert dataset_stats(g, table.labels).conform > 0.99


def test_equal_probabilities_conform_half():
    rates = []
    for seed in range(20):
        spec = SyntheticSpec(nodes_per_class=60, p_same_small_dir=0.5, p_same_large_dir=0.5,
                             seed=seed)
        g, table = generate_synthetic(spec)
        rates.append(dataset_stats(g, table.labels).conform)
    assert abs(np.mean(rates) - 0.5) < 0.05


def test_no_asymmetry_means_equal_degrees():
    g, table = generate_synthetic(SyntheticSpec(nodes_per_class=40, asymmetry=1))
    rep = dataset_stats(g, table.labels)
    assert rep.cat_equal > max(rep.cat_zero, rep.cat_diff)


def test_features_carry_class_signal():
    spec = SyntheticSpec(nodes_per_class=100, feature_signal=0.8)
    _, table = generate_synthetic(spec)
    half = spec.num_features // 2
    own = np.where(table.labels == 0, table.features[:, :half].sum(1),
                   table.features[:, half:].sum(1))
    assert own.mean() > 0.7 * table.features.sum(1).mean()
    assert table.features.min() >= 0


def test_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=4))
    b = generate_synthetic(SyntheticSpec(seed=4))
    assert np.array_equal(a[0].adjacency().toarray(), b[0].adjacency().toarray())
    assert np.array_equal(a[1].features, b[1].features)


@pytest.mark.parametrize("bad", [{"p_same_small_dir": 1.2}, {"asymmetry": 0},
                                 {"nodes_per_class": 2}, {"feature_signal": -0.1}])
def test_validation(bad):
    with pytest.raises(ValueError):
        SyntheticSpec(**bad)
