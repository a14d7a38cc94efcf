import numpy as np
import pytest
from scipy.spatial import cKDTree
from sklearn.metrics import silhouette_score

import cadclust


def reference_chamfer(p, q):
    d_pq, _ = cKDTree(q).query(p)
    d_qp, _ = cKDTree(p).query(q)
    return np.mean(d_pq**2) + np.mean(d_qp**2)


def test_chamfer_matches_kdtree_reference():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = rng.random((rng.integers(1, 300), 3))
        q = rng.random((rng.integers(1, 300), 3)) * 2.0
        assert cadclust.chamfer(p, q) == pytest.approx(reference_chamfer(p, q), rel=1e-9)
    assert cadclust.chamfer(p, p) == 0.0


def test_chamfer_rejects_bad_shape():
    with pytest.raises(ValueError):
        cadclust.chamfer(np.zeros((4, 2)), np.zeros((4, 3)))


def test_silhouette_matches_sklearn():
    rng = np.random.default_rng(11)
    x = rng.random((40, 3))
    labels = [i % 4 for i in range(40)]
    ids = [f"m{i:02d}" for i in range(40)]
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    mean, per_object = cadclust.silhouette(cadclust.Partition(ids, labels), d)
    assert mean == pytest.approx(silhouette_score(d, labels, metric="precomputed"), abs=1e-12)
    assert len(per_object) == 40


def test_partition_and_consistency():
    p = cadclust.Partition(["a", "b", "c"], [0, 0, 1])
    assert p.edge_label("b", "a") == 1
    assert p.edge_label("a", "c") == -1
    assert cadclust.canonical_edge("z", "a") == ("a", "z")

    x = cadclust.LabeledEdgeSet("x")
    y = cadclust.LabeledEdgeSet("y")
    x.set("a", "b", 1)
    y.set("b", "a", 1)
    x.set("a", "c", -1)
    y.set("a", "c", 1)
    assert cadclust.consistency(x, y) == 0.5


def test_annotation_round_trip():
    s = cadclust.ClusterAnnotation("0", ["a", "b", "c", "d"])
    s = s.apply_round(["a", "b"])
    s = s.apply_round(["c", "d"])
    assert s.terminal
    labels = {(a, b): v for a, b, v in s.derive_edges().items()}
    assert labels[("a", "b")] == 1 and labels[("c", "d")] == 1
    assert sum(v == -1 for v in labels.values()) == 4


def test_ensemble_and_metrics():
    parts = [cadclust.Partition(["a", "b"], [0, 0]), cadclust.Partition(["a", "b"], [0, 1])]
    assert cadclust.majority_threshold(2) == 2
    assert cadclust.method_ensemble_label(parts, "a", "b") == -1
    assert cadclust.balanced_accuracy(tp=40, fp=20, tn=80, fn=10) == 0.8
    assert cadclust.edge_accuracy(tp=1, fp=1, tn=1, fn=1) == 0.5
    counts = cadclust.confusion(parts[0], parts[1])
    assert counts == {"tp": 0, "fp": 1, "tn": 0, "fn": 0}


def test_kmeans_and_capacity_split():
    rng = np.random.default_rng(5)
    x = rng.random((120, 4))
    ids = [f"f{i:03d}" for i in range(120)]
    part, objective, _ = cadclust.kmeans(ids, x, k=5, seed=1)
    assert all(b <= a for a, b in zip(objective, objective[1:]))
    split = cadclust.capacity_split(x, part, capacity=12, seed=2)
    assert max(split.cluster_sizes()) <= 12
    assert sorted(split.ids) == ids


def test_voxel_jaccard():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    cells = cadclust.voxelize(pts, resolution=4)
    assert len(cells) == 2
    assert cadclust.jaccard(cells, cells, resolution=4) == 0.0
    assert cadclust.jaccard([], [], resolution=4) == 0.0
    assert cadclust.jaccard(cells, [], resolution=4) == 1.0
