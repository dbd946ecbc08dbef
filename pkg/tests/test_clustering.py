import numpy as np
import pytest
from scipy.spatial.distance import cdist

from rockmap import PointCloud, euclidean_components, hdbscan
from rockmap.clustering import (
    DENSE_MST_LIMIT,
    NOISE,
    _mst_knn_graph,
    _prim_dense,
    core_distances,
)

from conftest import brute_force_mst_weight, mutual_reachability, random_cloud


class TestCoreDistances:
    def test_matches_sorted_distances(self, rng):
        pts = rng.normal(size=(150, 2))
        for k in (1, 3, 10):
            got = core_distances(pts, k)
            d = cdist(pts, pts)
            want = np.sort(d, axis=1)[:, k - 1]  # self counted, sklearn style
            assert np.allclose(got, want, atol=1e-12)


class TestMstOracle:
    @pytest.mark.parametrize("trial", range(10))
    def test_dense_prim_matches_brute_force(self, trial):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(10, 200))
        pts = rng.normal(size=(n, int(rng.integers(1, 4))))
        mreach = mutual_reachability(pts, min_samples=5)
        u, v, w = _prim_dense(pts, core_distances(pts, 5))
        assert u.shape[0] == n - 1
        assert abs(w.sum() - brute_force_mst_weight(pts, mreach)) < 1e-9

    @pytest.mark.parametrize("trial", range(5))
    def test_knn_graph_matches_brute_force(self, trial):
        rng = np.random.default_rng(200 + trial)
        n = int(rng.integers(50, 200))
        pts = rng.normal(size=(n, 3))
        mreach = mutual_reachability(pts, min_samples=5)
        u, v, w = _mst_knn_graph(pts, core_distances(pts, 5))
        assert abs(w.sum() - brute_force_mst_weight(pts, mreach)) < 1e-9


class TestHdbscan:
    def test_two_blobs(self, rng):
        a = rng.normal([0, 0], 0.05, (300, 2))
        b = rng.normal([1, 1], 0.05, (300, 2))
        labels = hdbscan(np.vstack([a, b]), min_cluster_size=50, min_samples=10)
        assert labels.cluster_count == 2
        la = labels.labels[:300]
        lb = labels.labels[300:]
        # purity within each blob
        for part in (la, lb):
            vals, counts = np.unique(part[part != NOISE], return_counts=True)
            assert counts.max() / counts.sum() >= 0.95
        assert set(la[la != NOISE]) != set(lb[lb != NOISE])

    def test_uniform_all_noise(self, rng):
        pts = rng.uniform(0, 1, (200, 2))
        labels = hdbscan(pts, min_cluster_size=150, min_samples=5)
        assert labels.cluster_count == 0
        assert (labels.labels == NOISE).all()

    def test_order_invariance(self, rng):
        a = rng.normal([0, 0], 0.05, (200, 2))
        b = rng.normal([2, 0], 0.08, (250, 2))
        pts = np.vstack([a, b])
        perm = rng.permutation(len(pts))
        l1 = hdbscan(pts, min_cluster_size=40, min_samples=10)
        l2 = hdbscan(pts[perm], min_cluster_size=40, min_samples=10)
        # same partition after undoing the permutation
        undone = np.full(len(pts), NOISE)
        undone[perm] = l2.labels
        assert l1.cluster_count == l2.cluster_count
        for c in range(l1.cluster_count):
            members = l1.labels == c
            vals = np.unique(undone[members])
            assert vals.size == 1 and vals[0] != NOISE

    def test_min_cluster_size_monotone(self, rng):
        pts = np.vstack([
            rng.normal([0, 0], 0.05, (120, 2)),
            rng.normal([1, 0], 0.05, (60, 2)),
            rng.uniform(-1, 2, (40, 2)),
        ])
        counts = [
            hdbscan(pts, min_cluster_size=m, min_samples=5).cluster_count
            for m in (20, 80, 200)
        ]
        assert counts[0] >= counts[1] >= counts[2]

    def test_dense_and_sparse_paths_agree(self, rng):
        pts = np.vstack([
            rng.normal([0, 0], 0.04, (150, 2)),
            rng.normal([1.5, 0.5], 0.06, (150, 2)),
            rng.uniform(-1, 3, (50, 2)),
        ])
        import rockmap.clustering as cl
        dense = hdbscan(pts, min_cluster_size=40, min_samples=10)
        limit = cl.DENSE_MST_LIMIT
        try:
            cl.DENSE_MST_LIMIT = 10  # force the kNN-graph route
            sparse = hdbscan(pts, min_cluster_size=40, min_samples=10)
        finally:
            cl.DENSE_MST_LIMIT = limit
        assert dense.cluster_count == sparse.cluster_count
        assert np.array_equal(dense.labels, sparse.labels)


class TestEuclideanComponents:
    def brute(self, points, members, cell):
        sub = points[members]
        n = len(members)
        d = cdist(sub, sub)
        adj = d <= cell
        label = -np.ones(n, dtype=int)
        cur = 0
        for i in range(n):
            if label[i] >= 0:
                continue
            stack = [i]
            label[i] = cur
            while stack:
                j = stack.pop()
                for k in np.flatnonzero(adj[j]):
                    if label[k] < 0:
                        label[k] = cur
                        stack.append(k)
            cur += 1
        return label

    @pytest.mark.parametrize("trial", range(5))
    def test_matches_flood_fill(self, trial):
        rng = np.random.default_rng(300 + trial)
        cloud = random_cloud(rng, 400)
        members = np.sort(rng.choice(400, 250, replace=False))
        cell = float(rng.uniform(0.05, 0.15))
        got = euclidean_components(cloud, members, cell)
        want = self.brute(cloud.points, members, cell)
        # same partition (label values may differ by the relabel rule)
        assert got.labels.shape == want.shape
        for c in np.unique(want):
            vals = np.unique(got.labels[want == c])
            assert vals.size == 1
        assert got.cluster_count == np.unique(want).size

    def test_first_occurrence_relabel(self, rng):
        pts = np.array([[0, 0, 0], [5, 0, 0], [0.01, 0, 0], [5.01, 0, 0]], dtype=float)
        comp = euclidean_components(PointCloud(pts), np.arange(4), 0.1)
        assert np.array_equal(comp.labels, [0, 1, 0, 1])
