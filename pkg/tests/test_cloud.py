import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rockmap import (
    ArgumentError,
    DataError,
    PointCloud,
    ScaleParams,
    SpatialIndex,
    estimate_point_spacing,
    support_radius,
)

from conftest import random_cloud


class TestPointCloud:
    def test_shape_validation(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((4, 2)))
        with pytest.raises(DataError):
            PointCloud(np.array([[0.0, 0.0, np.nan]]))

    def test_immutability(self):
        c = PointCloud(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            c.points[0, 0] = 1.0

    def test_attribute_length_checked(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((3, 3)), {"a": np.zeros(2)})

    def test_select_carries_attributes(self, rng):
        c = PointCloud(rng.normal(size=(5, 3)), {"a": np.arange(5.0)})
        s = c.select([3, 1])
        assert np.array_equal(s.attributes["a"], [3.0, 1.0])
        assert np.array_equal(s.points, c.points[[3, 1]])


class TestSupportRadius:
    def test_reference_value(self):
        # r(0.012) = 0.012 * (5 - 16*0.012) = 0.057696
        assert support_radius(0.012) == pytest.approx(0.057696, abs=1e-12)

    def test_domain(self):
        for bad in (0.0, -0.01, 0.15, 0.2):
            with pytest.raises(ArgumentError):
                support_radius(bad)

    @given(st.floats(min_value=1e-6, max_value=0.1499))
    def test_positive_on_domain(self, ps):
        assert support_radius(ps) > 0.0

    def test_scale_params(self):
        sp = ScaleParams.from_spacing(0.012)
        assert sp.point_spacing == 0.012
        assert sp.support_radius == pytest.approx(0.057696)


class TestSpatialIndex:
    def test_radius_matches_brute_force(self, rng):
        cloud = random_cloud(rng, 400)
        idx = SpatialIndex(cloud)
        for qi in rng.integers(0, 400, 20):
            q = cloud.points[qi]
            r = rng.uniform(0.05, 0.4)
            got = idx.radius(q, r)
            want = np.flatnonzero(np.linalg.norm(cloud.points - q, axis=1) <= r)
            assert np.array_equal(got, want)

    def test_radius_all_matches_per_point(self, rng):
        cloud = random_cloud(rng, 200)
        idx = SpatialIndex(cloud)
        indptr, indices = idx.radius_all(0.2)
        for i in range(len(cloud)):
            got = np.sort(indices[indptr[i]:indptr[i + 1]])
            assert np.array_equal(got, idx.radius(cloud.points[i], 0.2))

    def test_knn_self_included(self, rng):
        cloud = random_cloud(rng, 50)
        idx = SpatialIndex(cloud)
        d, i = idx.knn(cloud.points, k=3)
        assert np.array_equal(i[:, 0], np.arange(50))
        assert np.allclose(d[:, 0], 0.0)

    def test_knn_k_one_keeps_2d_shape(self, rng):
        cloud = random_cloud(rng, 10)
        d, i = SpatialIndex(cloud).knn(cloud.points[:4], k=1)
        assert d.shape == (4, 1) and i.shape == (4, 1)

    def test_pairs_within(self, rng):
        cloud = random_cloud(rng, 120)
        pairs = SpatialIndex(cloud).pairs_within(0.25)
        d = np.linalg.norm(cloud.points[pairs[:, 0]] - cloud.points[pairs[:, 1]], axis=1)
        assert (d <= 0.25).all()
        # count against brute force
        from scipy.spatial.distance import pdist
        assert pairs.shape[0] == int((pdist(cloud.points) <= 0.25).sum())


class TestPointSpacing:
    def test_grid_spacing_recovered(self):
        xs = np.arange(0, 1.0, 0.05)
        gx, gy = np.meshgrid(xs, xs)
        pts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
        ps = estimate_point_spacing(PointCloud(pts))
        assert ps == pytest.approx(0.05, rel=1e-9)

    def test_needs_two_points(self):
        with pytest.raises(ArgumentError):
            estimate_point_spacing(PointCloud(np.zeros((1, 3))))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.5, max_value=3.0))
    def test_scaling_linearity(self, factor):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 1, (300, 3))
        a = estimate_point_spacing(PointCloud(pts))
        b = estimate_point_spacing(PointCloud(pts * factor))
        assert b == pytest.approx(a * factor, rel=1e-9)
