import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rockmap import (
    ArgumentError,
    DegenerateClusterError,
    PointCloud,
    SpatialIndex,
    compute_descriptors,
    characterize_sets,
    filter_planar_points,
    fit_discontinuity_plane,
    orientation_to_normal,
    orientation_transform,
    scaled_min_cluster_size,
)
from rockmap.structure import _aligned_mean_normal

from conftest import grid_plane

orientations = st.tuples(
    st.floats(min_value=0.5, max_value=89.5),
    st.floats(min_value=0.0, max_value=359.9),
)


class TestOrientationTransform:
    def test_known_values(self):
        # horizontal plane: normal +z
        p = orientation_transform([[0.0, 0.0, 1.0]])
        assert p.dip_angle[0] == pytest.approx(0.0)
        # vertical plane dipping east
        p = orientation_transform([[1.0, 0.0, 0.0]])
        assert p.dip_angle[0] == pytest.approx(90.0)
        assert p.dip_direction[0] == pytest.approx(90.0)
        # 45 degrees toward north
        p = orientation_transform([np.array([0.0, 1.0, 1.0]) / np.sqrt(2)])
        assert p.dip_angle[0] == pytest.approx(45.0)
        assert p.dip_direction[0] == pytest.approx(0.0)

    def test_hemisphere_flip(self):
        up = orientation_transform([np.array([0.0, 1.0, 1.0]) / np.sqrt(2)])
        down = orientation_transform([np.array([0.0, -1.0, -1.0]) / np.sqrt(2)])
        assert up.dip_angle[0] == pytest.approx(down.dip_angle[0])
        assert up.dip_direction[0] == pytest.approx(down.dip_direction[0])

    def test_projection_is_tan_half(self):
        p = orientation_transform([orientation_to_normal(60.0, 45.0)])
        r = np.hypot(*p.projected[0])
        assert r == pytest.approx(np.tan(np.radians(30.0)), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(orientations)
    def test_round_trip(self, ori):
        da, dd = ori
        n = orientation_to_normal(da, dd)
        p = orientation_transform([n])
        assert p.dip_angle[0] == pytest.approx(da, abs=1e-9)
        assert p.dip_direction[0] == pytest.approx(dd, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(orientations)
    def test_sign_invariance(self, ori):
        n = orientation_to_normal(*ori)
        a = orientation_transform([n])
        b = orientation_transform([-n])
        assert a.dip_angle[0] == pytest.approx(b.dip_angle[0], abs=1e-9)
        assert abs((a.dip_direction[0] - b.dip_direction[0] + 180) % 360 - 180) < 1e-9

    def test_rejects_non_unit(self):
        with pytest.raises(ArgumentError):
            orientation_transform([[0.0, 0.0, 2.0]])
        with pytest.raises(ArgumentError):
            orientation_transform([[0.0, 0.0, 0.0]])


class TestScaledMinClusterSize:
    def test_reference_scale(self):
        assert scaled_min_cluster_size(700000) == 10000

    def test_floor(self):
        assert scaled_min_cluster_size(100) == 50

    def test_proportionality(self):
        assert scaled_min_cluster_size(350000) == 5000


class TestAlignedMeanNormal:
    def test_mixed_signs(self):
        n = np.array([0.0, 0.6, 0.8])
        normals = np.vstack([n, -n, n, n])
        m = _aligned_mean_normal(normals)
        assert abs(abs(m @ n) - 1.0) < 1e-12

    def test_incoherent_raises(self):
        v = np.array([
            [1.0, 0, 0], [-1.0, 0, 0],
            [0, 1.0, 0], [0, -1.0, 0],
            [0, 0, 1.0], [0, 0, -1.0],
        ])
        with pytest.raises(DegenerateClusterError):
            _aligned_mean_normal(v)


class TestPlaneFit:
    def test_planted_orientation_recovered(self, rng):
        da, dd = 68.0, 114.0
        normal = orientation_to_normal(da, dd)
        pts = grid_plane(normal, [1.0, 2.0, 3.0], extent=0.8,
                         spacing=0.01, jitter=0.003, rng=rng)
        pts = pts + rng.normal(0, 0.001, pts.shape)
        cloud = PointCloud(pts)
        desc = compute_descriptors(cloud, SpatialIndex(cloud), 0.05)
        plane = fit_discontinuity_plane(np.arange(len(cloud)), cloud, desc)
        assert plane.dip_angle == pytest.approx(da, abs=0.5)
        assert plane.dip_direction == pytest.approx(dd, abs=0.5)
        assert np.allclose(plane.centroid, [1.0, 2.0, 3.0], atol=0.01)
        # corners span the sampled extent
        corners = plane.corners
        assert corners.shape == (4, 3)
        diag = np.linalg.norm(corners[0] - corners[2])
        assert 0.8 < diag < 1.3


class TestCharacterizeSets:
    def test_two_sets_two_planes_each(self, rng):
        pts = []
        for da, dd, centers in [
            (68.0, 114.0, [[0, 0, 0], [3, 0, 0]]),
            (35.0, 250.0, [[0, 3, 0], [3, 3, 0]]),
        ]:
            n = orientation_to_normal(da, dd)
            for c in centers:
                pts.append(grid_plane(n, c, extent=0.6, spacing=0.008,
                                      jitter=0.0024, rng=rng))
        cloud = PointCloud(np.vstack(pts) + rng.normal(0, 0.001, (sum(len(p) for p in pts), 3)))
        index = SpatialIndex(cloud)
        desc = compute_descriptors(cloud, index, 0.04)
        planar = filter_planar_points(desc, 0.8)
        sets, planes = characterize_sets(
            cloud, desc, planar, min_cluster_size=500, min_samples=50,
            component_cell=0.04, min_plane_points=100,
        )
        assert len(sets) == 2
        assert len(planes) == 4
        got = sorted((round(s.dip_angle), round(s.dip_direction)) for s in sets)
        assert got == [(35, 250), (68, 114)]
        # count consistency: every plane belongs to exactly one listed set
        for s in sets:
            assert all(planes[p].set_id == s.set_id for p in s.plane_ids)
        assert sum(len(s.plane_ids) for s in sets) == len(planes)

    def test_empty_planar_selection(self, rng):
        cloud = PointCloud(rng.normal(size=(50, 3)))
        desc = compute_descriptors(cloud, SpatialIndex(cloud), 0.5)
        sets, planes = characterize_sets(cloud, desc, np.array([], dtype=np.intp))
        assert sets == [] and planes == []
