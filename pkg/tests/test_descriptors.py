import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rockmap import PointCloud, SpatialIndex, compute_descriptors
from rockmap import _core_py

from conftest import grid_plane, sample_ball, sample_plane


def characteristic_roots(cov):
    """Eigenvalues via the cubic characteristic polynomial — independent of
    both descriptor backends and of numpy's eigensolver path for this test."""
    a = -1.0
    b = np.trace(cov)
    c = -0.5 * (np.trace(cov) ** 2 - np.trace(cov @ cov))
    d = np.linalg.det(cov)
    roots = np.roots([a, b, c, d])
    return np.sort(roots.real)[::-1]


def neighbourhood_cov(points, center):
    rel = points - center
    rel = rel - rel.mean(axis=0)
    return rel.T @ rel / points.shape[0]


def descriptors_for(points, radius):
    cloud = PointCloud(points)
    index = SpatialIndex(cloud)
    return cloud, compute_descriptors(cloud, index, radius)


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestIdentities:
    def test_planarity_near_one_on_plane(self, rng):
        pts = grid_plane([0.3, -0.2, 1.0], [0, 0, 0], extent=0.24,
                         spacing=0.004, jitter=0.0012, rng=rng)
        _, desc = descriptors_for(pts, 0.06)
        interior = np.abs(pts[:, :2]).max(axis=1) < 0.05
        assert desc.planarity[interior].mean() > 0.95
        assert desc.curvature[interior].mean() < 0.05

    def test_curvature_third_on_isotropic_ball(self, rng):
        centers = sample_ball(rng, 8000, [0, 0, 0], 0.15)
        _, desc = descriptors_for(centers, 0.09)
        inner = np.linalg.norm(centers, axis=1) < 0.05
        assert abs(desc.curvature[inner].mean() - 1.0 / 3.0) < 0.02

    def test_normal_direction_on_plane(self, rng):
        n = np.array([1.0, 2.0, 2.0]) / 3.0
        pts = sample_plane(rng, 3000, n, [0, 0, 0], extent=1.0)
        _, desc = descriptors_for(pts, 0.1)
        dots = np.abs(desc.normals @ n)
        assert np.median(dots) > 0.9999

    def test_descending_eigenvalues_and_ranges(self, rng):
        pts = rng.normal(size=(500, 3)) * [1.0, 0.5, 0.1]
        _, desc = descriptors_for(pts, 0.8)
        ok = ~desc.degenerate
        ev = desc.eigenvalues[ok]
        assert (ev[:, 0] >= ev[:, 1]).all() and (ev[:, 1] >= ev[:, 2]).all()
        assert (ev >= 0).all()
        assert (desc.planarity[ok] >= 0).all() and (desc.planarity[ok] <= 1 + 1e-12).all()
        assert (desc.curvature[ok] >= 0).all() and (desc.curvature[ok] <= 1 / 3 + 1e-12).all()
        assert np.allclose(np.linalg.norm(desc.normals[ok], axis=1), 1.0, atol=1e-9)

    def test_degenerate_isolated_points(self):
        pts = np.array([[0.0, 0, 0], [10.0, 0, 0], [20.0, 0, 0]])
        _, desc = descriptors_for(pts, 0.5)
        assert desc.degenerate.all()
        assert (desc.planarity == 0).all() and (desc.curvature == 0).all()


class TestEigenOracle:
    def test_matches_characteristic_polynomial(self, rng):
        pts = rng.normal(size=(400, 3)) * [1.0, 0.4, 0.15]
        cloud, desc = descriptors_for(pts, 0.9)
        index = SpatialIndex(cloud)
        for i in rng.integers(0, 400, 25):
            nbrs = index.radius(pts[i], 0.9)
            if nbrs.size < 4:
                continue
            cov = neighbourhood_cov(pts[nbrs], pts[i])
            want = characteristic_roots(cov)
            got = desc.eigenvalues[i]
            assert np.allclose(got, want, rtol=1e-9, atol=1e-15)


class TestInvariance:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_rotation_translation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(300, 3)) * [1.0, 0.6, 0.2]
        rot = random_rotation(rng)
        shift = rng.normal(size=3) * 10
        _, a = descriptors_for(pts, 0.7)
        _, b = descriptors_for(pts @ rot.T + shift, 0.7)
        ok = ~a.degenerate
        assert np.allclose(a.eigenvalues[ok], b.eigenvalues[ok], atol=1e-6)
        assert np.allclose(a.planarity[ok], b.planarity[ok], atol=1e-6)
        assert np.allclose(a.curvature[ok], b.curvature[ok], atol=1e-6)
        # normals rotate with the cloud (up to the canonical sign)
        dots = np.abs(np.einsum("ij,ij->i", a.normals[ok] @ rot.T, b.normals[ok]))
        assert np.allclose(dots, 1.0, atol=1e-6)


class TestBackendEquivalence:
    def test_compiled_and_fallback_agree(self, rng):
        from rockmap import backend
        if not backend.IS_COMPILED:
            pytest.skip("compiled extension unavailable")
        from rockmap import _core
        pts = rng.normal(size=(1500, 3))
        cloud = PointCloud(pts)
        indptr, indices = SpatialIndex(cloud).radius_all(0.5)
        ev_c, n_c, cnt_c = _core.neighborhood_eigen(pts, indptr, indices)
        ev_p, n_p, cnt_p = _core_py.neighborhood_eigen(pts, indptr, indices)
        assert np.array_equal(cnt_c, cnt_p)
        assert np.allclose(ev_c, ev_p, atol=1e-12)
        assert np.allclose(n_c, n_p, atol=1e-9)  # identical sign convention

    def test_env_var_forces_fallback(self, tmp_path):
        import subprocess, sys
        code = "import rockmap.backend as b; print(b.IS_COMPILED)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"ROCKMAP_NO_EXT": "1", "PATH": "/usr/bin:/bin"},
            capture_output=True, text=True,
        )
        assert out.stdout.strip() == "False"
