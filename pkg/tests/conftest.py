import numpy as np
import pytest

from rockmap import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cloud(rng, n, scale=1.0):
    return PointCloud(rng.uniform(0.0, scale, (n, 3)))


def sample_plane(rng, n, normal, center, extent=1.0, sigma=0.0):
    """n points on a plane through center with the given unit normal."""
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    ref = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(normal, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    u = rng.uniform(-extent / 2, extent / 2, n)
    v = rng.uniform(-extent / 2, extent / 2, n)
    pts = np.asarray(center) + u[:, None] * e1 + v[:, None] * e2
    if sigma > 0:
        pts = pts + rng.normal(0.0, sigma, pts.shape)
    return pts


def grid_plane(normal, center, extent=1.0, spacing=0.02, jitter=0.0, rng=None):
    """Jittered-grid plane sample matching scanner-like neighbourhoods."""
    normal = np.asarray(normal, dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    ref = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(normal, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    ticks = np.arange(-extent / 2, extent / 2, spacing)
    gu, gv = np.meshgrid(ticks, ticks, indexing="ij")
    u, v = gu.ravel(), gv.ravel()
    if jitter > 0 and rng is not None:
        u = u + rng.uniform(-jitter, jitter, u.shape)
        v = v + rng.uniform(-jitter, jitter, v.shape)
    return np.asarray(center) + u[:, None] * e1 + v[:, None] * e2


def sample_ball(rng, n, center, radius):
    """Uniform points inside a solid ball (isotropic neighbourhood)."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, n) ** (1.0 / 3.0)
    return np.asarray(center) + v * r[:, None]


def brute_force_mst_weight(points, mreach):
    """O(N^3)-ish exact MST total weight on a full mutual-reachability graph."""
    n = points.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    in_tree[0] = True
    best = mreach[0].copy()
    best[0] = np.inf
    total = 0.0
    for _ in range(n - 1):
        j = int(np.argmin(np.where(in_tree, np.inf, best)))
        total += best[j]
        in_tree[j] = True
        np.minimum(best, mreach[j], out=best)
        best[in_tree] = np.inf
    return total


def mutual_reachability(points, min_samples):
    from scipy.spatial.distance import cdist

    d = cdist(points, points)
    k = min(min_samples, points.shape[0])
    core = np.sort(d, axis=1)[:, k - 1]
    return np.maximum(d, np.maximum(core[:, None], core[None, :]))
