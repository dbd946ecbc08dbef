"""Pure-numpy twin of the compiled ``_core`` kernels.

Same contracts, used when the extension is unavailable or disabled via
``ROCKMAP_NO_EXT``. Chunked so memory stays bounded on large clouds.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False

_CHUNK_POINTS = 65536


def neighborhood_eigen(points: np.ndarray, indptr: np.ndarray, indices: np.ndarray):
    """Covariance eigen-decomposition of each point's neighbourhood.

    Returns (eigvals descending (N,3), normal = smallest eigenvector (N,3),
    neighbour counts (N,)).
    """
    n = points.shape[0]
    eigvals = np.zeros((n, 3))
    normals = np.zeros((n, 3))
    normals[:, 2] = 1.0
    counts = np.diff(indptr).astype(np.int64)

    for lo in range(0, n, _CHUNK_POINTS):
        hi = min(lo + _CHUNK_POINTS, n)
        seg = slice(indptr[lo], indptr[hi])
        idx = indices[seg]
        if idx.size == 0:
            continue
        starts = (indptr[lo:hi] - indptr[lo]).astype(np.intp)
        cnt = counts[lo:hi]
        ok = cnt >= 3
        # accumulate relative to each query point to avoid cancellation
        owner = np.repeat(np.arange(hi - lo), cnt)
        rel = points[idx] - points[lo + owner]
        sums = np.add.reduceat(rel, starts, axis=0)
        sums[cnt == 0] = 0.0
        prods = rel[:, [0, 0, 0, 1, 1, 2]] * rel[:, [0, 1, 2, 1, 2, 2]]
        psums = np.add.reduceat(prods, starts, axis=0)
        psums[cnt == 0] = 0.0
        safe = np.maximum(cnt, 1).astype(np.float64)
        mean = sums / safe[:, None]
        m2 = psums / safe[:, None]
        cov = np.empty((hi - lo, 3, 3))
        cov[:, 0, 0] = m2[:, 0] - mean[:, 0] ** 2
        cov[:, 0, 1] = cov[:, 1, 0] = m2[:, 1] - mean[:, 0] * mean[:, 1]
        cov[:, 0, 2] = cov[:, 2, 0] = m2[:, 2] - mean[:, 0] * mean[:, 2]
        cov[:, 1, 1] = m2[:, 3] - mean[:, 1] ** 2
        cov[:, 1, 2] = cov[:, 2, 1] = m2[:, 4] - mean[:, 1] * mean[:, 2]
        cov[:, 2, 2] = m2[:, 5] - mean[:, 2] ** 2
        if not ok.any():
            continue
        w, v = np.linalg.eigh(cov[ok])  # ascending
        w = np.maximum(w, 0.0)
        eigvals[lo:hi][ok] = w[:, ::-1]
        nrm = v[:, :, 0]
        nrm = _canonical_sign(nrm)
        normals[lo:hi][ok] = nrm
    return eigvals, normals, counts


def _canonical_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip rows to positive z (ties broken by y then x), matching _core."""
    z, y, x = vectors[:, 2], vectors[:, 1], vectors[:, 0]
    flip = (z < 0) | ((z == 0) & ((y < 0) | ((y == 0) & (x < 0))))
    out = vectors.copy()
    out[flip] = -out[flip]
    return out


def single_linkage(edge_u: np.ndarray, edge_v: np.ndarray, weight: np.ndarray, n: int):
    """Single-linkage dendrogram from MST edges sorted by ascending weight."""
    if edge_u.shape[0] != n - 1:
        raise ValueError(f"expected {n - 1} MST edges, got {edge_u.shape[0]}")
    merges = np.empty((n - 1, 4))
    parent = np.arange(n, dtype=np.intp)
    cluster = np.arange(n, dtype=np.intp)
    size = np.ones(n, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for k in range(n - 1):
        ru, rv = find(edge_u[k]), find(edge_v[k])
        merges[k] = (cluster[ru], cluster[rv], weight[k], size[ru] + size[rv])
        r = min(ru, rv)
        parent[ru] = parent[rv] = r
        size[r] = merges[k, 3]
        cluster[r] = n + k
    return merges
