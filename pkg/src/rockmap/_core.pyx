# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-point neighbourhood eigen-decomposition and
single-linkage agglomeration from a sorted edge list.

A pure-numpy twin lives in ``_core_py``; ``rockmap.backend`` picks one at
import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, acos, cos, fabs, M_PI

cnp.import_array()

IS_COMPILED = True


cdef inline void _sym3_eigvals(double a00, double a01, double a02,
                               double a11, double a12, double a22,
                               double* w) nogil:
    """Eigenvalues of a symmetric 3x3 matrix, descending, trigonometric form."""
    cdef double p1 = a01 * a01 + a02 * a02 + a12 * a12
    cdef double q, p2, p, r, phi, b00, b11, b22, b01, b02, b12, detb
    cdef double e0, e1, e2, t
    if p1 == 0.0:
        e0, e1, e2 = a00, a11, a22
    else:
        q = (a00 + a11 + a22) / 3.0
        p2 = ((a00 - q) * (a00 - q) + (a11 - q) * (a11 - q)
              + (a22 - q) * (a22 - q) + 2.0 * p1)
        p = sqrt(p2 / 6.0)
        if p == 0.0:
            e0 = e1 = e2 = q
            w[0] = e0; w[1] = e1; w[2] = e2
            return
        b00 = (a00 - q) / p; b11 = (a11 - q) / p; b22 = (a22 - q) / p
        b01 = a01 / p; b02 = a02 / p; b12 = a12 / p
        detb = (b00 * (b11 * b22 - b12 * b12)
                - b01 * (b01 * b22 - b12 * b02)
                + b02 * (b01 * b12 - b11 * b02))
        r = detb / 2.0
        if r < -1.0:
            r = -1.0
        elif r > 1.0:
            r = 1.0
        phi = acos(r) / 3.0
        e0 = q + 2.0 * p * cos(phi)
        e2 = q + 2.0 * p * cos(phi + 2.0 * M_PI / 3.0)
        e1 = 3.0 * q - e0 - e2
    # sort descending
    if e0 < e1:
        t = e0; e0 = e1; e1 = t
    if e1 < e2:
        t = e1; e1 = e2; e2 = t
    if e0 < e1:
        t = e0; e0 = e1; e1 = t
    w[0] = e0; w[1] = e1; w[2] = e2


cdef inline void _smallest_eigvec(double a00, double a01, double a02,
                                  double a11, double a12, double a22,
                                  double lam, double* v) nogil:
    """Unit eigenvector for eigenvalue lam via row cross products."""
    cdef double r0x = a00 - lam, r0y = a01, r0z = a02
    cdef double r1x = a01, r1y = a11 - lam, r1z = a12
    cdef double r2x = a02, r2y = a12, r2z = a22 - lam
    cdef double c0x = r0y * r1z - r0z * r1y
    cdef double c0y = r0z * r1x - r0x * r1z
    cdef double c0z = r0x * r1y - r0y * r1x
    cdef double c1x = r0y * r2z - r0z * r2y
    cdef double c1y = r0z * r2x - r0x * r2z
    cdef double c1z = r0x * r2y - r0y * r2x
    cdef double c2x = r1y * r2z - r1z * r2y
    cdef double c2y = r1z * r2x - r1x * r2z
    cdef double c2z = r1x * r2y - r1y * r2x
    cdef double n0 = c0x * c0x + c0y * c0y + c0z * c0z
    cdef double n1 = c1x * c1x + c1y * c1y + c1z * c1z
    cdef double n2 = c2x * c2x + c2y * c2y + c2z * c2z
    cdef double bx, by, bz, nn
    if n0 >= n1 and n0 >= n2:
        bx, by, bz, nn = c0x, c0y, c0z, n0
    elif n1 >= n2:
        bx, by, bz, nn = c1x, c1y, c1z, n1
    else:
        bx, by, bz, nn = c2x, c2y, c2z, n2
    if nn <= 0.0:
        # fully degenerate (isotropic): any direction is an eigenvector
        v[0] = 0.0; v[1] = 0.0; v[2] = 1.0
        return
    nn = sqrt(nn)
    v[0] = bx / nn; v[1] = by / nn; v[2] = bz / nn


def neighborhood_eigen(cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] points,
                       cnp.ndarray[cnp.intp_t, ndim=1] indptr,
                       cnp.ndarray[cnp.intp_t, ndim=1] indices):
    """Covariance eigen-decomposition of each point's neighbourhood.

    Returns (eigvals desc (N,3), normal = smallest eigenvector (N,3),
    neighbour counts (N,)). Accumulation is relative to the query point to
    avoid cancellation for clouds far from the origin.
    """
    cdef Py_ssize_t n = points.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] eigvals = np.zeros((n, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] normals = np.zeros((n, 3))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i, j, a, b
    cdef double px, py, pz, dx, dy, dz
    cdef double sx, sy, sz, sxx, sxy, sxz, syy, syz, szz
    cdef double m, mx, my, mz
    cdef double a00, a01, a02, a11, a12, a22
    cdef double w[3]
    cdef double v[3]
    with nogil:
        for i in range(n):
            a = indptr[i]
            b = indptr[i + 1]
            counts[i] = b - a
            if b - a < 3:
                normals[i, 2] = 1.0
                continue
            px = points[i, 0]; py = points[i, 1]; pz = points[i, 2]
            sx = sy = sz = 0.0
            sxx = sxy = sxz = syy = syz = szz = 0.0
            for j in range(a, b):
                dx = points[indices[j], 0] - px
                dy = points[indices[j], 1] - py
                dz = points[indices[j], 2] - pz
                sx += dx; sy += dy; sz += dz
                sxx += dx * dx; sxy += dx * dy; sxz += dx * dz
                syy += dy * dy; syz += dy * dz; szz += dz * dz
            m = 1.0 / (b - a)
            mx = sx * m; my = sy * m; mz = sz * m
            a00 = sxx * m - mx * mx
            a01 = sxy * m - mx * my
            a02 = sxz * m - mx * mz
            a11 = syy * m - my * my
            a12 = syz * m - my * mz
            a22 = szz * m - mz * mz
            _sym3_eigvals(a00, a01, a02, a11, a12, a22, w)
            if w[0] < 0.0:
                w[0] = 0.0
            if w[1] < 0.0:
                w[1] = 0.0
            if w[2] < 0.0:
                w[2] = 0.0
            eigvals[i, 0] = w[0]; eigvals[i, 1] = w[1]; eigvals[i, 2] = w[2]
            _smallest_eigvec(a00, a01, a02, a11, a12, a22, w[2], v)
            # deterministic sign: positive z, tie-broken by y then x
            if v[2] < 0.0 or (v[2] == 0.0 and (v[1] < 0.0 or (v[1] == 0.0 and v[0] < 0.0))):
                v[0] = -v[0]; v[1] = -v[1]; v[2] = -v[2]
            normals[i, 0] = v[0]; normals[i, 1] = v[1]; normals[i, 2] = v[2]
    return eigvals, normals, counts


def single_linkage(cnp.ndarray[cnp.intp_t, ndim=1] edge_u,
                   cnp.ndarray[cnp.intp_t, ndim=1] edge_v,
                   cnp.ndarray[cnp.float64_t, ndim=1] weight,
                   Py_ssize_t n):
    """Single-linkage dendrogram from MST edges sorted by ascending weight.

    Returns an (n-1, 4) array [left id, right id, height, size] with leaves
    0..n-1 and internal nodes n..2n-2, scipy linkage style.
    """
    cdef Py_ssize_t m = edge_u.shape[0]
    if m != n - 1:
        raise ValueError(f"expected {n - 1} MST edges, got {m}")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] merges = np.empty((n - 1, 4))
    cdef cnp.ndarray[cnp.intp_t, ndim=1] parent = np.arange(2 * n - 1, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] cluster = np.arange(2 * n - 1, dtype=np.intp)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] size = np.ones(2 * n - 1, dtype=np.int64)
    cdef Py_ssize_t k, ru, rv, nxt, x, r
    with nogil:
        for k in range(m):
            # find roots with path compression
            x = edge_u[k]
            while parent[x] != x:
                x = parent[x]
            ru = x
            x = edge_u[k]
            while parent[x] != x:
                nxt = parent[x]; parent[x] = ru; x = nxt
            x = edge_v[k]
            while parent[x] != x:
                x = parent[x]
            rv = x
            x = edge_v[k]
            while parent[x] != x:
                nxt = parent[x]; parent[x] = rv; x = nxt
            nxt = n + k  # new internal node id
            merges[k, 0] = cluster[ru]
            merges[k, 1] = cluster[rv]
            merges[k, 2] = weight[k]
            merges[k, 3] = size[ru] + size[rv]
            r = ru if ru < rv else rv
            parent[ru] = r; parent[rv] = r
            cluster[r] = nxt
            size[r] = size[ru] + size[rv]
            size[nxt] = size[r]
    return merges
