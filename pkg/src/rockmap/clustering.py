"""Density clustering primitives: a from-scratch HDBSCAN and a Euclidean
connected-component segmenter.

The HDBSCAN pipeline is core distances -> mutual reachability -> minimum
spanning tree -> single-linkage hierarchy -> condensed tree -> excess-of-mass
cluster extraction, with noise labelled ``NOISE``. Ties are broken by
(distance, lower index) so results are invariant to sample order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import minimum_spanning_tree as _sparse_mst
from scipy.spatial import cKDTree

from .backend import single_linkage
from .errors import ArgumentError

NOISE = -1

# Above this sample count the exact O(N^2) Prim MST is replaced by an MST on
# a mutual-reachability kNN graph (stitched to connectivity), which is exact
# in practice for density-clustered data but not guaranteed minimal.
DENSE_MST_LIMIT = 4096


@dataclass(frozen=True)
class ClusterLabels:
    """Per-sample cluster ids (>= 0) with NOISE (-1) for unclustered samples."""

    labels: np.ndarray
    cluster_count: int

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


# --------------------------------------------------------------- HDBSCAN

def hdbscan(samples, min_cluster_size: int, min_samples: int) -> ClusterLabels:
    """Cluster d-dimensional samples; samples in no dense cluster are NOISE."""
    if min_cluster_size < 2:
        raise ArgumentError("min_cluster_size must be >= 2")
    if min_samples < 1:
        raise ArgumentError("min_samples must be >= 1")
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(samples, dtype=np.float64)))
    n = x.shape[0]
    if n < min_cluster_size:
        return ClusterLabels(np.full(n, NOISE, dtype=np.intp), 0)

    core = core_distances(x, min_samples)
    eu, ev, ew = mutual_reachability_mst(x, core)
    order = np.lexsort((np.minimum(eu, ev), ew))
    eu, ev, ew = eu[order], ev[order], ew[order]
    merges = single_linkage(eu, ev, ew, n)
    parent_arr, child_arr, lam_arr, size_arr = _condense_tree(merges, n, min_cluster_size)
    selected = _excess_of_mass(parent_arr, child_arr, lam_arr, size_arr, n)
    labels = _extract_labels(parent_arr, child_arr, selected, n)
    return labels


def core_distances(x: np.ndarray, min_samples: int, chunk: int = 65536) -> np.ndarray:
    """Distance to the min_samples-th neighbour (the sample itself counts)."""
    n = x.shape[0]
    k = min(min_samples, n)
    tree = cKDTree(x)
    core = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d, _ = tree.query(x[lo:hi], k=k, workers=-1)
        core[lo:hi] = d if k == 1 else d[:, -1]
    return core


def mutual_reachability_mst(x: np.ndarray, core: np.ndarray):
    """MST edges (u, v, w) of the mutual reachability graph
    w = max(core_u, core_v, dist_uv)."""
    n = x.shape[0]
    if n <= DENSE_MST_LIMIT:
        return _prim_dense(x, core)
    return _mst_knn_graph(x, core)


def _prim_dense(x: np.ndarray, core: np.ndarray):
    """Exact Prim over the implicit dense mutual-reachability graph."""
    n = x.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.intp)
    eu = np.empty(n - 1, dtype=np.intp)
    ev = np.empty(n - 1, dtype=np.intp)
    ew = np.empty(n - 1)
    current = 0
    in_tree[0] = True
    for k in range(n - 1):
        d = np.linalg.norm(x - x[current], axis=1)
        w = np.maximum(np.maximum(core, core[current]), d)
        w[in_tree] = np.inf
        closer = w < best
        best[closer] = w[closer]
        best_from[closer] = current
        best[in_tree] = np.inf
        nxt = int(np.argmin(best))  # argmin takes the lowest index on ties
        eu[k] = best_from[nxt]
        ev[k] = nxt
        ew[k] = best[nxt]
        in_tree[nxt] = True
        current = nxt
    return eu, ev, ew


def _mst_knn_graph(x: np.ndarray, core: np.ndarray, k_graph: int = 16):
    """MST on a mutual-reachability kNN graph, stitched across components."""
    n = x.shape[0]
    k = min(n - 1, max(k_graph, 2))
    tree = cKDTree(x)
    d, idx = tree.query(x, k=k + 1, workers=-1)
    u = np.repeat(np.arange(n, dtype=np.intp), k)
    v = idx[:, 1:].ravel().astype(np.intp)
    w = np.maximum(np.maximum(core[u], core[v]), d[:, 1:].ravel())
    # sparse graphs treat 0 as "no edge"; keep genuine zero-weight edges
    w = np.maximum(w, 1e-300)
    # canonicalize to u < v and drop duplicates (weights are symmetric)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys = lo * n + hi
    _, uniq = np.unique(keys, return_index=True)
    graph = coo_matrix((w[uniq], (lo[uniq], hi[uniq])), shape=(n, n)).tocsr()

    ncomp, comp = _cc(graph, directed=False)
    extra_u, extra_v, extra_w = [], [], []
    while ncomp > 1:
        # bridge the smallest component to its nearest outside neighbour
        sizes = np.bincount(comp)
        sizes[sizes == 0] = n + 1  # labels emptied by earlier merges
        small = int(np.argmin(sizes))
        inside = np.flatnonzero(comp == small)
        outside = np.flatnonzero(comp != small)
        out_tree = cKDTree(x[outside])
        dd, jj = out_tree.query(x[inside], k=1, workers=-1)
        a = int(np.argmin(dd))
        i, j = inside[a], outside[jj[a]]
        wij = max(core[i], core[j], float(dd[a]))
        extra_u.append(i)
        extra_v.append(j)
        extra_w.append(max(wij, 1e-300))
        comp[comp == small] = comp[j]
        ncomp -= 1
    if extra_u:
        graph = graph + coo_matrix(
            (extra_w, (extra_u, extra_v)), shape=(n, n)
        ).tocsr()
    mst = _sparse_mst(graph).tocoo()
    return mst.row.astype(np.intp), mst.col.astype(np.intp), mst.data


def _condense_tree(merges: np.ndarray, n: int, min_cluster_size: int):
    """Condense the single-linkage hierarchy: subclusters smaller than
    min_cluster_size fall out of their parent as points."""
    root = 2 * n - 2
    num_nodes = 2 * n - 1

    def children(node):
        row = merges[node - n]
        return int(row[0]), int(row[1]), float(row[2])

    def node_size(node):
        return 1 if node < n else int(merges[node - n][3])

    def leaves(node):
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                l, r, _ = children(cur)
                stack.append(l)
                stack.append(r)
        return out

    relabel = np.empty(num_nodes, dtype=np.intp)
    relabel[root] = n
    next_label = n + 1
    parent_out, child_out, lam_out, size_out = [], [], [], []
    ignore = np.zeros(num_nodes, dtype=bool)

    for node in range(root, n - 1, -1):  # top-down: children have smaller ids
        left, right, height = children(node)
        if ignore[node]:
            if left >= n:
                ignore[left] = True
            if right >= n:
                ignore[right] = True
            continue
        lam = 1.0 / height if height > 0.0 else np.inf
        ls, rs = node_size(left), node_size(right)
        label = relabel[node]
        if ls >= min_cluster_size and rs >= min_cluster_size:
            for ch, sz in ((left, ls), (right, rs)):
                relabel[ch] = next_label
                next_label += 1
                parent_out.append(label)
                child_out.append(relabel[ch])
                lam_out.append(lam)
                size_out.append(sz)
        elif ls < min_cluster_size and rs < min_cluster_size:
            for ch in (left, right):
                for p in leaves(ch):
                    parent_out.append(label)
                    child_out.append(p)
                    lam_out.append(lam)
                    size_out.append(1)
                if ch >= n:
                    ignore[ch] = True
        else:
            keep, drop = (left, right) if ls >= min_cluster_size else (right, left)
            relabel[keep] = label
            for p in leaves(drop):
                parent_out.append(label)
                child_out.append(p)
                lam_out.append(lam)
                size_out.append(1)
            if drop >= n:
                ignore[drop] = True

    return (
        np.asarray(parent_out, dtype=np.intp),
        np.asarray(child_out, dtype=np.intp),
        np.asarray(lam_out),
        np.asarray(size_out, dtype=np.int64),
    )


def _excess_of_mass(parent_arr, child_arr, lam_arr, size_arr, n):
    """Select condensed clusters by stability; the root is never selected."""
    if parent_arr.size == 0:
        return set()
    # birth lambda: the lambda at which a cluster splits off its parent
    births = {}
    for p, c, lam in zip(parent_arr, child_arr, lam_arr):
        if c >= n:
            births[int(c)] = float(lam)
    root = n
    births[root] = 0.0
    cluster_ids = sorted({int(p) for p in parent_arr})
    stability = {c: 0.0 for c in cluster_ids}
    for p, lam, sz in zip(parent_arr, lam_arr, size_arr):
        lam = min(float(lam), 1e308)
        stability[int(p)] += (lam - births[int(p)]) * float(sz)

    cluster_children = {c: [] for c in cluster_ids}
    for p, c in zip(parent_arr, child_arr):
        if c >= n:
            cluster_children[int(p)].append(int(c))
            if int(c) not in cluster_children:
                cluster_children[int(c)] = []

    is_cluster = {c: True for c in cluster_children}
    for node in sorted(cluster_children, reverse=True):
        if node == root:
            continue
        subtree = sum(stability[ch] for ch in cluster_children[node])
        if subtree > stability[node]:
            is_cluster[node] = False
            stability[node] = subtree
        else:
            # node wins: deselect every descendant cluster
            stack = list(cluster_children[node])
            while stack:
                ch = stack.pop()
                is_cluster[ch] = False
                stack.extend(cluster_children[ch])
    is_cluster[root] = False
    return {c for c, keep in is_cluster.items() if keep}


def _extract_labels(parent_arr, child_arr, selected, n) -> ClusterLabels:
    labels = np.full(n, NOISE, dtype=np.intp)
    if not selected:
        return ClusterLabels(labels, 0)
    parent_of = {}
    for p, c in zip(parent_arr, child_arr):
        if c >= n:
            parent_of[int(c)] = int(p)

    cache = {}

    def owner(cluster):
        if cluster in cache:
            return cache[cluster]
        cur, chain = cluster, []
        found = NOISE
        while True:
            if cur in cache:
                found = cache[cur]
                break
            chain.append(cur)
            if cur in selected:
                found = cur
                break
            if cur not in parent_of:
                break
            cur = parent_of[cur]
        for c in chain:
            cache[c] = found
        return found

    raw = np.full(n, NOISE, dtype=np.intp)
    for p, c in zip(parent_arr, child_arr):
        if c < n:
            raw[c] = owner(int(p))

    # deterministic ids: order clusters by their smallest member index
    out_ids = {}
    for i in range(n):
        r = raw[i]
        if r != NOISE and r not in out_ids:
            out_ids[r] = len(out_ids)
        if r != NOISE:
            labels[i] = out_ids[r]
    return ClusterLabels(labels, len(out_ids))


# -------------------------------------------- Euclidean connected components

def euclidean_components(cloud, members, cell: float) -> ClusterLabels:
    """Connected components of the "within distance <= cell" graph over the
    given member indices of a cloud. Labels follow first-occurrence order."""
    if cell <= 0:
        raise ArgumentError(f"cell must be positive, got {cell}")
    members = np.asarray(members, dtype=np.intp)
    m = members.shape[0]
    if m == 0:
        return ClusterLabels(np.empty(0, dtype=np.intp), 0)
    pts = cloud.points[members] if hasattr(cloud, "points") else np.asarray(cloud)[members]
    tree = cKDTree(pts)
    pairs = tree.query_pairs(cell, output_type="ndarray")
    if pairs.size:
        graph = coo_matrix(
            (np.ones(pairs.shape[0], dtype=np.int8), (pairs[:, 0], pairs[:, 1])),
            shape=(m, m),
        )
        _, comp = _cc(graph, directed=False)
    else:
        comp = np.arange(m)
    # relabel by first occurrence so labels are deterministic
    _, first = np.unique(comp, return_index=True)
    remap = np.empty(comp.max() + 1, dtype=np.intp)
    remap[comp[np.sort(first)]] = np.arange(len(first))
    return ClusterLabels(remap[comp], len(first))
