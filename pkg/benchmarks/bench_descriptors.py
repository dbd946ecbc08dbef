"""Compare the compiled descriptor/linkage kernels against the pure-numpy
fallback on identical inputs.

Usage: python3 benchmarks/bench_descriptors.py [--points N] [--radius R]
"""

import argparse
import time

import numpy as np

from rockmap import PointCloud, SpatialIndex
from rockmap import _core_py

try:
    from rockmap import _core
except ImportError:
    _core = None


def timed(fn, *args, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--radius", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pts = rng.uniform(0, 2.0, (args.points, 3))
    cloud = PointCloud(pts)
    index = SpatialIndex(cloud)

    t0 = time.perf_counter()
    indptr, indices = index.radius_all(args.radius)
    t_nbr = time.perf_counter() - t0
    mean_nbrs = indptr[-1] / args.points
    print(f"cloud: {args.points} points, radius {args.radius} m, "
          f"{mean_nbrs:.1f} neighbours/point (query: {t_nbr:.2f} s)")

    t_py, (ev_py, n_py, _) = timed(
        _core_py.neighborhood_eigen, pts, indptr, indices, repeat=2)
    print(f"neighborhood_eigen  numpy fallback : {t_py:8.3f} s")
    if _core is not None:
        t_c, (ev_c, n_c, _) = timed(
            _core.neighborhood_eigen, pts, indptr, indices, repeat=2)
        dev = float(np.abs(ev_c - ev_py).max())
        dn = float(np.abs(n_c - n_py).max())
        print(f"neighborhood_eigen  compiled       : {t_c:8.3f} s  "
              f"({t_py / t_c:.1f}x; max |d| eig {dev:.1e}, normal {dn:.1e})")
    else:
        print("neighborhood_eigen  compiled       : unavailable")

    # single linkage on a random MST-sized edge list
    n = args.points
    u = np.arange(n - 1, dtype=np.intp)
    v = np.arange(1, n, dtype=np.intp)
    w = np.sort(rng.uniform(0, 1, n - 1))
    t_py, m_py = timed(_core_py.single_linkage, u, v, w, n)
    print(f"single_linkage      numpy fallback : {t_py:8.3f} s")
    if _core is not None:
        t_c, m_c = timed(_core.single_linkage, u, v, w, n)
        same = np.array_equal(m_py, m_c)
        print(f"single_linkage      compiled       : {t_c:8.3f} s  "
              f"({t_py / t_c:.1f}x; identical: {same})")


if __name__ == "__main__":
    main()
