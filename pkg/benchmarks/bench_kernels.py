"""Benchmark the jit-compiled hot kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--repeats 5]

Builds a realistic 2-D window workload (the degree-2 character of random
banded operators) and times coalesce and the degree-2 path products on both
paths, plus the end-to-end character chain.  Run with COARSELAB_NO_NUMBA=1 to
check the fallback in isolation.
"""

import argparse
import time

import numpy as np

from coarselab import _accel, cyclic, opalg, spaces


def _timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    print(f"numba path active: {_accel.USE_NUMBA}")
    w = spaces.make_window("zd", 32, 12, dim=2)
    ops = tuple(opalg.random_banded(w, (1, j), prop=2, decay=0.7, density=0.5)
                for j in range(3))
    A1 = ops[1].mat.tocoo()
    A2 = ops[2].mat.tocsr()
    A0 = ops[0].mat.tocsc()
    pp_args = (A1.row.astype(np.int64), A1.col.astype(np.int64),
               A1.data.astype(np.complex128),
               A2.indptr.astype(np.int64), A2.indices.astype(np.int64),
               A2.data.astype(np.complex128),
               A0.indptr.astype(np.int64), A0.indices.astype(np.int64),
               A0.data.astype(np.complex128))

    # warm the jit cache before timing
    _accel.path_products_deg2(*pp_args)

    t_jit, (tt, vv) = _timeit(lambda: _accel.path_products_deg2(*pp_args),
                              args.repeats)
    t_np, _ = _timeit(lambda: _accel.path_products_deg2_numpy(*pp_args),
                      args.repeats)
    print(f"path_products_deg2   nnz={len(vv):7d}   "
          f"active: {t_jit * 1e3:8.2f} ms   numpy: {t_np * 1e3:8.2f} ms   "
          f"speedup x{t_np / max(t_jit, 1e-12):.1f}")

    rng = np.random.default_rng(0)
    big_t = np.repeat(tt, 6, axis=0)[rng.permutation(6 * len(vv))]
    big_v = np.tile(vv, 6)
    _accel.coalesce(big_t, big_v)
    t_jit, _ = _timeit(lambda: _accel.coalesce(big_t, big_v), args.repeats)
    t_np, _ = _timeit(lambda: _accel.coalesce_numpy(big_t, big_v),
                      args.repeats)
    print(f"coalesce             rows={len(big_v):6d}   "
          f"active: {t_jit * 1e3:8.2f} ms   numpy: {t_np * 1e3:8.2f} ms   "
          f"speedup x{t_np / max(t_jit, 1e-12):.1f}")

    tensor = cyclic.CyclicTensor(2, [(1.0, ops)])
    t_chi, _ = _timeit(lambda: cyclic.chi_arrays(tensor), args.repeats)
    t_check, _ = _timeit(lambda: cyclic.chain_map_check(tensor), args.repeats)
    print(f"chi (degree 2, 2-D window W=32):      {t_chi * 1e3:8.2f} ms")
    print(f"chain_map_check (same tensor):        {t_check * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
