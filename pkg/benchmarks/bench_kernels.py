"""Compare the numba and numpy mining kernels.

Times the per-search-node statistics kernel on a synthetic activation matrix
and a full mine_best call under both backends. Run:

    python3 benchmarks/bench_kernels.py [--rows 20000] [--width 20]
"""

import argparse
import time

import numpy as np

from actmine import _kernels
from actmine.background import fit
from actmine.gcn import ActivationMatrix
from actmine.mining import MinerParams, mine_best


def synthetic_matrix(rng, n_graphs, rows_per_graph, k):
    blocks = []
    for i in range(n_graphs):
        base = rng.random(k) < 0.4
        rows = (rng.random((rows_per_graph, k)) < 0.3) | base
        if i % 2:  # plant weak class structure
            rows[:, : k // 3] |= rng.random((rows_per_graph, k // 3)) < 0.4
        blocks.append(rows.astype(np.uint8))
    decisions = [i % 2 for i in range(n_graphs)]
    return ActivationMatrix.from_graph_bits(
        1, blocks, decisions, tuple(f"g{i}" for i in range(n_graphs)))


def time_kernel(fn, packed, starts, nlp, masks, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for a, u in masks:
            fn(packed, starts, nlp, np.uint64(a), np.uint64(u))
        best = min(best, time.perf_counter() - t0)
    return best / len(masks)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--width", type=int, default=20)
    ap.add_argument("--graphs", type=int, default=800)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    rows_per_graph = max(1, args.rows // args.graphs)
    act = synthetic_matrix(rng, args.graphs, rows_per_graph, args.width)
    bg = fit(act)
    print(f"matrix: {act.n_rows} rows x {act.width} components, "
          f"{act.n_graphs} graphs")

    packed = _kernels.pack_rows(act.bits)
    nlp = np.ascontiguousarray(bg.neglog2())
    full = (1 << act.width) - 1
    masks = []
    for _ in range(50):
        a = int(rng.integers(0, full + 1))
        masks.append((a, a | (int(rng.integers(0, full + 1)) & ~a)))

    numba_fn = _kernels._build_numba()
    numba_fn(packed, act.seg_starts, nlp, np.uint64(0), np.uint64(full))  # jit
    t_np = time_kernel(_kernels.node_stats_numpy, packed, act.seg_starts,
                       nlp, masks)
    t_nb = time_kernel(numba_fn, packed, act.seg_starts, nlp, masks)
    print(f"node_stats   numpy: {t_np * 1e6:9.1f} us/call")
    print(f"node_stats   numba: {t_nb * 1e6:9.1f} us/call "
          f"({t_np / t_nb:.1f}x)")

    params = MinerParams(min_si=0.0, nb_patterns=1)
    results = {}
    for name, fn in (("numpy", _kernels.node_stats_numpy),
                     ("numba", numba_fn)):
        _kernels.node_stats = fn
        stats = {}
        t0 = time.perf_counter()
        rule = mine_best(act, fit(act), 1, params, 0.0, stats=stats)
        dt = time.perf_counter() - t0
        results[name] = (dt, stats.get("visited"), rule.score if rule else None)
        print(f"mine_best    {name}: {dt:9.3f} s  "
              f"({stats.get('visited')} nodes)")
    s_np, s_nb = results["numpy"][2], results["numba"][2]
    assert s_np == s_nb or abs(s_np - s_nb) < 1e-9, "backends disagree"
    print(f"speedup: {results['numpy'][0] / results['numba'][0]:.1f}x, "
          "identical results")


if __name__ == "__main__":
    main()
