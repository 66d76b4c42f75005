"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--nodes 5000] [--d 256] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from lpgnn_lab import kernels
from lpgnn_lab.graph import SyntheticConfig, generate_synthetic


def cases(nodes, d, seed):
    ds = generate_synthetic(SyntheticConfig(num_nodes=nodes, d=d, intra_edge_prob=20 / nodes,
                                            inter_edge_prob=2 / nodes), seed)
    rng = np.random.default_rng(seed)
    probs = rng.random((nodes, d))
    us, ub = rng.random((nodes, d)), rng.random((nodes, d))
    g = ds.graph
    targets = rng.integers(0, nodes, size=min(nodes, 500))
    m = max(1, d // 8)
    return {
        "encode_rows": lambda impl: kernels.encode_rows(probs, us, ub, m, impl=impl),
        "mean_aggregate": lambda impl: kernels.mean_aggregate(g.indptr, g.indices, ds.features, impl=impl),
        "closed_neighborhood_mean": lambda impl: kernels.closed_neighborhood_mean(
            g.indptr, g.indices, ds.features, targets, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=5000)
    ap.add_argument("--d", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled kernels not built; only the fallback is available")
    print(f"nodes={args.nodes} d={args.d}, best of {args.repeat} (ms)")
    print(f"{'kernel':<26}" + "".join(f"{name:>10}" for name in impls) + f"{'speedup':>10}")
    for name, fn in cases(args.nodes, args.d, args.seed).items():
        best = {}
        for impl_name, impl in impls.items():
            fn(impl)  # warm up
            best[impl_name] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) * 1e3
        speedup = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{name:<26}" + "".join(f"{best[k]:>10.2f}" for k in impls) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
