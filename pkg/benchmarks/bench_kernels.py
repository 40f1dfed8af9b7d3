"""Times the hot-loop kernels on the numba and numpy backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
The first numba call per kernel pays JIT compilation; a warmup run is
excluded from the timings.
"""

import argparse
import random
import time

import numpy as np

from reviewlens import kernels

WORDS = [
    "zipper", "strap", "seam", "battery", "motor", "filter", "screen", "sole",
    "collar", "buckle", "cord", "nozzle", "sticks", "broke", "faded", "ripped",
    "works", "rattles", "leaks", "shines", "great", "poor", "tight", "loose",
]


def make_workloads(seed=0):
    rng = random.Random(seed)
    nrng = np.random.default_rng(seed)
    texts = [
        " ".join(rng.choice(WORDS) for _ in range(rng.randint(3, 8))) for _ in range(2000)
    ]
    cps_list = [
        np.frombuffer(t.encode("utf-32-le"), dtype=np.uint32) for t in texts
    ]
    vectors = nrng.normal(size=(500, 64))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    groups = nrng.integers(0, 8, size=500).astype(np.int64)
    sims = nrng.uniform(-1, 1, size=200_000)
    offsets = np.linspace(0, 200_000, 2001).astype(np.int64)
    return {
        "hash_embed x2000": lambda: [kernels.hash_embed(c, 7, 256) for c in cps_list],
        "suppress_later_mask 500x64": lambda: kernels.suppress_later_mask(vectors, 0.3),
        "cross_group_remove 500x64": lambda: kernels.cross_group_remove_mask(vectors, groups, 0.3),
        "greedy_labels 500x64": lambda: kernels.greedy_threshold_labels(vectors, 0.2, 3),
        "topk_means 2000 slices": lambda: kernels.topk_means(sims, offsets, 5),
    }


def best_of(fn, repeat):
    fn()  # warmup (JIT compile on the numba backend)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = ["numpy"]
    try:
        kernels.use_backend("numba")
        backends.append("numba")
    except Exception as exc:
        print(f"numba backend unavailable ({exc}); timing numpy only")

    results = {}
    for backend in backends:
        kernels.use_backend(backend)
        workloads = make_workloads()
        results[backend] = {
            name: best_of(fn, args.repeat) for name, fn in workloads.items()
        }

    width = max(len(name) for name in next(iter(results.values())))
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name in results[backends[0]]:
        row = f"{name:<{width}}  "
        for backend in backends:
            row += f"{results[backend][name] * 1000:>10.2f}ms"
        if len(backends) == 2:
            row += f"{results['numpy'][name] / results['numba'][name]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
