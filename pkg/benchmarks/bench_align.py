"""Time the compiled and pure-Python alignment kernels on random token ids.

    python3 benchmarks/bench_align.py --lengths 10 50 200 --pairs 200
"""

import argparse
import time

import numpy as np

from aode.eval import _align_py

try:
    from aode.eval import _calign
except ImportError:  # extension not built
    _calign = None


def bench(kernel, pairs, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for ref, hyp in pairs:
            kernel.align_counts(ref, hyp)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lengths", type=int, nargs="+", default=[10, 30, 100, 300])
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--vocab", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'length':>7} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for n in args.lengths:
        pairs = []
        for _ in range(args.pairs):
            ref = rng.integers(0, args.vocab, n).tolist()
            hyp = [t if rng.random() > 0.2 else int(rng.integers(0, args.vocab)) for t in ref]
            pairs.append((ref, hyp))
        if _calign is not None:
            for ref, hyp in pairs[:20]:
                assert _calign.align_counts(ref, hyp) == _align_py.align_counts(ref, hyp)
        py = bench(_align_py, pairs, args.repeat)
        if _calign is None:
            print(f"{n:>7} {1e3 * py:>10.2f} {'n/a':>12} {'n/a':>8}")
            continue
        c = bench(_calign, pairs, args.repeat)
        print(f"{n:>7} {1e3 * py:>10.2f} {1e3 * c:>12.2f} {py / c:>7.1f}x")


if __name__ == "__main__":
    main()
