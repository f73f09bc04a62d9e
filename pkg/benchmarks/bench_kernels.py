"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is checked for identical output before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from thermolock import kernels
from thermolock.adversaries import memory_oracle_weights
from thermolock.bits import pack_words
from thermolock.core import ReversiblePermutation
from thermolock.hashing import random_words
from thermolock.rng import Seeds


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    gen = np.random.default_rng(0)
    n, t = 1024, 16
    x = gen.integers(0, 2, n, dtype=np.uint8)
    y = gen.integers(0, 2, n + t - 1, dtype=np.uint8)
    xw, yw = pack_words(x), pack_words(y)
    yield "toeplitz_bits N=1024 t=16", lambda k: k.toeplitz_bits(xw, yw, n, t)

    m = 2000
    wx = (n + 63) >> 6
    wy = ((t - 1) >> 6) + wx + 1
    xs = random_words(gen, m, n, wx)
    ys = random_words(gen, m, n + t - 1, wy)
    yield f"toeplitz_batch {m} pairs N=1024 t=16", lambda k: k.toeplitz_batch(xs, ys, n, t)

    g, tt = 2, 14
    perm = ReversiblePermutation.random_table(g + tt, Seeds(0).stream("bench"))
    outs = np.ascontiguousarray(perm.apply_ints(np.arange(1 << tt, dtype=np.int64)), dtype=np.int64)
    yield "erasure_counts g=2 t=14", lambda k: k.erasure_counts(outs, g + tt, g, tt)

    weights = memory_oracle_weights(3, 3)
    yield "memory_oracle n=3 g=1 t=3", lambda k: k.memory_oracle(3, 1, weights)


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast = kernels.compiled_impl
    slow = kernels.python_impl
    if fast is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    print(f"{'case':40s} {'cython':>12s} {'python':>12s} {'speedup':>9s}")
    for name, call in cases():
        if not _same(call(fast), call(slow)):
            raise SystemExit(f"{name}: implementations disagree")
        tf = _best(lambda: call(fast), args.repeat)
        ts = _best(lambda: call(slow), args.repeat)
        print(f"{name:40s} {tf * 1e3:10.3f}ms {ts * 1e3:10.3f}ms {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
