"""Compiled kernels versus the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--n 20000] [--D 1024] [--d 32] [--repeats 5]

Times trajectory sampling and the projected trace accumulation with each
backend on identical inputs, checks the outputs agree, and prints a table.
Set ``PROJLSTD_NO_EXT=1`` at install time to build without the extension;
the compiled column is then skipped.
"""

import argparse
import statistics
import time

import numpy as np
from threadpoolctl import threadpool_limits

from projlstd import _rng
from projlstd.kernels import _reference

try:
    from projlstd.kernels import _fast
except ImportError:
    _fast = None


def _time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--S", type=int, default=256, help="number of chain states")
    ap.add_argument("--D", type=int, default=1024)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    rng = _rng.stream(0, _rng.VERIFY, 99)
    P = rng.random((args.S, args.S))
    cdf = np.ascontiguousarray(np.cumsum(P / P.sum(axis=1, keepdims=True), axis=1))
    u = rng.random(args.n - 1)
    Phi = rng.uniform(-1, 1, (args.S, args.D))
    H = rng.standard_normal((args.d, args.D)) / np.sqrt(args.d)
    r = rng.standard_normal(args.S)

    backends = {"python": _reference}
    if _fast is not None:
        backends["compiled"] = _fast

    results = {}
    with threadpool_limits(1):
        for name, mod in backends.items():
            states = mod.sample_path(cdf, u, 0)
            rewards = r[states]
            t_path = _time(lambda: mod.sample_path(cdf, u, 0), args.repeats)
            t_acc = _time(lambda: mod.lstd_accumulate(Phi, H, states, rewards, 0.9, 0.5),
                          args.repeats)
            results[name] = (t_path, t_acc, states, mod.lstd_accumulate(Phi, H, states, rewards, 0.9, 0.5))

    print(f"n={args.n} |X|={args.S} D={args.D} d={args.d} (median of {args.repeats})")
    print(f"{'backend':<10}{'sample_path [s]':>18}{'accumulate [s]':>18}")
    for name, (tp, ta, _, _) in results.items():
        print(f"{name:<10}{tp:>18.5f}{ta:>18.5f}")
    if "compiled" in results:
        py, cc = results["python"], results["compiled"]
        assert np.array_equal(py[2], cc[2]), "sample paths differ"
        diff = max(np.max(np.abs(py[3][0] - cc[3][0])), np.max(np.abs(py[3][1] - cc[3][1])))
        print(f"speedup: sample_path {py[0] / cc[0]:.1f}x, accumulate {py[1] / cc[1]:.1f}x; "
              f"max |difference| {diff:.2e}")


if __name__ == "__main__":
    main()
