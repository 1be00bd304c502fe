"""Compare the compiled and the pure-numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--points 200000] [--steps 50] [--repeat 3]

Every case runs on both backends, reports the best wall time of ``--repeat``
runs and checks that the outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from ergolab.kernels import backends
from ergolab.maps import make_map


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _orbit_case(label, m, points, steps, dither):
    def run(impl):
        x0 = np.random.default_rng(0).uniform(m.lo, m.hi, points)
        key = impl.stream_key(5, 2) if dither else None
        fam, par, rights, slopes, offsets = m.kernel
        return lambda: impl.iterate_1d(x0, steps, fam, par, rights, slopes, offsets,
                                       m.lo, m.hi, key, 1e-10 if dither else 0.0, 0, 0,
                                       False)[0]
    return label, run


def _overlap_case(points):
    rng = np.random.default_rng(1)
    edges = np.linspace(0.0, 1.0, 4097)
    lo = rng.uniform(0, 0.99, points)
    hi = lo + rng.uniform(0, 0.01, points)
    col = rng.integers(0, 4096, points).astype(np.int64)

    def run(impl):
        return lambda: impl.interval_overlaps(lo, hi, col, edges)
    return "interval_overlaps", run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    impls = backends()
    cases = [
        _orbit_case("doubling", make_map("doubling"), args.points, args.steps, False),
        _orbit_case("markov3", make_map("markov3"), args.points, args.steps, False),
        _orbit_case("intermittent g=0.5", make_map("intermittent", gamma=0.5),
                    args.points, args.steps, False),
        _orbit_case("intermittent g=0.7", make_map("intermittent", gamma=0.7),
                    args.points // 10, args.steps, False),
        _orbit_case("quadratic", make_map("quadratic", a=2.0), args.points, args.steps, False),
        _orbit_case("doubling + dither", make_map("doubling"), args.points, args.steps, True),
        _overlap_case(args.points),
    ]
    names = sorted(impls)
    print(f"{'case':<22}" + "".join(f"{n + ' [s]':>14}" for n in names)
          + f"{'speedup':>10}{'equal':>8}")
    for label, run in cases:
        times, outs = {}, {}
        for n in names:
            times[n], outs[n] = _best(run(impls[n]), args.repeat)
        same = len({np.asarray(o).tobytes() for o in outs.values()}) == 1
        speed = (f"{times['python'] / times['cython']:9.1f}x" if "cython" in times
                 else f"{'n/a':>10}")
        print(f"{label:<22}" + "".join(f"{times[n]:14.4f}" for n in names)
              + f"{speed}{str(same):>8}")


if __name__ == "__main__":
    main()
