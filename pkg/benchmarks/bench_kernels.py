"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 3]

Prints one line per kernel with the best-of-``repeat`` time for each backend
and the speedup. Both backends must return identical results; the script
stops with an error if they do not.
"""

import argparse
import timeit

import numpy as np

from heilbronnlab import _backend
from heilbronnlab.core import parse
from heilbronnlab.modarith import Frac128


def cases(n: int):
    f = parse("x^2.5 + 0.3*x^1.75 + x")
    ns = np.arange(1, n + 1, dtype=np.int64)
    floors, rems, _ = _backend.fallback.floor_batch(f.packed, ns, 1e-20)
    floors = np.asarray(floors)
    rems = np.asarray(rems)
    ok = np.ones(n, dtype=np.uint8)
    xi = Frac128.from_real(0.7071067811865476)
    floors2 = np.ascontiguousarray(np.stack([floors, floors // 3]))
    a_hi = np.array([[xi.hi, xi.lo], [xi.lo, xi.hi]], dtype=np.uint64)
    a_lo = np.array([[xi.lo, xi.hi], [xi.hi, xi.lo]], dtype=np.uint64)
    weights = np.linspace(0.5, 1.5, n)
    rng = np.random.default_rng(0)
    re, im = rng.standard_normal(n).tolist(), rng.standard_normal(n).tolist()
    return {
        "floor_batch": lambda k: k.floor_batch(f.packed, ns, 1e-20),
        "segment_min": lambda k: k.segment_min(floors, ok, xi.hi, xi.lo, 0, n),
        "segment_min_multi": lambda k: k.segment_min_multi(floors2, ok, a_hi, a_lo, 0, n),
        "segment_expsum": lambda k: k.segment_expsum(floors, rems, weights, xi.hi, xi.lo, 0.0, False, 0, n),
        "pairwise_sum": lambda k: k.pairwise_sum(re, im),
    }


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    if isinstance(a, float):
        return abs(a - b) <= 1e-9 * max(1.0, abs(a))
    return a == b


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", type=int, default=20_000, help="points per kernel call")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    compiled, fallback = _backend.kernels, _backend.fallback
    if compiled is fallback:
        raise SystemExit("compiled extension not available; build with pip install -e .")
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<20}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, call in cases(args.n).items():
        if not same(call(compiled), call(fallback)):
            raise SystemExit(f"{name}: backends disagree")
        t_c = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat))
        t_p = min(timeit.repeat(lambda: call(fallback), number=1, repeat=args.repeat))
        print(f"{name:<20}{t_c:>12.5f}{t_p:>12.5f}{t_p / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
