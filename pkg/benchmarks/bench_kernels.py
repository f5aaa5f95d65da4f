"""Compiled vs pure-Python kernels, plus the end-to-end effect on a translation matrix.

Run with ``python benchmarks/bench_kernels.py``.
"""

import argparse
import timeit

import numpy as np

from modspec import _kernels_py
from modspec.magnetic import MagneticModel, translation_matrix

try:
    from modspec import _kernels
except ImportError:  # extension not built
    _kernels = None


def bench(label, fn, repeat):
    t = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"{label:<44s} {t * 1e3:9.3f} ms")
    return t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=4096)
    ap.add_argument("--count", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    x = rng.uniform(-12, 12, args.nodes)
    impls = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])
    times = {}
    for name, mod in impls:
        times[("hermite", name)] = bench(
            f"hermite_table {args.count}x{args.nodes} [{name}]", lambda: mod.hermite_table(x, args.count), args.repeat
        )
    if _kernels:
        print(f"speedup hermite_table {times[('hermite', 'python')] / times[('hermite', 'cython')]:6.2f}x")
        diff = np.abs(_kernels.hermite_table(x, args.count) - _kernels_py.hermite_table(x, args.count)).max()
        print(f"max |cython - python| hermite_table: {diff:.1e}")

    def alpha():
        m = MagneticModel(2 / 5, args.count, bloch_points=1)
        translation_matrix(m, 1, 1)

    bench(f"translation_matrix M={args.count} (active backend)", alpha, args.repeat)


if __name__ == "__main__":
    main()
