"""Compiled vs numpy star-product kernel on random Weyl elements.

    python benchmarks/bench_star.py [--repeat 5] [--terms 8 16 32]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from polquant._kernels import _star_py
from polquant.weyl_algebra import (
    Geometry,
    Truncation,
    contraction_patterns,
    falling_table,
    random_element,
    wedge_sign_table,
)

try:
    from polquant._kernels import _star_ext
except ImportError:  # not built
    _star_ext = None


def _args(a, b, trunc):
    geom = a.geometry
    rmax = int(min(a.cu.sum(1).max(), b.u.sum(1).max()))
    return (
        a.rows, a.coefs, b.rows, b.coefs, geom.n,
        *contraction_patterns(geom.omega, rmax),
        wedge_sign_table(geom.n), falling_table(trunc.max_total_weight),
        trunc.max_total_weight, trunc.max_hbar,
    )


def best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--terms", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--seed", type=int, default=0)
    opts = ap.parse_args()

    trunc = Truncation(6, 4)
    rng = np.random.default_rng(opts.seed)
    print(f"{'n':>2} {'terms':>6} {'pairs':>7} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for n in (1, 2):
        geom = Geometry.torus(n)
        for nt in opts.terms:
            a, b = (random_element(geom, rng, nterms=nt, trunc=trunc) for _ in range(2))
            args = _args(a, b, trunc)
            t_py = best_of(_star_py.star_rows, args, opts.repeat)
            if _star_ext is not None:
                t_cy = best_of(_star_ext.star_rows, args, opts.repeat)
                r1, c1 = _star_py.star_rows(*args)
                r2, c2 = _star_ext.star_rows(*args)
                # raw outputs are unmerged; compare after summing per row key
                def merged(r, c):
                    out = {}
                    for row, v in zip(map(tuple, r), c):
                        out[row] = out.get(row, 0) + v
                    return out
                m1, m2 = merged(r1, c1), merged(r2, c2)
                assert m1.keys() == m2.keys() and all(abs(m1[k] - m2[k]) < 1e-12 * max(1, abs(m1[k])) for k in m1)
                cy, sp = f"{t_cy * 1e3:12.3f}", f"{t_py / t_cy:8.1f}"
            else:
                cy, sp = f"{'n/a':>12}", f"{'n/a':>8}"
            print(f"{n:>2} {nt:>6} {len(a) * len(b):>7} {t_py * 1e3:12.3f} {cy} {sp}")


if __name__ == "__main__":
    main()
