"""Compiled vs numpy kernels on workloads the size of the bundled scenarios.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the best wall time per kernel and backend, the speedup, and the
largest disagreement between the two backends.
"""
import argparse
import time

import numpy as np

from manugrip._kernels import _fallback

try:
    from manugrip._kernels import _core
except ImportError:
    _core = None


def _surface(rng, n_tris, scale=0.03):
    base = rng.uniform(-scale, scale, size=(n_tris, 1, 3))
    return base + rng.normal(scale=scale / 10, size=(n_tris, 3, 3))


def workloads(rng):
    tris = _surface(rng, 800)
    pts = rng.uniform(-0.03, 0.03, size=(600, 3))
    pg = rng.integers(-1, 2, size=len(pts))
    tg = rng.integers(-1, 2, size=len(tris))
    F = np.eye(3) + rng.normal(scale=0.05, size=(400, 3, 3))
    segs = rng.uniform(-0.05, 0.05, size=(14 * 32, 3))
    return {
        "pairs_within": lambda k: k.pairs_within(pts, pg, tris, tg, 4e-3)[2],
        "nearest_triangle": lambda k: k.nearest_triangle(segs, tris[:320])[0],
        "min_pair_sqdist": lambda k: np.array([k.min_pair_sqdist(pts, pg, tris, tg)]),
        "ray_crossings": lambda k: k.ray_crossings(pts[:200], np.array([0.5773, 0.5774, 0.5775]), tris),
        "snh_batch": lambda k: k.snh_batch(F, 3.4e8, 2.1e9, 1.16, True)[2],
    }


def best_of(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    jobs = workloads(np.random.default_rng(args.seed))
    print(f"{'kernel':<18}{'numpy ms':>11}{'compiled ms':>13}{'speedup':>9}{'max diff':>11}")
    for name, job in jobs.items():
        t_py, r_py = best_of(lambda: job(_fallback), args.repeat)
        if _core is None:
            print(f"{name:<18}{t_py * 1e3:>11.2f}{'n/a':>13}")
            continue
        t_c, r_c = best_of(lambda: job(_core), args.repeat)
        diff = float(np.abs(r_py - r_c).max()) if r_py.size else 0.0
        print(f"{name:<18}{t_py * 1e3:>11.2f}{t_c * 1e3:>13.2f}{t_py / t_c:>8.1f}x{diff:>11.1e}")
    if _core is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace`")


if __name__ == "__main__":
    main()
