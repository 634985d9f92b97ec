"""Time the compiled event loop against the numpy fallback.

    python benchmarks/bench_core.py --N 100 400 1600 --runs 20 --t-end 1
"""
import argparse
import time

import numpy as np

from topoalign import _fallback
from topoalign.kernel import make_kernel
from topoalign.particle_sim import run, sample_initial

try:
    from topoalign import _core
except ImportError:
    _core = None


def bench(backend, N, runs, t_end, spec, dim):
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for r in range(runs):
            s = sample_initial(N, "uniform_x_gauss_v", 0, dim=dim, stream=r)
            run(s, spec, t_end, record_events=False, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, nargs="+", default=[100, 400, 1600])
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--kernel", default="paper_example")
    args = p.parse_args(argv)
    spec = make_kernel(args.kernel)
    print(f"{'N':>6} {'events':>9} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for N in args.N:
        t_py = bench(_fallback, N, args.runs, args.t_end, spec, args.dim)
        if _core is None:
            print(f"{N:>6} {N * args.runs * args.t_end:>9.0f} {t_py:>10.3f} {'n/a':>10} {'n/a':>8}")
            continue
        t_cy = bench(_core, N, args.runs, args.t_end, spec, args.dim)
        print(f"{N:>6} {N * args.runs * args.t_end:>9.0f} {t_py:>10.3f} {t_cy:>10.3f} "
              f"{t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
