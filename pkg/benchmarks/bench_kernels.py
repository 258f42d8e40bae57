"""Time the batched psi^{-1} angle solve: numba Brent vs numpy bisection.

    python benchmarks/bench_kernels.py [--points 20000] [--repeat 5]

Prints best-of-repeat wall times per backend and the max angle difference.
The numba backend is compiled (or loaded from cache) before timing.
"""
import argparse
import time

import numpy as np

from randers_sphere import _accel
from randers_sphere.isoparametric import IsoFunction
from randers_sphere.presets import example_g1, example_g2


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cases = {"g1 (S^2)": example_g1(), "g2 (S^4, a=0.3)": example_g2(4, 0.3), "g2 (S^8, a=0.6)": example_g2(8, 0.6)}
    rng = np.random.default_rng(args.seed)
    print(f"numba available: {_accel.HAVE_NUMBA}; points per batch: {args.points}")
    print(f"{'case':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |dt|':>12}")
    for name, (phi, Q) in cases.items():
        Y = rng.standard_normal((args.points, phi.dim))
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        f_np = IsoFunction(phi, Q, use_numba=False)
        t_np, a_np = best_time(lambda: f_np.psi_inverse_angle(Y), args.repeat)
        if _accel.HAVE_NUMBA:
            f_nb = IsoFunction(phi, Q, use_numba=True)
            f_nb.psi_inverse_angle(Y[:4])  # compile
            t_nb, a_nb = best_time(lambda: f_nb.psi_inverse_angle(Y), args.repeat)
            diff = float(np.abs(a_nb - a_np).max())
            print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>12.2e}")
        else:
            print(f"{name:<18}{'n/a':>12}{t_np:>12.4f}{'':>10}{'':>12}")


if __name__ == "__main__":
    main()
