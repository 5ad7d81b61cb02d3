"""Compare the Cython and numpy backends on closed-loop sized problems.

    python benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from bimorph_ao import hinf, kernels, sim
from bimorph_ao.discretize import white_noise
from bimorph_ao.plant import build_default_plant


def loop_problem(steps):
    plant, _, _ = build_default_plant()
    K = hinf.gamma_bisect(plant, 1e-3, 10.0)["controller"]
    loop = sim.build_loop(plant, K)
    Phi, Qd = white_noise(loop.A, loop.B @ loop.B.T, 1e-4)
    rng = np.random.default_rng(0)
    eta = rng.standard_normal((steps, Phi.shape[0])) @ kernels.noise_factor(Qd).T
    return Phi, eta, np.zeros(Phi.shape[0]), loop.W_res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    Phi, eta, x0, W = loop_problem(args.steps)
    X = kernels.propagate(Phi, eta, x0, backend="python")
    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    print(f"state dimension {Phi.shape[0]}, {args.steps} steps, best of {args.repeat}")
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    for name, fn in (("propagate", lambda b: kernels.propagate(Phi, eta, x0, backend=b)),
                     ("quadratic_norms", lambda b: kernels.quadratic_norms(X, W, backend=b))):
        times = {}
        for b in backends:
            times[b] = min(timeit.repeat(lambda: fn(b if b == "python" else None),
                                         number=1, repeat=args.repeat))
        line = ", ".join(f"{b} {t * 1e3:8.2f} ms" for b, t in times.items())
        if len(times) == 2:
            line += f"  (speedup {times['python'] / times['cython']:.1f}x)"
        print(f"{name:>16}: {line}")
    if len(backends) == 2:
        diff = np.max(np.abs(kernels.propagate(Phi, eta, x0) - X)) / np.max(np.abs(X))
        print(f"max relative difference between backends: {diff:.1e}")


if __name__ == "__main__":
    main()
