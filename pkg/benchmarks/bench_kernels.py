"""Compare the compiled and pure-Python kernel backends.

Each kernel is timed on identical inputs under both backends and the results are
checked for agreement. With ``--scenario`` the default closed-loop run is also
timed end to end in a fresh interpreter per backend (the backend is fixed at
import, so the pure-Python run sets ``FRACPDE_PURE_PYTHON=1``).

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scenario]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fracpde import kernels
from fracpde.fdm import flux_weights
from fracpde.fractional import l1_weights


def cases(n):
    rng = np.random.default_rng(0)
    f = rng.standard_normal(n)
    b = l1_weights(0.5, n)
    c0, c1 = rng.random(n), rng.random(n)
    w = flux_weights(0.5, n, 1.0 / (n - 1))
    z = np.linspace(-5.0, 5.0, n)
    s = np.linspace(0.0, 40.0, 4001)
    gw = np.full(s.size, s[1] - s[0])
    gre, gim = np.exp(-s**1.5), -0.3 * np.exp(-s**1.5)
    return {
        "l1_caputo": (f, b, 0.7),
        "product_convolution": (f, c0, c1),
        "flux_matrix": (w, n),
        "volterra_poly": (f, 1.0 / (n - 1), 2),
        "green_sum": (z, s, gw, gre, gim),
    }


def bench_kernels(n, repeat):
    py = kernels.backend_module("python")
    cy = kernels.backend_module("cython") if kernels.COMPILED_AVAILABLE else None
    print(f"kernel timings, n = {n}, best of {repeat} (ms)")
    print(f"{'kernel':22s}{'python':>12s}{'cython':>12s}{'speedup':>10s}{'max diff':>12s}")
    for name, args in cases(n).items():
        fpy = getattr(py, name)
        t_py = min(timeit.repeat(lambda: fpy(*args), number=1, repeat=repeat)) * 1e3
        if cy is None:
            print(f"{name:22s}{t_py:12.3f}{'n/a':>12s}")
            continue
        fcy = getattr(cy, name)
        t_cy = min(timeit.repeat(lambda: fcy(*args), number=1, repeat=repeat)) * 1e3
        a, c = fpy(*args), fcy(*args)
        if isinstance(a, tuple):
            diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, c))
        else:
            diff = float(np.max(np.abs(np.asarray(a) - np.asarray(c))))
        print(f"{name:22s}{t_py:12.3f}{t_cy:12.3f}{t_py / t_cy:10.1f}{diff:12.1e}")


SCENARIO_SNIPPET = (
    "import time\n"
    "from fracpde import kernels\n"
    "from fracpde.scenario import Scenario, default_config, run_scenario\n"
    "sc = Scenario.from_config(default_config())\n"
    "t0 = time.perf_counter(); run_scenario(sc, 'closed-loop')\n"
    "print(kernels.BACKEND, time.perf_counter() - t0)\n"
)


def bench_scenario():
    print("default closed-loop scenario, wall time (s)")
    for flag in ("0", "1"):
        env = dict(os.environ, FRACPDE_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", SCENARIO_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:8s}{float(out[1]):8.2f}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[201, 801])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scenario", action="store_true", help="also time a full closed-loop run per backend")
    args = ap.parse_args(argv)
    for n in args.n:
        bench_kernels(n, args.repeat)
        print()
    if args.scenario:
        bench_scenario()
    return 0


if __name__ == "__main__":
    sys.exit(main())
