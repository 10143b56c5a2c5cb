"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

Cases cover the Lorenz-sized ODE field and the Burgers-sized pointwise
network (8 channels, degree 2, 50 hidden units on a 16 x 32 x 32 batch).
"""

import argparse
import timeit

import numpy as np

from neupde._kernels import ELU, TANH, _pykernels
from neupde.dictionary import DictionarySpec

try:
    from neupde._kernels import _ckernels
except ImportError:
    _ckernels = None

CASES = [
    ("ode d=3 p=2 h=20", 3, 2, 20, 3, TANH, 16 * 5),
    ("ode d=3 p=4 t h=4", 4, 4, 4, 3, ELU, 16 * 30),
    ("pde c=8 p=2 h=50", 8, 2, 50, 1, ELU, 16 * 2 * 32 * 32),
]


def _inputs(nv, p, h, o, rows, seed=0):
    rng = np.random.default_rng(seed)
    E = DictionarySpec(nv, p).exponents
    n = E.shape[0]
    Z = np.ascontiguousarray(rng.uniform(-1, 1, (rows, nv)))
    A1 = rng.normal(size=(h, n)) / np.sqrt(n)
    A2 = rng.normal(size=(o, h)) / np.sqrt(h)
    W = np.ascontiguousarray(rng.normal(size=(rows, o)))
    return Z, E, A1, rng.normal(size=h), A2, rng.normal(size=o), W


def _time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(mod, args, act, repeat):
    Z, E, A1, b1, A2, b2, W = args
    Phi, pre, _ = mod.field_forward(Z, E, A1, b1, A2, b2, act)
    fwd = _time(lambda: mod.field_forward(Z, E, A1, b1, A2, b2, act), repeat)
    bwd = _time(lambda: mod.field_backward(Z, E, Phi, pre, A1, A2, act, W), repeat)
    return fwd, bwd


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=0, help="override the row count of every case")
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the numpy backend is available")
    print(f"{'case':<20}{'rows':>8}  {'numpy fwd':>10} {'numpy bwd':>10}  "
          f"{'cython fwd':>10} {'cython bwd':>10}  {'speedup':>8}")
    for name, nv, p, h, o, act, rows in CASES:
        rows = args.points or rows
        inp = _inputs(nv, p, h, o, rows)
        pf, pb = bench(_pykernels, inp, act, args.repeat)
        line = f"{name:<20}{rows:>8}  {pf * 1e3:>8.3f}ms {pb * 1e3:>8.3f}ms"
        if _ckernels is not None:
            cf, cb = bench(_ckernels, inp, act, args.repeat)
            line += f"  {cf * 1e3:>8.3f}ms {cb * 1e3:>8.3f}ms  {(pf + pb) / (cf + cb):>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
