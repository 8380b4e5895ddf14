"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 129] [--repeat 5]

Inputs come from the uniform-network chain on an n x n grid.
"""

import argparse
import timeit

import numpy as np

from bamg import _fallback
from bamg.chains import gen_uniform_network
from bamg.coarsening import full_coarsen_grid
from bamg.lsq import coarse_neighborhoods, tv_weights

try:
    from bamg import _kernels
except ImportError:
    _kernels = None


def _cases(N):
    prob = gen_uniform_network(N)
    B = prob.system_matrix()
    rng = np.random.default_rng(0)
    x = rng.uniform(1, 2, B.nrows)
    scale = 0.7 / B.diagonal()
    b = np.zeros(B.nrows)
    part = full_coarsen_grid(N)
    X = np.ascontiguousarray(rng.uniform(1, 2, (B.nrows, 7)))
    w = tv_weights(B, X)
    nb_ptr, nb_idx, _ = coarse_neighborhoods(B, part, 3, 2)
    return {
        "csr_matvec": lambda k: k.csr_matvec(B.indptr, B.indices, B.data, x),
        "jacobi x2": lambda k: k.jacobi(B.indptr, B.indices, B.data, scale, x, b, 2),
        "ls_greedy": lambda k: k.ls_greedy(X, w, part.fset, nb_ptr, nb_idx, 2, 1e-10),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=129, help="odd grid side")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"python": _fallback}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"grid {args.n}x{args.n}, best of {args.repeat} (ms)")
    print(f"{'kernel':<12}" + "".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, fn in _cases(args.n).items():
        times = {}
        for bname, mod in backends.items():
            number = 1 if name == "ls_greedy" and bname == "python" else 10
            t = timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)
            times[bname] = 1e3 * min(t) / number
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<12}" + "".join(f"{t:>10.3f}" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
