"""Compare the numba and numpy kernels on the hot paths.

Run with ``python3 benchmarks/bench_kernels.py [--points N] [--repeat R]``.
Each row reports the best wall time of R runs per backend and the speedup.
"""
import argparse
import time

import numpy as np

from circlebif import kernels
from circlebif.family import (Lemma1Params, arnold_family, build_homotopy, build_lemma1_family, embed_theta,
                              intersection_family)
from circlebif.jet import FULL, XONLY


def _best(fn, repeat):
    fn()  # warm-up (and numba compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(points):
    lemma = embed_theta(build_lemma1_family(Lemma1Params(0, 1, 3)))
    xs = np.arange(points) / points
    specs = {
        "arnold": (arnold_family(), 0.7, 0.1),
        "fourier": (intersection_family(), 0.03, 0.0),
        "flow": (lemma, 0.0, 0.0),
        "homotopy": (build_homotopy(arnold_family(s=0.5), lemma), 0.5, 0.0),
    }
    for name, (spec, s, th) in specs.items():
        p = spec.program
        pv = p.param_values(s, th)
        yield f"{name} values q=3", lambda m, p=p, pv=pv: m.iterate_values(p.code, p.modes, p.fdata, p.depth,
                                                                            pv, xs, 3)
        for table in (XONLY, FULL):
            pj = p.param_jets(s, th, table)
            yield (f"{name} jets[{table.name}] q=3",
                   lambda m, p=p, pv=pv, pj=pj, t=table: m.iterate_jets(p.code, p.modes, p.fdata, p.depth,
                                                                        pv, pj, xs[:256], 3, t))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    nb, npy = kernels.get_backend("numba"), kernels.get_backend("numpy")
    print(f"{'case':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for label, fn in cases(args.points):
        a = _best(lambda: fn(nb), args.repeat)
        b = _best(lambda: fn(npy), args.repeat)
        print(f"{label:32s} {a * 1e3:11.2f} {b * 1e3:11.2f} {b / a:8.1f}")


if __name__ == "__main__":
    main()
