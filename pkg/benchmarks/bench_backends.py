"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_backends.py [--n 20000] [--repeat 3]

Times bag generation (deviates are drawn once, outside the timed region) and
interval counting for each generator, and checks the backends agree.
"""

import argparse
import math
import time

import numpy as np

from patternforge import derive_params, kernels
from patternforge.experiments import experiment1_config
from patternforge.generators import _draw_chunk


def best_of(fn, repeat):
    fn()  # compile / warm caches
    t = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        t = min(t, time.perf_counter() - t0)
    return t, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sigma2", type=float, default=1e-2)
    args = ap.parse_args()

    if "numba" not in kernels.BACKENDS:
        raise SystemExit("numba backend unavailable (PATTERNFORGE_NO_JIT set or numba missing)")

    d = derive_params(experiment1_config())
    s = math.sqrt(args.sigma2)
    print(f"k_grid={d.k_grid} k_req={d.k_req} n={args.n} sigma2={args.sigma2}")
    print(f"{'kernel':10s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}  equal")
    for kind in ("js", "ars", "angie"):
        u, z = _draw_chunk(kind, d, 0, 0, args.n)
        res = {}
        for name in ("numba", "numpy"):
            k = kernels.backend(name)
            if kind == "angie":
                job = lambda k=k: (k.angie(d.k_grid, d.k_req, d.k_min, d.k_max_eff, s, u, z),)  # noqa: E731
            elif kind == "js":
                job = lambda k=k: k.jittered(d.k_grid, d.k_req, d.n_avg, s, z)  # noqa: E731
            else:
                job = lambda k=k: k.additive(d.k_grid, d.k_req, d.n_avg, s, z)  # noqa: E731
            res[name] = best_of(job, args.repeat)
        same = all(np.array_equal(a, b) for a, b in zip(res["numba"][1], res["numpy"][1]))
        tn, tp = res["numba"][0], res["numpy"][0]
        print(f"{kind:10s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}  {same}")

    out = kernels.backend("numpy").additive(d.k_grid, d.k_req, d.n_avg, s, _draw_chunk("ars", d, 0, 0, args.n)[1])
    idx, lengths = out
    res = {name: best_of(lambda k=kernels.backend(name): k.interval_counts(idx, lengths, d.k_min, d.k_max_eff),
                         args.repeat) for name in ("numba", "numpy")}
    same = all(np.array_equal(a, b) for a, b in zip(res["numba"][1], res["numpy"][1]))
    tn, tp = res["numba"][0], res["numpy"][0]
    print(f"{'intervals':10s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}  {same}")


if __name__ == "__main__":
    main()
