"""Numba vs NumPy timings for the hot kernels.

Each backend runs in its own interpreter (the backend is fixed at import time
by FLAB_NUMBA), so the parent only spawns two children and tabulates.

    python benchmarks/bench_kernels.py [--n 2000000] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    fn()  # warm-up: pays the JIT compile on the numba side
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(n, repeat):
    from flab import _accel, kernels
    from flab.averaging import AveragingScheme, PhaseSource, cesaro_average
    from flab.correlation import correlation_table, exhaustive_queries
    from flab.hardy import parse

    src = PhaseSource(parse("sqrt2*t^2 + t^(3/2) + 1/3*t*log(t)"))
    ns = np.arange(2, n + 2, dtype=np.int64)
    x = src.frac(ns)
    lo = np.arange(0, n, 4096, dtype=np.int64)
    hi = np.minimum(lo + 4096, n)
    queries = exhaustive_queries(3, 3)
    m = max(n // 10, 1000)

    timings = {
        "hardy_dd+frac": best_of(lambda: src.frac(ns), repeat),
        "expi": best_of(lambda: kernels.expi(x), repeat),
        "block_sums": best_of(lambda: kernels.block_sums(x, lo, hi), repeat),
        "cesaro_average": best_of(lambda: cesaro_average(src, AveragingScheme.full(n)), repeat),
        f"correlation_table[{len(queries)}q,N={m}]":
            best_of(lambda: correlation_table(src, queries, AveragingScheme.full(m)), max(1, repeat // 2)),
    }
    json.dump({"backend": _accel.BACKEND, "timings": timings}, sys.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.n, args.repeat)
        return

    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FLAB_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", "--n", str(args.n), "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True).stdout
        res = json.loads(out)
        runs[res["backend"]] = res["timings"]

    np_t, nb_t = runs["numpy"], runs.get("numba")
    if nb_t is None:
        print("numba not importable; numpy timings only")
    print(f"N = {args.n:,}, best of {args.repeat}")
    print(f"{'kernel':<36}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, t in np_t.items():
        if nb_t:
            print(f"{name:<36}{t:12.4f}{nb_t[name]:12.4f}{t / nb_t[name]:10.2f}")
        else:
            print(f"{name:<36}{t:12.4f}")


if __name__ == "__main__":
    main()
