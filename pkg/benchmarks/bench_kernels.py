"""Compare the compiled and pure-numpy kernel backends.

    python3 benchmarks/bench_kernels.py --sizes 25 50 100 200 --iters 300
"""

import argparse
import time

import numpy as np

from cellfree_mp import kernels
from cellfree_mp.channel import NetworkConfig, generate_channel
from cellfree_mp.problem import reduce, update_filters
from cellfree_mp.saddle import MpConfig, mp_solve


def make_problem(L, M, seed):
    cfg = NetworkConfig(num_aps=M, num_users=L, rng_seed=seed)
    stats = generate_channel(cfg)
    q = update_filters(np.full(L, cfg.max_power_norm), stats)
    return reduce(stats, q, 1, float(M), cfg.max_power_norm)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[25, 50, 100, 200])
    ap.add_argument("--aps", type=int, default=60)
    ap.add_argument("--iters", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled backend unavailable; only the numpy fallback will be timed")
    cfg = MpConfig(max_iter=args.iters, tol=0.0)
    print(f"{'L':>5} {'kernel':>10} " + " ".join(f"{n + ' us':>12}" for n in names) + "  speedup")
    for L in args.sizes:
        rp = make_problem(L, args.aps, args.seed)
        x = np.random.default_rng(args.seed).normal(size=L)
        th = np.full(L, rp.theta_bar)
        lam = np.full(L, 1.0 / L)
        rows = {
            "mp_iter": lambda b: best_of(lambda: mp_solve(rp, cfg=cfg, backend=b), args.repeat),
            "field": lambda b: best_of(
                lambda: [kernels.get_backend(b).f_and_grad(th, lam, rp.C, rp.cbar)
                         for _ in range(200)], args.repeat),
            "simplex": lambda b: best_of(
                lambda: [kernels.get_backend(b).project_simplex(x) for _ in range(200)],
                args.repeat),
        }
        for kernel, fn in rows.items():
            per = {}
            for name in names:
                secs, out = fn(name)
                n = out.iterations if kernel == "mp_iter" else 200
                per[name] = secs / n * 1e6
            speed = per["python"] / per["cython"] if "cython" in per else float("nan")
            print(f"{L:5d} {kernel:>10} " + " ".join(f"{per[n]:12.2f}" for n in names)
                  + f"  {speed:7.1f}x")


if __name__ == "__main__":
    main()
