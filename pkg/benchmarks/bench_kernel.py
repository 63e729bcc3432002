"""Time the compiled and pure-Python sweep kernels on the same schedules.

    python benchmarks/bench_kernel.py [--segments 7] [--m 4] [--repeat 3]
"""

import argparse
import time

from harmonic_nvod import kernel
from harmonic_nvod.client_sim import default_policy
from harmonic_nvod.core import SCHEMES, make_params
from harmonic_nvod.schemes import build


def best_of(repeat, fn):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--segments", type=int, default=7)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = ["python"] + (["compiled"] if kernel.HAVE_COMPILED else [])
    if not kernel.HAVE_COMPILED:
        print("compiled kernel not built; timing the Python kernel only")
    print(f"N={args.segments} m={args.m}; kernel = integer sweep only, total = grid build + sweep + Fractions")
    print(f"{'scheme':<6} {'arrivals':>8}" + "".join(f" {b[:3] + ' kernel':>10} {b[:3] + ' total':>10}" for b in backends)
          + "  speedup  same")
    for scheme in SCHEMES:
        sched = build(scheme, make_params(T=120, b=1, N=args.segments, m=args.m))
        policy = default_policy(scheme)
        code = kernel.POLICY_CODES[policy.variant]
        grid = kernel.build_grid(sched)
        ticks = [q * grid.unit // args.m for q in range(sched.hyperperiod_slots * args.m)]
        core, total, rows = {}, {}, {}
        for b in backends:
            core[b], _ = best_of(args.repeat, lambda: kernel._run(b, grid, ticks, code, 0))
            # serial runs so the comparison is kernel against kernel
            total[b], (rows[b], used) = best_of(
                args.repeat, lambda: kernel.sweep_schedule(sched, policy, parallel=False, backend=b))
            if used != b:
                print(f"  note: {scheme} {b} run fell back to {used}")
        speed = f"{core['python'] / core['compiled']:7.1f}x" if "compiled" in core else "      -"
        same = all(rows[b] == rows["python"] for b in backends)
        print(f"{scheme:<6} {len(ticks):>8}" + "".join(f" {core[b]:>10.4f} {total[b]:>10.4f}" for b in backends)
              + f"  {speed}  {same}")


if __name__ == "__main__":
    main()
