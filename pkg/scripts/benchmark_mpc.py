"""Time one switching decision per leg against the sampling period.

    python scripts/benchmark_mpc.py [--samples 20000]

Reports per-n timing of the 4-point search and of the exhaustive search, and
the overrun rate a wallclock deadline of one sampling period would produce.
"""

import argparse
import time

import numpy as np

from mmc_dmppt.mmc import MmcParams
from mmc_dmppt.mpc import exhaustive_selection, mpc_tick, sort_arm
from mmc_dmppt.oracle import random_leg


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    budget = MmcParams().t_s
    print(f"budget per decision: {budget * 1e6:.1f} us")
    print(f"{'n':>3s} {'4-point us':>11s} {'p99 us':>8s} {'exhaustive us':>14s} {'overrun %':>10s}")
    for n in range(2, 11):
        states = [random_leg(rng, n) for _ in range(args.samples)]
        times = np.empty(len(states))
        for k, (p, leg, _) in enumerate(states):
            t0 = time.perf_counter()
            mpc_tick(p, leg, 10.0, 50.0)
            times[k] = time.perf_counter() - t0
        t0 = time.perf_counter()
        for p, leg, ideal in states[:2000]:
            exhaustive_selection(p, sort_arm(leg.v_c[:n], leg.i_up), sort_arm(leg.v_c[n:], leg.i_low),
                                 ideal)
        ex = (time.perf_counter() - t0) / min(2000, len(states))
        print(f"{n:3d} {times.mean() * 1e6:11.1f} {np.percentile(times, 99) * 1e6:8.1f} "
              f"{ex * 1e6:14.1f} {100.0 * np.mean(times > budget):10.2f}")


if __name__ == "__main__":
    main()
