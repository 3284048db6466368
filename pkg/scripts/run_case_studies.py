"""Run the three case studies and tabulate their headline metrics.

    python scripts/run_case_studies.py [--full-duration] [--jobs 3] [--out DIR]

Each preset gets its own directory with the trace CSV, the summary and the
four figures. Presets run as independent processes when ``--jobs > 1``.
"""

import argparse
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from mmc_dmppt.cli import OUTPUT_ENV, summary_dict
from mmc_dmppt.config import PRESET_NAMES, preset
from mmc_dmppt.engine import run_scenario
from mmc_dmppt.traceio import emit_plots, write_trace_csv


def run_one(name, full_duration, out_root):
    cfg = preset(name, full_duration)
    t0 = time.perf_counter()
    res = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    out = out_root / name
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(res, out / "trace.csv")
    emit_plots(res, out)
    (out / "summary.json").write_text(json.dumps(summary_dict(res.summary), indent=2))
    s = res.summary
    return {
        "preset": name,
        "seconds": elapsed,
        "avg_v": f"{s.avg_v_min_pct:.2f}..{s.avg_v_max_pct:.2f} %",
        "rms_pct": float(s.tracking_rms_pct.max()),
        "iz_max": float(s.max_abs_i_z.max()),
        "spread": s.max_arm_spread,
        "energy_kJ": float(s.energy.sum()) / 1e3,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--full-duration", action="store_true")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=os.environ.get(OUTPUT_ENV, "out"))
    args = ap.parse_args()
    root = Path(args.out)
    with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(run_one, PRESET_NAMES, [args.full_duration] * 3, [root] * 3))
    print(f"{'preset':16s} {'time s':>7s} {'avg v_C':>18s} {'RMS %':>6s} {'|i_z| A':>8s} "
          f"{'spread V':>9s} {'PV kJ':>7s}")
    for r in rows:
        print(f"{r['preset']:16s} {r['seconds']:7.1f} {r['avg_v']:>18s} {r['rms_pct']:6.3f} "
              f"{r['iz_max']:8.3f} {r['spread']:9.3f} {r['energy_kJ']:7.2f}")
    print(f"outputs in {root.resolve()}")
    return 0 if np.isfinite([r["spread"] for r in rows]).all() else 1


if __name__ == "__main__":
    raise SystemExit(main())
