"""Nominal and sampled worst-case margins across the schedule.

Prints one line per design point and break point.  Needs a schedule, e.g.
from scripts/run_schedule.py.

Usage: python scripts/run_analysis.py SCHEDULE [--every N] [--samples N]
"""

import argparse
from dataclasses import replace

from robust_indi.cli import analysis_rows
from robust_indi.config import ProjectConfig
from robust_indi.margins import margins_csv
from robust_indi.synthesis import load_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("schedule")
    ap.add_argument("--every", type=int, default=5, help="analyze every N-th point")
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--csv", help="also write the rows here")
    args = ap.parse_args()
    cfg = ProjectConfig()
    cfg = replace(cfg, analysis=replace(cfg.analysis, n_samples=args.samples))
    schedule = load_schedule(args.schedule)
    rows = []
    for tau in schedule.taus[::args.every]:
        for r in analysis_rows(cfg, schedule, float(tau)):
            rows.append(r)
            print(f"tau={1e3 * r['tau']:6.2f} ms  {r['break_point']:<13} {r['case']:<8} "
                  f"DGM {r['dgm_upper_db']:6.2f} dB  DPM {r['dpm_deg']:6.2f} deg  "
                  f"PM {r['pm_deg']:6.2f} deg")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(margins_csv(rows))


if __name__ == "__main__":
    main()
