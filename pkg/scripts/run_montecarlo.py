"""Monte Carlo doublet campaign over the schedule, summarized per tau group.

Usage: python scripts/run_montecarlo.py SCHEDULE [--samples N] [--jobs N]
"""

import argparse
import time

from robust_indi.cli import run_campaign
from robust_indi.config import ProjectConfig, with_overrides
from robust_indi.synthesis import load_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("schedule")
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = with_overrides(ProjectConfig(), samples=args.samples)
    t0 = time.perf_counter()
    camp = run_campaign(cfg, load_schedule(args.schedule), args.jobs)
    print(f"{len(camp.rows)} runs in {time.perf_counter() - t0:.0f} s")
    for s in camp.summary():
        print(f"group {s['group']}  tau {1e3 * s['tau_min']:5.1f}-{1e3 * s['tau_max']:5.1f} ms  "
              f"stable {s['stable']}/{s['runs']}  max overshoot {100 * s['max_overshoot']:5.2f}%  "
              f"max coupling {s['max_coupling_deg']:5.2f} deg")
    worst = max(camp.rows, key=lambda r: r["overshoot"])
    named = {k: worst[k] for k in camp.structure_names}
    print(f"worst overshoot {100 * worst['overshoot']:.2f}% at tau={1e3 * worst['tau']:.1f} ms, "
          f"{worst['kind']} sample {named}")


if __name__ == "__main__":
    main()
