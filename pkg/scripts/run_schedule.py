"""Synthesize the default gain schedule and print the design table.

Usage: python scripts/run_schedule.py [--config PATH] [--out DIR]
"""

import argparse
import time
from pathlib import Path

from robust_indi.cli import design_report_csv
from robust_indi.config import ProjectConfig, load_config
from robust_indi.plant import indi_filter, noise_model
from robust_indi.synthesis import save_schedule, synthesize_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out/schedule")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else ProjectConfig()
    sch = cfg.schedule

    def progress(k, pt):
        c = pt.certified
        print(f"{k:2d}  tau={1e3 * pt.tau:6.2f} ms  K_eta={pt.controller.K_eta:8.4f}  "
              f"K_omega={pt.controller.K_omega:8.4f}  overshoot={100 * c['overshoot']:.3f}%  "
              f"disk={c['constraint_disk']:.6f}")

    t0 = time.perf_counter()
    schedule = synthesize_schedule(sch.tau_min, sch.tau_max, sch.n_points, cfg.weight_config(),
                                   cfg.seeds.synthesis, cfg.quadrotor(),
                                   N=noise_model(cfg.noise), H=indi_filter(cfg.plant.filter_hz),
                                   warm_start=sch.warm_start, budget=sch.budget,
                                   progress=progress)
    print(f"synthesis took {time.perf_counter() - t0:.1f} s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_schedule(schedule, out / "schedule.json")
    (out / "design_report.csv").write_text(design_report_csv(schedule))
    print(f"wrote {out / 'schedule.json'}")


if __name__ == "__main__":
    main()
