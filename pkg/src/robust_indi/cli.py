"""Command-line front end.

Exit codes: 0 success, 2 configuration or usage error, 3 infeasible
synthesis, 4 divergence in simulation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ProjectConfig, load_config, with_overrides
from .linsys import freq_response
from .margins import (margin_row, margins_csv, nominal_margins, worst_case_sampled,
                      worst_sensitivity_sample)
from .plant import assemble_design_plant, close_loop, indi_filter, noise_model, uncertainty_models
from .plots import line_chart, magnitude_db
from .sim import (campaign_csv, envelope_csv, monte_carlo, run_csv, run_doublet, summary_csv)
from .synthesis import (InfeasibleDesignError, ScheduleError, interpolate, load_schedule,
                        save_schedule, schedule_to_json, synthesize_schedule)

log = logging.getLogger("robust_indi")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_DIVERGED = 0, 2, 3, 4

BREAK_POINTS = ("m_c", "eta", "Omega", "Omegadot")


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _schedule(args, cfg: ProjectConfig):
    path = Path(args.schedule) if args.schedule else Path(cfg.output_dir) / "schedule.json"
    if not path.exists():
        raise UsageError(f"no gain schedule at {path}; run 'synthesize' first "
                         "or pass --schedule")
    try:
        return load_schedule(path)
    except (ScheduleError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read schedule {path}: {exc}") from exc


def _filters(cfg: ProjectConfig):
    return noise_model(cfg.noise), indi_filter(cfg.plant.filter_hz)


def _uncertain_plant(cfg: ProjectConfig, tau: float):
    N, H = _filters(cfg)
    params = cfg.quadrotor(tau)
    return assemble_design_plant(params, uncertainty_models(params, cfg.uncertainty), N=N, H=H)


# ---------------------------------------------------------------------------
# commands

REPORT_COLUMNS = ("tau", "K_eta", "K_omega", "a_ff", "b_ff", "omega_S", "omega_M", "omega_ref",
                  "zeta_ref", "b_ref", "constraint_soeta", "constraint_disk",
                  "constraint_model_following", "overshoot", "bandwidth_soeta")


def design_report_csv(schedule) -> str:
    rows = []
    for p in schedule.points:
        c = p.certified
        rows.append([p.tau, p.controller.K_eta, p.controller.K_omega, p.controller.a_ff,
                     p.controller.b_ff, p.weights.omega_S, p.weights.omega_M,
                     p.refmodel.omega_ref, p.refmodel.zeta_ref, p.refmodel.b_ref,
                     c["constraint_soeta"], c["constraint_disk"],
                     c["constraint_model_following"], c["overshoot"], c["bandwidth_soeta"]])
    return _csv(REPORT_COLUMNS, rows)


def cmd_synthesize(args, cfg: ProjectConfig) -> int:
    out = Path(cfg.output_dir)
    N, H = _filters(cfg)
    sch = cfg.schedule

    def progress(k, pt):
        c = pt.certified
        log.info("point %d tau=%.4f K_eta=%.4g K_omega=%.4g overshoot=%.4f", k, pt.tau,
                 pt.controller.K_eta, pt.controller.K_omega, c["overshoot"])

    try:
        schedule = synthesize_schedule(sch.tau_min, sch.tau_max, sch.n_points,
                                       cfg.weight_config(), cfg.seeds.synthesis,
                                       cfg.quadrotor(), N=N, H=H, warm_start=sch.warm_start,
                                       budget=sch.budget, progress=progress)
    except ScheduleError as exc:
        cause = exc.__cause__
        best = cause.best if isinstance(cause, InfeasibleDesignError) else None
        dump = {"error": str(exc), "best_attempt": best}
        _write(out, "infeasible.json", json.dumps(_jsonable(dump), indent=2) + "\n")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out.mkdir(parents=True, exist_ok=True)
    save_schedule(schedule, out / "schedule.json")
    log.info("wrote %s", out / "schedule.json")
    _write(out, "design_report.csv", design_report_csv(schedule))
    taus = schedule.taus
    gains = {"K_eta": [p.controller.K_eta for p in schedule.points],
             "K_omega": [p.controller.K_omega for p in schedule.points]}
    _write(out, "gains.svg", line_chart(taus * 1e3, gains, "tau [ms]", "gain",
                                        "Scheduled feedback gains"))
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return _fmt(x) if not math.isfinite(x) else float(x)
    return x


def analysis_rows(cfg: ProjectConfig, schedule, tau: float, jobs: int = 1) -> list[dict]:
    """Nominal and sampled worst-case margins at every break point."""
    plant = _uncertain_plant(cfg, tau)
    ctrl, _ = interpolate(schedule, tau)
    sigma = cfg.weights.sigma
    rows = []
    for bp in BREAK_POINTS:
        cm, dm = nominal_margins(plant, ctrl, bp, channel=0, sigma=sigma)
        rows.append(margin_row(tau, bp, "nominal", cm, dm))
        wc = worst_case_sampled(plant, ctrl, bp, cfg.analysis.n_samples, cfg.seeds.analysis,
                                sigma=sigma, jobs=jobs, extreme=cfg.analysis.vertices)
        rows.append(margin_row(tau, bp, "worst", wc.classical, wc.disk))
        log.info("%s: nominal PM %.2f deg, worst PM %.2f deg, %d/%d unstable", bp, cm.pm_deg,
                 wc.classical.pm_deg, wc.n_unstable, wc.n_evaluated)
    _, dm = nominal_margins(plant, ctrl, ["m_c", "Omegadot"], channel=None, sigma=sigma)
    rows.append(margin_row(tau, "m_c+Omegadot", "nominal", None, dm))
    return rows


def cmd_analyze(args, cfg: ProjectConfig) -> int:
    schedule = _schedule(args, cfg)
    taus = [args.tau] if args.tau is not None else (
        list(schedule.taus) if args.all else [cfg.plant.tau])
    rows = []
    for tau in taus:
        rows += analysis_rows(cfg, schedule, float(tau), args.jobs)
    out = Path(cfg.output_dir)
    _write(out, "margins.csv", margins_csv(rows))

    tau = float(taus[0])
    plant = _uncertain_plant(cfg, tau)
    ctrl, _ = interpolate(schedule, tau)
    S = close_loop(plant, ctrl, ["d_eta"], ["eta"])
    T = close_loop(plant, ctrl, ["r_eta"], ["eta"])
    w = np.logspace(-1, 4, 400)
    s_db = magnitude_db(freq_response(S, w).values[:, 0, 0])
    t_db = magnitude_db(freq_response(T, w).values[:, 0, 0])
    _write(out, "sensitivity.csv", _csv(("omega", "S_eta_db", "T_eta_db"), zip(w, s_db, t_db)))
    _write(out, "sensitivity.svg", line_chart(w, {"S_o,eta": s_db, "r_eta -> eta": t_db},
                                              "frequency [rad/s]", "magnitude [dB]",
                                              f"Nominal loops at tau = {tau * 1e3:.1f} ms",
                                              logx=True))
    return EXIT_OK


def cmd_simulate(args, cfg: ProjectConfig) -> int:
    schedule = _schedule(args, cfg)
    tau = cfg.plant.tau if args.tau is None else args.tau
    res = run_doublet(cfg.sim_config(tau), schedule)
    out = Path(cfg.output_dir)
    _write(out, "run.csv", run_csv(res))
    deg = np.degrees
    _write(out, "run.svg", line_chart(res.t, {"roll": deg(res.eta[:, 0]),
                                              "pitch": deg(res.eta[:, 1]),
                                              "yaw": deg(res.eta[:, 2]),
                                              "roll reference": deg(res.reference)},
                                      "time [s]", "angle [deg]",
                                      f"Doublet at tau = {tau * 1e3:.1f} ms"))
    m = res.metrics
    log.info("overshoot %.4f, coupling %.3f deg, stable %s, %d saturated commands",
             m.overshoot, m.coupling_deg, m.stable, m.saturated_steps)
    if not res.stable:
        print(f"error: simulation diverged at t = {res.t[-1]:.3f} s", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def worst_samples(cfg: ProjectConfig, schedule, taus) -> dict:
    """Realization maximizing the nominal-controller sensitivity peak, per tau."""
    found = {}
    for k, tau in enumerate(taus):
        plant = _uncertain_plant(cfg, float(tau))
        ctrl, _ = interpolate(schedule, float(tau))
        sample, peak = worst_sensitivity_sample(plant, ctrl, cfg.montecarlo.worst_samples,
                                                cfg.seeds.montecarlo)
        log.info("tau=%.4f worst |S_o,eta| peak %.4f", tau, peak)
        found[k] = sample
    return found


def run_campaign(cfg: ProjectConfig, schedule, jobs: int = 1):
    taus = schedule.taus
    worst = worst_samples(cfg, schedule, taus)
    return monte_carlo(cfg.sim_config(), schedule, cfg.montecarlo.n_random,
                       cfg.seeds.montecarlo, worst_samples=worst, jobs=jobs,
                       n_groups=cfg.montecarlo.n_groups, taus=taus)


def cmd_montecarlo(args, cfg: ProjectConfig) -> int:
    schedule = _schedule(args, cfg)
    camp = run_campaign(cfg, schedule, args.jobs)
    out = Path(cfg.output_dir)
    _write(out, "campaign.csv", campaign_csv(camp))
    _write(out, "campaign_summary.csv", summary_csv(camp))
    _write(out, "envelope.csv", envelope_csv(camp))
    bands, lines = {}, {}
    for g in sorted(camp.envelopes):
        lo, hi, nom = camp.envelopes[g]
        idx = camp.groups[g]
        label = f"tau {camp.taus[idx[0]] * 1e3:.0f}-{camp.taus[idx[-1]] * 1e3:.0f} ms"
        bands[label] = (np.degrees(lo), np.degrees(hi))
        lines[f"{label} nominal"] = np.degrees(nom)
    _write(out, "envelope.svg", line_chart(camp.t, lines, "time [s]", "roll [deg]",
                                           "Roll envelopes per tau group", bands=bands))
    for s in camp.summary():
        log.info("group %d: %d/%d stable, max overshoot %.4f, max coupling %.3f deg",
                 s["group"], s["stable"], s["runs"], s["max_overshoot"], s["max_coupling_deg"])
    if not camp.all_stable:
        print("error: some runs diverged (see campaign.csv)", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_schedule_export(args, cfg: ProjectConfig) -> int:
    schedule = _schedule(args, cfg)
    out = Path(cfg.output_dir)
    _write(out, "schedule_export.json", schedule_to_json(schedule))
    _write(out, "schedule_export.csv", design_report_csv(schedule))
    return EXIT_OK


TABLE_COLUMNS = ("tau", "break_point", "gm_db", "gm_lower_db", "pm_deg", "alpha", "dgm_db",
                 "dpm_deg")


def cmd_margins_table(args, cfg: ProjectConfig) -> int:
    """Nominal margins recorded at certification, one row per point and break."""
    schedule = _schedule(args, cfg)
    rows = []
    for p in schedule.points:
        for bp, m in p.certified.get("margins", {}).items():
            rows.append([p.tau, bp] + [m.get(c, math.nan) for c in TABLE_COLUMNS[2:]])
    _write(Path(cfg.output_dir), "margins_table.csv", _csv(TABLE_COLUMNS, rows))
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "schedule-export": cmd_schedule_export,
    "margins-table": cmd_margins_table,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="project JSON (defaults built in)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="override every seed")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    common.add_argument("--schedule", metavar="PATH",
                        help="gain schedule file (default OUT/schedule.json)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="robust-indi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synthesize", parents=[common], help="tune the gain schedule")
    p = sub.add_parser("analyze", parents=[common], help="nominal and worst-case margins")
    p.add_argument("--tau", type=float, metavar="X", help="actuator time constant [s]")
    p.add_argument("--all", action="store_true", help="analyze every design point")
    p = sub.add_parser("simulate", parents=[common], help="one nonlinear doublet run")
    p.add_argument("--tau", type=float, metavar="X", help="actuator time constant [s]")
    p = sub.add_parser("montecarlo", parents=[common], help="Monte Carlo doublet campaign")
    p.add_argument("--samples", type=int, metavar="N", help="random realizations per tau")
    sub.add_parser("schedule-export", parents=[common], help="re-export the schedule")
    sub.add_parser("margins-table", parents=[common], help="certified nominal margins")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "tau", None) is not None and args.tau <= 0:
        print("error: --tau must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config) if args.config else ProjectConfig()
        cfg = with_overrides(cfg, args.seed, args.out, getattr(args, "samples", None))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
