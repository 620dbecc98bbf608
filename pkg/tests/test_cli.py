import csv
import json

import pytest

from robust_indi.cli import main
from robust_indi.plant import ControllerParams
from robust_indi.synthesis import (DesignPoint, GainSchedule, RefModelParams, WeightConfig,
                                   load_schedule, save_schedule)

SMALL = {"schema_version": 1,
         "schedule": {"tau_min": 0.02, "tau_max": 0.05, "n_points": 2, "budget": 300},
         "analysis": {"n_samples": 2},
         "montecarlo": {"n_random": 2, "n_groups": 2, "worst_samples": 1},
         "sim": {"t_end": 2.0}}


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root, SMALL)
    assert main(["synthesize", "--config", cfg, "--out", str(root / "a")]) == 0
    return root, cfg


def hot_schedule(path):
    # far too much rate gain for a 17 ms actuator: the doublet diverges
    pts = [DesignPoint(t, ControllerParams(400.0, 40.0), WeightConfig(),
                       RefModelParams(1.0, 0.7, 1.0)) for t in (0.01, 0.08)]
    save_schedule(GainSchedule(pts), path)
    return str(path)


class TestExitCodes:
    def test_missing_schedule(self, tmp_path, capsys):
        assert main(["simulate", "--out", str(tmp_path)]) == 2
        assert "synthesize" in capsys.readouterr().err

    def test_config_error_names_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"schema_version": 1, "sim": {"dt": 0}})
        assert main(["simulate", "--config", cfg]) == 2
        assert "sim.dt" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"schema_version": 1, "montecarlo": {"n_runs": 5}})
        assert main(["montecarlo", "--config", cfg]) == 2
        assert "montecarlo.n_runs" in capsys.readouterr().err

    def test_bad_arguments(self):
        assert main(["simulate", "--tau", "-1"]) == 2
        assert main(["no-such-command"]) == 2
        assert main(["simulate", "--jobs", "0"]) == 2

    def test_unreadable_schedule(self, tmp_path):
        bad = tmp_path / "s.json"
        bad.write_text('{"format": "something else"}')
        assert main(["simulate", "--schedule", str(bad), "--out", str(tmp_path)]) == 2

    def test_infeasible_synthesis(self, tmp_path):
        doc = {"schema_version": 1, "weights": {"alpha_target": 1.95},
               "schedule": {"n_points": 2, "budget": 200}}
        out = tmp_path / "inf"
        assert main(["synthesize", "--config", write_config(tmp_path, doc),
                     "--out", str(out)]) == 3
        dump = json.loads((out / "infeasible.json").read_text())
        assert "infeasible" in dump["error"]
        assert not (out / "schedule.json").exists()

    def test_divergent_simulation(self, tmp_path):
        sched = hot_schedule(tmp_path / "hot.json")
        assert main(["simulate", "--schedule", sched, "--out", str(tmp_path)]) == 4
        assert (tmp_path / "run.csv").exists()

    def test_unstable_campaign(self, tmp_path, small_run):
        _, cfg = small_run
        sched = hot_schedule(tmp_path / "hot.json")
        assert main(["montecarlo", "--config", cfg, "--schedule", sched, "--samples", "1",
                     "--out", str(tmp_path)]) == 4
        rows = list(csv.DictReader((tmp_path / "campaign.csv").open()))
        assert any(r["stable"] == "0" for r in rows)


class TestCommands:
    def test_synthesis_is_byte_identical(self, small_run):
        root, cfg = small_run
        assert main(["synthesize", "--config", cfg, "--out", str(root / "b")]) == 0
        for name in ("schedule.json", "design_report.csv", "gains.svg"):
            assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes()

    def test_schedule_export_round_trip(self, small_run, tmp_path):
        root, cfg = small_run
        sched = str(root / "a" / "schedule.json")
        assert main(["schedule-export", "--schedule", sched, "--out", str(tmp_path)]) == 0
        exported = tmp_path / "schedule_export.json"
        assert exported.read_text() == (root / "a" / "schedule.json").read_text()
        assert load_schedule(exported) == load_schedule(sched)
        assert (tmp_path / "schedule_export.csv").read_text() == \
            (root / "a" / "design_report.csv").read_text()

    def test_simulate(self, small_run, tmp_path):
        root, cfg = small_run
        rc = main(["simulate", "--config", cfg, "--schedule", str(root / "a" / "schedule.json"),
                   "--tau", "0.03", "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "run.csv").read_text().splitlines()
        assert len(rows) == 1 + 1001
        assert (tmp_path / "run.svg").read_text().lstrip().startswith("<?xml")

    def test_analyze(self, small_run, tmp_path):
        root, cfg = small_run
        rc = main(["analyze", "--config", cfg, "--schedule", str(root / "a" / "schedule.json"),
                   "--tau", "0.03", "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "margins.csv").read_text().splitlines()
        # nominal and worst at four break points, plus the joint loop
        assert len(lines) == 1 + 9
        assert (tmp_path / "sensitivity.csv").exists()

    def test_margins_table(self, small_run, tmp_path):
        root, cfg = small_run
        assert main(["margins-table", "--schedule", str(root / "a" / "schedule.json"),
                     "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "margins_table.csv").read_text().splitlines()
        assert lines[0].startswith("tau,break_point,gm_db")
        assert len(lines) == 1 + 2 * 5

    def test_montecarlo_is_byte_identical(self, small_run, tmp_path):
        root, cfg = small_run
        sched = str(root / "a" / "schedule.json")
        for d in ("x", "y"):
            assert main(["montecarlo", "--config", cfg, "--schedule", sched,
                         "--out", str(tmp_path / d)]) == 0
        for name in ("campaign.csv", "campaign_summary.csv", "envelope.csv", "envelope.svg"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
