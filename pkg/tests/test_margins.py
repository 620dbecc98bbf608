import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_indi.linsys import static_gain, tf
from robust_indi.margins import (DiskMarginResult, alpha_from_gain, alpha_from_phase,
                                 break_loop, break_sensitivity, classical_margins,
                                 default_scaling, disk_gain_phase, disk_margin, margin_row,
                                 margins_csv, nominal_margins, worst_case_sampled,
                                 worst_sensitivity_sample)
from robust_indi.plant import (ControllerParams, QuadrotorParams, UncertaintyConfig,
                               _diag_actuators, assemble_design_plant, uncertainty_models)
from robust_indi.uncertainty import DeltaSample, zero_sample

CTRL = ControllerParams(K_eta=10.0, K_omega=27.0)
TAU = 0.017


@pytest.fixture(scope="module")
def plant():
    return assemble_design_plant(QuadrotorParams(tau=TAU))


def effectiveness_only(r_C=0.2):
    p = QuadrotorParams(tau=TAU)
    eff, _ = uncertainty_models(p, UncertaintyConfig(r_C=r_C))
    return assemble_design_plant(p, (eff, _diag_actuators(TAU, 4)))


class TestDiskFormulas:
    def test_table_value(self):
        r = DiskMarginResult.from_alpha(0.764)
        lo, hi = r.gm_db
        assert hi == pytest.approx(6.99, abs=0.005)
        assert lo == pytest.approx(-hi, abs=1e-12)
        # exact symmetric-disk phase, 2 atan(alpha / 2)
        assert r.pm_deg == pytest.approx(math.degrees(2 * math.atan(0.382)), abs=1e-12)

    def test_zero_disk(self):
        g_min, g_max, pm = disk_gain_phase(0.0)
        assert (g_min, g_max, pm) == (1.0, 1.0, 0.0)

    def test_integrator_loop(self):
        # L = 1/s  ->  S = s/(s+1),  |S - 1/2| = 1/2 at every frequency
        r = disk_margin(tf([1, 0], [1, 1]))
        assert r.alpha_max == pytest.approx(2.0, rel=1e-6)
        assert r.gm_range[0] == pytest.approx(0.0, abs=1e-6)
        assert r.gm_range[1] == math.inf
        assert r.pm_deg == pytest.approx(90.0, abs=1e-4)

    @given(alpha=st.floats(1e-3, 1.999))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, alpha):
        g_min, g_max, pm = disk_gain_phase(alpha)
        assert alpha_from_gain(g_max) == pytest.approx(alpha, abs=1e-12)
        assert alpha_from_phase(pm) == pytest.approx(alpha, abs=1e-12)
        assert g_min * g_max == pytest.approx(1.0, abs=1e-12)
        assert g_min <= 1.0 <= g_max

    def test_unbounded_upper_gain(self):
        assert disk_gain_phase(1.5, sigma=0.5)[1] == math.inf

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            disk_gain_phase(-0.1)


class TestClassical:
    def test_second_order_loop(self):
        cm = classical_margins(tf([1], [1, 1, 0]))
        w = math.sqrt((math.sqrt(5) - 1) / 2)  # root of w^4 + w^2 - 1
        assert cm.w_gain[0] == pytest.approx(w, rel=1e-9)
        assert w == pytest.approx(0.786, abs=1e-3)
        assert cm.pm_deg == pytest.approx(180 - 90 - math.degrees(math.atan(w)), abs=1e-8)
        assert cm.pm_deg == pytest.approx(51.83, abs=0.005)
        assert cm.gm_db == math.inf

    def test_static_loop(self):
        cm = classical_margins(static_gain(2.0))
        assert not cm.pm_defined
        assert cm.gm_db == math.inf

    def test_zero_db_gain_margin(self):
        w180 = math.sqrt(0.5)
        s = 1j * w180
        k = abs(s * (s + 1) * (s + 0.5))
        cm = classical_margins(tf([k], np.poly([0, -1, -0.5])))
        assert cm.w_phase[0] == pytest.approx(w180, rel=1e-9)
        assert cm.gm_db == pytest.approx(0.0, abs=1e-9)

    def test_needs_scalar(self):
        with pytest.raises(ValueError):
            classical_margins(static_gain(np.eye(2)))

    @given(k=st.floats(0.05, 0.7))
    @settings(max_examples=20, deadline=None)
    def test_disk_more_conservative_than_classical(self, k):
        L = tf([k], np.poly([0, -1, -0.5]))
        cm = classical_margins(L)
        S = tf(np.poly([0, -1, -0.5]), np.polyadd(np.poly([0, -1, -0.5]), [k]))
        dm = disk_margin(S)
        assert dm.pm_deg <= cm.pm_deg + 1e-6
        assert dm.gm_db[1] <= cm.gm_db + 1e-6


class TestBreakPoints:
    def test_rate_and_acceleration_agree(self, plant):
        _, a = nominal_margins(plant, CTRL, "Omega")
        _, b = nominal_margins(plant, CTRL, "Omegadot")
        # same loop, different realization; peak search settles to ~1e-6
        assert a.alpha_max == pytest.approx(b.alpha_max, rel=1e-5)
        L1, L2 = break_loop(plant, CTRL, "Omega"), break_loop(plant, CTRL, "Omegadot")
        for w in (1.0, 30.0, 300.0):
            assert L1(1j * w)[0, 0] == pytest.approx(L2(1j * w)[0, 0], rel=1e-9)

    def test_motor_channels_symmetric(self, plant):
        alphas = [nominal_margins(plant, CTRL, "m_c", ch)[1].alpha_max for ch in range(4)]
        assert np.ptp(alphas) <= 1e-6 * alphas[0]

    def test_zero_controller_gives_zero_loop(self, plant):
        L = break_loop(plant, ControllerParams(0.0, 0.0), "eta", check=False)
        w = np.logspace(-1, 3, 20)
        assert all(abs(L(1j * x)[0, 0]) < 1e-12 for x in w)

    def test_unknown_point(self, plant):
        with pytest.raises(ValueError):
            break_loop(plant, CTRL, "yaw")

    def test_sensitivity_matches_loop(self, plant):
        L = break_loop(plant, CTRL, "eta")
        S = break_sensitivity(plant, CTRL, "eta")
        for w in (0.3, 3.0, 30.0, 300.0):
            lv = L(1j * w)[0, 0]
            assert S(1j * w)[0, 0] == pytest.approx(1 / (1 + lv), rel=1e-8)

    def test_disk_margin_is_below_classical(self, plant):
        for bp in ("eta", "Omega"):
            cm, dm = nominal_margins(plant, CTRL, bp)
            assert dm.pm_deg <= cm.pm_deg
            assert dm.gm_db[1] <= cm.gm_db

    def test_multiloop_scaling_only_rescales_channel(self, plant):
        assert default_scaling(plant) == {"Omegadot_ap": 1 / 300.0}
        _, single = nominal_margins(plant, CTRL, "Omegadot", channel=None)
        _, joint = nominal_margins(plant, CTRL, ["m_c", "Omegadot"], channel=None)
        assert joint.alpha_max <= single.alpha_max


class TestWorstCase:
    def test_zero_radius_equals_nominal(self, plant):
        zero = effectiveness_only(r_C=0.0)
        wc = worst_case_sampled(zero, CTRL, "eta", n_samples=3, seed=0)
        cm, dm = nominal_margins(plant, CTRL, "eta")
        assert wc.disk.alpha_max == pytest.approx(dm.alpha_max, rel=1e-6)
        assert wc.classical.pm_deg == pytest.approx(cm.pm_deg, rel=1e-6)
        assert wc.n_unstable == 0

    def test_vertices_match_exhaustive(self):
        up = effectiveness_only()
        wc = worst_case_sampled(up, CTRL, "eta", n_samples=1, seed=0)
        best = math.inf
        for signs in itertools.product((-1.0, 1.0), repeat=4):
            _, dm = nominal_margins(up, CTRL, "eta", delta=DeltaSample(np.array(signs)))
            best = min(best, dm.alpha_max)
        assert wc.n_evaluated == 1 + 1 + 16
        assert wc.disk.alpha_max <= best + 1e-9

    def test_deterministic(self):
        up = effectiveness_only()
        a = worst_case_sampled(up, CTRL, "Omega", n_samples=6, seed=11, extreme=False)
        b = worst_case_sampled(up, CTRL, "Omega", n_samples=6, seed=11, extreme=False)
        assert a.disk.alpha_max == b.disk.alpha_max
        assert np.array_equal(a.disk_sample.real_scalars, b.disk_sample.real_scalars)

    def test_destabilizing_sample_scores_zero(self):
        up = effectiveness_only(r_C=0.5)
        wc = worst_case_sampled(up, ControllerParams(30.0, 81.0), "eta", n_samples=4, seed=1)
        assert wc.n_unstable >= 1
        assert wc.disk.alpha_max == 0.0
        assert wc.unstable_samples and wc.disk_sample is wc.unstable_samples[0]

    def test_worst_sensitivity_sample(self):
        up = effectiveness_only()
        sample, peak = worst_sensitivity_sample(up, CTRL, n_samples=4, seed=2)
        nominal = worst_sensitivity_sample(effectiveness_only(0.0), CTRL, 1, 0)[1]
        assert peak >= nominal - 1e-9
        assert sample.real_scalars.shape == (4,)

    def test_rejects_zero_samples(self, plant):
        with pytest.raises(ValueError):
            worst_case_sampled(plant, CTRL, "eta", n_samples=0)


def test_margins_csv_layout(plant):
    cm, dm = nominal_margins(plant, CTRL, "eta")
    text = margins_csv([margin_row(TAU, "eta", "nominal", cm, dm)])
    header, row = text.strip().split("\n")
    assert header.split(",")[:6] == ["tau", "break_point", "case", "dgm_lower_db",
                                     "dgm_upper_db", "dpm_deg"]
    assert row.startswith("0.017,eta,nominal,")


def test_uncertain_zero_sample_matches_nominal(plant):
    p = QuadrotorParams(tau=TAU)
    up = assemble_design_plant(p, uncertainty_models(p))
    _, a = nominal_margins(plant, CTRL, "Omega")
    _, b = nominal_margins(up, CTRL, "Omega", delta=zero_sample(up.delta_structure))
    assert a.alpha_max == pytest.approx(b.alpha_max, rel=1e-8)
