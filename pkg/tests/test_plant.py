import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_indi.linsys import freq_response, hinf_norm, step_response
from robust_indi.margins import break_loop
from robust_indi.plant import (AllocationError, ControllerParams, NoiseConfig, QuadrotorParams,
                               UncertaintyConfig, actuator, assemble_design_plant, close_loop,
                               indi_filter, indi_inner_loop, noise_model, uncertainty_models)
from robust_indi.uncertainty import zero_sample

W500 = np.logspace(-1, 4, 500)
CTRL = ControllerParams(K_eta=10.0, K_omega=27.0)


@pytest.fixture(scope="module")
def nominal_plant():
    return assemble_design_plant(QuadrotorParams(tau=0.017))


@pytest.mark.parametrize("tau", [0.010, 0.017, 0.040, 0.080])
def test_perfect_indi_equivalence(tau):
    E = QuadrotorParams(tau=tau).effectiveness()
    G = indi_inner_loop(E, actuator(tau), indi_filter())
    got = freq_response(G, W500).values[:, 0, 0]
    want = 1 / (tau * 1j * W500 + 1)
    assert np.max(np.abs(got - want) / np.abs(want)) <= 1e-6


def test_perfect_indi_hinf_gap():
    tau = 0.017
    E = QuadrotorParams(tau=tau).effectiveness()
    G = indi_inner_loop(E, actuator(tau), indi_filter())
    err = G - actuator(tau).rename(G.inputs, G.outputs)
    assert hinf_norm(err, rel_tol=1e-6) <= 1e-6


def test_three_axis_inner_loop_is_decoupled():
    p = QuadrotorParams(tau=0.02, axes="rpy")
    G = indi_inner_loop(p.effectiveness(), actuator(0.02), indi_filter())
    v = freq_response(G, [1.0, 30.0, 300.0]).values
    for k in range(3):
        assert np.allclose(v[k], np.eye(3) / (0.02j * [1.0, 30.0, 300.0][k] + 1), atol=1e-9)


def test_mismatched_allocation_keeps_unit_dc_gain():
    tau = 0.02
    E = QuadrotorParams(tau=tau).effectiveness()
    G = indi_inner_loop(E, actuator(tau), indi_filter(), E_alloc=1.2 * E)
    t, y = step_response(G, 1.0)
    assert y[-1] == pytest.approx(1.0, abs=1e-6)
    assert G.dcgain()[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_rank_deficient_allocation():
    E = np.array([[1.0, 1.0, 1.0, 1.0], [2.0, 2.0, 2.0, 2.0]])
    with pytest.raises(AllocationError):
        indi_inner_loop(E, actuator(0.02), indi_filter())


def test_zero_reference_gives_zero_output():
    E = QuadrotorParams().effectiveness()
    G = indi_inner_loop(E, actuator(0.017), indi_filter())
    assert np.all(G.C @ np.zeros(G.nstates) == 0)


def test_reference_loop_is_third_order(nominal_plant):
    T = close_loop(nominal_plant, CTRL, ["r_eta"], ["eta"])
    assert T.nstates == 3
    assert T.dcgain()[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_open_loop_pass_through(nominal_plant):
    G = close_loop(nominal_plant, ControllerParams(0.0, 0.0), ["d_eta"], ["eta"])
    v = freq_response(G, [0.1, 10.0, 1e3]).values[:, 0, 0]
    assert np.allclose(v, 1.0)


def test_output_sensitivity_vanishes_at_dc(nominal_plant):
    S = close_loop(nominal_plant, CTRL, ["d_eta"], ["eta"])
    assert abs(S(1e-6j)[0, 0]) < 1e-5


def test_complementarity(nominal_plant):
    S = close_loop(nominal_plant, CTRL, ["d_eta"], ["eta"])
    L = break_loop(nominal_plant, CTRL, "eta")
    for w in np.logspace(-1, 4, 60):
        s = S(1j * w)[0, 0]
        lv = L(1j * w)[0, 0]
        assert abs(s + lv / (1 + lv) - 1) <= 1e-9


def test_uncertain_plant_at_zero_matches_nominal(nominal_plant):
    p = QuadrotorParams(tau=0.017)
    up = assemble_design_plant(p, uncertainty_models(p))
    z = zero_sample(up.delta_structure)
    outs = ["eta", "Omega", "m_c0", "e_ref_eta"]
    ins = ["r_eta", "d_eta", "d_Omegadot", "d_i0"]
    a = close_loop(nominal_plant, CTRL, ins, outs)
    b = close_loop(up, CTRL, ins, outs, delta=z)
    w = np.logspace(-1, 4, 100)
    assert np.allclose(freq_response(a, w).values, freq_response(b, w).values,
                       rtol=0, atol=1e-9)


def test_channel_map_covers_signals_once(nominal_plant):
    ch = nominal_plant.channels
    ins, outs = nominal_plant.system_inputs, nominal_plant.system_outputs
    assert len(set(ins)) == len(ins) and len(ch["inputs"]) == len(ins)
    assert len(set(outs)) == len(outs) and len(ch["outputs"]) == len(outs)
    for name in ("r_eta", "d_eta", "d_Omegadot", "d_i0", "d_i3", "n_Omega"):
        assert name in ch["inputs"]
    for name in ("m_c0", "Omegadot", "Omega", "eta", "e_ref_eta"):
        assert name in ch["outputs"]


def test_reference_model_must_be_third_order():
    from robust_indi.linsys import tf
    with pytest.raises(ValueError):
        assemble_design_plant(Tref=tf([1], [1, 1]))


def test_uncertain_plant_exposes_perturbation():
    p = QuadrotorParams(tau=0.03)
    up = assemble_design_plant(p, uncertainty_models(p, UncertaintyConfig()))
    assert [b.name for b in up.delta_structure] == \
        ["dC0", "dC1", "dC2", "dC3", "dtau0", "dtau1", "dtau2", "dtau3",
         "Dtau0", "Dtau1", "Dtau2", "Dtau3"]
    assert up.as_lft().n_delta == 12


class TestNoiseModel:
    def test_bandpass_kills_dc(self):
        N = noise_model(NoiseConfig(gain=1.0, lowpass=1.0, lag_zero=1.0, lag_pole=1.0,
                                    bandpass=1.0, bandpass_q=1.0))
        assert abs(N(0.0)[0, 0]) == 0.0

    def test_pure_lowpass_corner(self):
        N = noise_model(NoiseConfig(gain=1.0, lowpass=10.0, lag_zero=None, lag_pole=None,
                                    bandpass=None))
        assert 20 * np.log10(abs(N(10j)[0, 0])) == pytest.approx(-3.0103, abs=1e-4)

    def test_default_peak_at_bandpass(self):
        cfg = NoiseConfig()
        w = np.logspace(0, 5, 50_000)
        mag = np.abs(freq_response(noise_model(cfg), w).values[:, 0, 0])
        assert w[np.argmax(mag)] == pytest.approx(cfg.bandpass, rel=0.02)

    def test_invalid_corner(self):
        with pytest.raises(ValueError):
            noise_model(NoiseConfig(lowpass=-1.0))


@given(k=st.floats(0.5, 2.0))
@settings(max_examples=10, deadline=None)
def test_allocation_scaling_never_moves_dc(k):
    E = QuadrotorParams().effectiveness()
    G = indi_inner_loop(E, actuator(0.03), indi_filter(), E_alloc=k * E)
    assert G.dcgain()[0, 0] == pytest.approx(1.0, abs=1e-8)


def test_effectiveness_rows():
    E = QuadrotorParams(axes="rpy").effectiveness()
    assert E.shape == (3, 4)
    assert E[2].tolist() == [-30.0, 30.0, 30.0, -30.0]
    with pytest.raises(ValueError):
        QuadrotorParams(tau=-1.0)
