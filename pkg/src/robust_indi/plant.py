"""Design plant: rigid-body roll dynamics around an INDI inner loop.

The diagram is kept as a list of named blocks so that the same description
serves closed-loop evaluation, loop breaking at analysis points and
perturbation by a sampled ``Delta``.  Signal map (roll axis, 4 motors)::

    r_eta --F--> r_f ;  Omegadot_r = K_Omega (K_eta (r_f - eta_m) - Omega_m)
    INDI:  m_cmd = H*Ahat*m_cmd + pinv(E) (Omegadot_r - H*Omegadot)
    m_c = m_cmd (analysis point) ;  a_in = m_c + d_i ;  m = A(a_in)
    Omegadot = E m + d_Omegadot ;  Omegadot_ap = Omegadot (analysis point)
    Omega = int Omegadot_ap ;  eta = int Omega + d_eta
    Omega_m = Omega + N n_Omega ;  eta_m = eta + int N n_Omega
    e_ref_eta = Tref r_eta - eta

The INDI measurement taps angular acceleration before the ``Omegadot``
analysis point, so breaking there opens the outer attitude/rate loop only.
The controller's actuator-state estimate runs on its own command
(``m_cmd``), ahead of the ``m_c`` analysis point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linsys import (StateSpace, interconnect, integrator, signal_names,
                     static_gain, sumblock, tf)
from .uncertainty import (DeltaBlock, DeltaSample, LftModel, build_actuator_lft,
                          build_effectiveness_lft, build_wm, delta_system,
                          roll_effectiveness, zero_sample)

__all__ = [
    "QuadrotorParams",
    "NoiseConfig",
    "UncertaintyConfig",
    "ControllerParams",
    "DesignPlant",
    "indi_filter",
    "actuator",
    "noise_model",
    "indi_inner_loop",
    "uncertainty_models",
    "assemble_design_plant",
    "controller_blocks",
    "close_loop",
    "BREAK_POINTS",
]


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class QuadrotorParams:
    """Airframe description; effectiveness already divided by inertia."""

    C_p: float = 300.0
    tau: float = 0.017
    n_motors: int = 4
    axes: str = "roll"  # "roll" or "rpy"
    C_q: float | None = None
    C_r: float | None = None
    inertia: tuple[float, float, float] = (1.0, 1.0, 1.8)

    def __post_init__(self):
        if self.C_p <= 0 or self.tau <= 0:
            raise ValueError("C_p and tau must be positive")
        if self.n_motors != 4:
            raise ValueError("only the symmetric quadrotor (4 motors) is modeled")
        if self.axes not in ("roll", "rpy"):
            raise ValueError("axes must be 'roll' or 'rpy'")

    def effectiveness(self) -> np.ndarray:
        """Roll row, or roll/pitch/yaw rows for the motor order RR, FR, RL, FL."""
        if self.axes == "roll":
            return roll_effectiveness(self.C_p, self.n_motors)
        C_q = self.C_p if self.C_q is None else self.C_q
        C_r = self.C_p / 10.0 if self.C_r is None else self.C_r
        return np.array([
            [-self.C_p, -self.C_p, self.C_p, self.C_p],
            [-C_q, C_q, -C_q, C_q],
            [-C_r, C_r, C_r, -C_r],
        ])


@dataclass(frozen=True)
class NoiseConfig:
    """Gyro noise shaping filter coefficients (rad/s).

    Defaults are placeholders of plausible shape, not fitted values.
    ``lag_zero=None`` removes the lag, ``bandpass=None`` removes the band-pass.
    """

    gain: float = 0.02
    lowpass: float = 2 * np.pi * 500.0
    lag_zero: float | None = 2 * np.pi * 100.0
    lag_pole: float | None = 2 * np.pi * 20.0
    bandpass: float | None = 2 * np.pi * 300.0
    bandpass_q: float = 4.0


@dataclass(frozen=True)
class UncertaintyConfig:
    r_C: float = 0.2
    r_tau: float = 0.4
    r0: float = 0.04
    r_inf: float = 1.0


@dataclass(frozen=True)
class ControllerParams:
    """Cascaded attitude controller with lead feedforward ``(s/a+1)/(s/b+1)``."""

    K_eta: float
    K_omega: float
    a_ff: float = 1.0
    b_ff: float = 1.0

    def __post_init__(self):
        if self.K_eta < 0 or self.K_omega < 0:
            raise ValueError("feedback gains must be non-negative")
        if self.a_ff <= 0 or self.b_ff <= 0:
            raise ValueError("feedforward zero and pole must be positive")

    @property
    def unity_feedforward(self) -> bool:
        return self.a_ff == self.b_ff

    def feedforward(self) -> StateSpace:
        if self.unity_feedforward:
            return static_gain(1.0, ["r_eta"], ["r_f"])
        return tf([1.0 / self.a_ff, 1.0], [1.0 / self.b_ff, 1.0], ["r_eta"], ["r_f"])


# ---------------------------------------------------------------------------
# elementary blocks


def indi_filter(cutoff_hz: float = 50.0) -> StateSpace:
    """Critically damped second-order low-pass ``w^2/(s+w)^2``, w = 2 pi cutoff."""
    w = 2 * np.pi * cutoff_hz
    return tf([w * w], [1.0, 2 * w, w * w])


def actuator(tau: float) -> StateSpace:
    return tf([1.0], [tau, 1.0])


def noise_model(config: NoiseConfig = NoiseConfig()) -> StateSpace:
    """``K_n * lowpass * lag * bandpass`` with optional lag/band-pass stages."""
    c = config
    if c.lowpass <= 0:
        raise ValueError("corner frequencies must be positive")
    num = np.array([c.gain * c.lowpass])
    den = np.array([1.0, c.lowpass])
    if c.lag_zero is not None:
        if c.lag_zero <= 0 or c.lag_pole is None or c.lag_pole <= 0:
            raise ValueError("corner frequencies must be positive")
        num = np.polymul(num, [1.0, c.lag_zero])
        den = np.polymul(den, [1.0, c.lag_pole])
    if c.bandpass is not None:
        if c.bandpass <= 0 or c.bandpass_q <= 0:
            raise ValueError("corner frequencies must be positive")
        wb, q = c.bandpass, c.bandpass_q
        num = np.polymul(num, [wb / q, 0.0])
        den = np.polymul(den, [1.0, wb / q, wb * wb])
    return tf(num, den)


def uncertainty_models(params: QuadrotorParams,
                       config: UncertaintyConfig = UncertaintyConfig()) -> tuple[LftModel, LftModel]:
    E = params.effectiveness()
    eff = build_effectiveness_lft(params.C_p, config.r_C, params.n_motors, E=E,
                                  outputs=_axis_names("acc", E.shape[0]))
    wm = build_wm(params.tau, config.r0, config.r_inf)
    act = build_actuator_lft(params.tau, config.r_tau, wm, params.n_motors)
    return eff, act


def _axis_names(base: str, n: int) -> list[str]:
    return [base] if n == 1 else signal_names(base, n)


def _right_inverse(E: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(E) < E.shape[0]:
        raise AllocationError("effectiveness matrix is rank deficient")
    return np.linalg.pinv(E)


def _inner_loop_blocks(E, A, H: StateSpace, E_alloc: np.ndarray | None = None):
    """Blocks of INDI + actuators + effectiveness, with the two analysis points.

    ``E`` is the true effectiveness (matrix or LFT model), ``A`` the true
    actuators (diagonal system ``a_in* -> m*`` or LFT model).  The
    controller allocates with ``E_alloc`` (default: nominal ``E``) and
    estimates actuator state with the nominal actuator model.
    """
    E_nom = E.nominal().D if isinstance(E, LftModel) else np.atleast_2d(E)
    n_ax, n_mot = E_nom.shape
    E_alloc = E_nom if E_alloc is None else np.atleast_2d(E_alloc)
    Einv = _right_inverse(E_alloc)
    A_nom = A.nominal() if isinstance(A, LftModel) else A

    ax = _axis_names("", n_ax)
    est = A_nom.select(["a_in0"], ["m0"])
    blocks: list[StateSpace] = []
    for sfx in ax:
        blocks.append(H.rename([f"Omegadot{sfx}"], [f"_Of{sfx}"]))
        blocks.append(sumblock(f"_err{sfx} = Omegadot_r{sfx} - _Of{sfx}"))
        # every motor shares the same estimator, so the loop
        # m_cmd = H Ahat m_cmd + pinv(E) err runs on the axis signal x with
        # m_cmd = pinv(E) x; this has no null-space estimator states
        blocks.append(sumblock(f"_x{sfx} = _xf{sfx} + _err{sfx}"))
        blocks.append(est.rename([f"_x{sfx}"], [f"_xh{sfx}"]))
        blocks.append(H.rename([f"_xh{sfx}"], [f"_xf{sfx}"]))
    blocks.append(static_gain(Einv, [f"_x{s}" for s in ax], signal_names("m_cmd", n_mot)))
    for i in range(n_mot):
        blocks.append(static_gain(1.0, [f"m_cmd{i}"], [f"m_c{i}"]))
        blocks.append(sumblock(f"a_in{i} = m_c{i} + d_i{i}"))
    blocks.append(A.M if isinstance(A, LftModel) else A)
    if isinstance(E, LftModel):
        blocks.append(E.M)
    else:
        blocks.append(static_gain(E_nom, signal_names("m", n_mot), _axis_names("acc", n_ax)))
    for sfx in ax:
        blocks.append(sumblock(f"Omegadot{sfx} = acc{sfx} + d_Omegadot{sfx}"))
        blocks.append(static_gain(1.0, [f"Omegadot{sfx}"], [f"Omegadot_ap{sfx}"]))
    structure: tuple[DeltaBlock, ...] = ()
    for part in (E, A):
        if isinstance(part, LftModel):
            structure += part.delta_structure
    return blocks, structure


def _zero_sources(names) -> list[StateSpace]:
    return [static_gain(np.zeros((1, 0)), [], [n]) for n in names]


def _diag_actuators(tau: float, n: int) -> StateSpace:
    from .linsys import append
    return append(*[actuator(tau).rename([f"a_in{i}"], [f"m{i}"]) for i in range(n)])


def indi_inner_loop(E, A, H: StateSpace, E_alloc: np.ndarray | None = None):
    """Map ``Omegadot_r -> Omegadot`` through the incremental inner loop.

    ``A`` may be a per-motor actuator (applied to every motor), a diagonal
    ``a_in* -> m*`` system, or an actuator LFT; with an LFT (for ``A`` or
    ``E``) the result is an :class:`LftModel` exposing the same perturbation.
    """
    E_nom = E.nominal().D if isinstance(E, LftModel) else np.atleast_2d(E)
    n_ax, n_mot = E_nom.shape
    if not isinstance(A, LftModel) and A.ninputs == 1:
        tau = -1.0 / A.poles()[0].real
        A = _diag_actuators(tau, n_mot)
    blocks, structure = _inner_loop_blocks(E, A, H, E_alloc)
    ax = _axis_names("", n_ax)
    ins = [f"Omegadot_r{s}" for s in ax]
    outs = [f"Omegadot{s}" for s in ax]
    d_in = [b.from_delta for b in structure]
    d_out = [b.to_delta for b in structure]
    zero_dist = _zero_sources([f"d_Omegadot{s}" for s in ax] + signal_names("d_i", n_mot))
    sys = interconnect(blocks + zero_dist, d_in + ins, d_out + outs, minimal=False)
    if structure:
        return LftModel(sys, structure)
    return sys


# ---------------------------------------------------------------------------
# the full diagram

BREAK_POINTS = {
    "m_c": signal_names("m_c", 4),
    "Omegadot": ["Omegadot_ap"],
    "Omega": ["Omega"],
    "eta": ["eta"],
}

EXOGENOUS_INPUTS = ("r_eta", "d_eta", "d_Omegadot", *signal_names("d_i", 4), "n_Omega")
PERFORMANCE_OUTPUTS = (*signal_names("m_c", 4), "Omegadot", "Omega", "eta", "e_ref_eta")
MEASUREMENTS = ("r_eta", "eta_m", "Omega_m")
CONTROL_INPUT = "Omegadot_r"


@dataclass
class DesignPlant:
    """Open design plant plus its channel map."""

    blocks: tuple[StateSpace, ...]
    params: QuadrotorParams
    delta_structure: tuple[DeltaBlock, ...] = ()
    exogenous_inputs: tuple[str, ...] = EXOGENOUS_INPUTS
    performance_outputs: tuple[str, ...] = PERFORMANCE_OUTPUTS
    measurements: tuple[str, ...] = MEASUREMENTS
    control_input: str = CONTROL_INPUT
    break_points: dict = field(default_factory=lambda: dict(BREAK_POINTS))

    @property
    def uncertain(self) -> bool:
        return bool(self.delta_structure)

    @property
    def system_inputs(self) -> list[str]:
        return ([b.from_delta for b in self.delta_structure]
                + list(self.exogenous_inputs) + [self.control_input])

    @property
    def system_outputs(self) -> list[str]:
        return ([b.to_delta for b in self.delta_structure]
                + list(self.performance_outputs) + list(self.measurements))

    @property
    def system(self) -> StateSpace:
        """Open-loop plant ``P``: perturbation, exogenous and control channels."""
        return interconnect(self.blocks, self.system_inputs, self.system_outputs)

    @property
    def channels(self) -> dict[str, dict[str, int]]:
        return {"inputs": {n: i for i, n in enumerate(self.system_inputs)},
                "outputs": {n: i for i, n in enumerate(self.system_outputs)}}

    def as_lft(self) -> LftModel:
        return LftModel(self.system, self.delta_structure)


def assemble_design_plant(params: QuadrotorParams = QuadrotorParams(),
                          uncertainty: Sequence[LftModel] | None = None,
                          N: StateSpace | None = None, H: StateSpace | None = None,
                          Tref: StateSpace | None = None) -> DesignPlant:
    """Wire the roll-axis design plant.

    ``uncertainty`` is ``(effectiveness_lft, actuator_lft)`` or ``None``.
    ``Tref`` defaults to unity, in which case ``e_ref_eta = r_eta - eta``.
    """
    if params.axes != "roll":
        raise ValueError("the design plant is a single (roll) axis")
    N = noise_model() if N is None else N
    H = indi_filter() if H is None else H
    n = params.n_motors
    if uncertainty is None:
        E, A = params.effectiveness(), _diag_actuators(params.tau, n)
    else:
        E, A = uncertainty
    if Tref is None:
        Tref = static_gain(1.0)
    elif Tref.nstates != 3 or np.any(Tref.D):
        raise ValueError("reference model must be strictly proper and third order")
    blocks, structure = _inner_loop_blocks(E, A, H)
    blocks += [
        integrator("Omegadot_ap", "Omega"),
        integrator("Omega", "_eta_p"),
        sumblock("eta = _eta_p + d_eta"),
        N.rename(["n_Omega"], ["_nf"]),
        integrator("_nf", "_eta_n"),
        sumblock("Omega_m = Omega + _nf"),
        sumblock("eta_m = eta + _eta_n"),
        Tref.rename(["r_eta"], ["_eta_ref"]),
        sumblock("e_ref_eta = _eta_ref - eta"),
    ]
    return DesignPlant(tuple(blocks), params, structure)


def _with_injection(blocks: list[StateSpace], names: Sequence[str]) -> list[StateSpace]:
    out = []
    for b in blocks:
        if any(n in names for n in b.outputs):
            b = b.rename(outputs=[f"{n}__raw" if n in names else n for n in b.outputs])
        out.append(b)
    out += [sumblock(f"{n} = {n}__raw + {n}__in") for n in names]
    return out


def controller_blocks(ctrl: ControllerParams) -> list[StateSpace]:
    k = ctrl.K_omega * ctrl.K_eta
    return [
        ctrl.feedforward(),
        static_gain([[k, -k, -ctrl.K_omega]], ["r_f", "eta_m", "Omega_m"], [CONTROL_INPUT]),
    ]


def close_loop(plant: DesignPlant, ctrl: ControllerParams, inputs: Sequence[str],
               outputs: Sequence[str], open_at: Sequence[str] = (),
               delta: DeltaSample | None = None, minimal: bool = True,
               inject: Sequence[str] = ()) -> StateSpace:
    """Closed-loop map between named signals, optionally with loops cut at
    ``open_at`` and the perturbation closed at ``delta`` (zero if omitted).

    Each signal ``s`` in ``inject`` gets an additive input ``s__in``
    (``s = produced + s__in``), which gives sensitivities directly from
    the closed-loop states.
    """
    blocks = list(plant.blocks) + controller_blocks(ctrl)
    if inject:
        blocks = _with_injection(blocks, inject)
    if plant.delta_structure:
        sample = zero_sample(plant.delta_structure) if delta is None else delta
        blocks.append(delta_system(plant.delta_structure, sample))
    elif delta is not None and (delta.real_scalars.size or delta.dynamic_blocks):
        raise ValueError("nominal plant has no perturbation channels")
    blocks += _zero_sources(n for n in plant.exogenous_inputs if n not in inputs)
    return interconnect(blocks, inputs, outputs, open_at=open_at, minimal=minimal)
