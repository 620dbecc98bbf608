"""Fixed-structure tuning of the cascaded attitude controller and generation
of the actuator-time-constant gain schedule.

Feedback gains are tuned against two hard constraints, a sensitivity shape
bound on ``S_o,eta`` and a disk-margin bound at the angular-acceleration
break point, while the sensitivity bandwidth ``omega_S`` is pushed up
through the co-design gain ``N/(1 + N omega)``.  The lead feedforward is
then tuned for model following against a third-order reference model.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .linsys import (ClassificationError, StateSpace, UnstableSystemError, _evaluate,
                     classify_poles, hinf_norm, step_metrics, tf)
from .margins import break_sensitivity, default_scaling, nominal_margins
from .plant import (ControllerParams, DesignPlant, QuadrotorParams, assemble_design_plant,
                    close_loop, indi_filter, noise_model)

__all__ = [
    "ControllerParams",
    "WeightConfig",
    "RefModelParams",
    "DesignPoint",
    "GainSchedule",
    "InfeasibleDesignError",
    "ScheduleError",
    "weight_soeta",
    "weight_model_following",
    "codesign_gain",
    "reference_model",
    "tune_feedback",
    "derive_reference_model",
    "tune_feedforward",
    "design_point",
    "synthesize_schedule",
    "interpolate",
    "save_schedule",
    "load_schedule",
    "schedule_to_json",
    "schedule_from_json",
]

SCHEDULE_FORMAT = "robust-indi-gain-schedule"
SCHEDULE_VERSION = 1
CERT_TOL = 1e-6


class InfeasibleDesignError(RuntimeError):
    """No point met the hard constraints; ``best`` holds the best attempt."""

    def __init__(self, message: str, best: dict | None = None):
        super().__init__(message)
        self.best = best or {}


class ScheduleError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightConfig:
    """Weighting filters and co-design settings.

    ``M_S``/``A_S`` bound ``|S_o,eta|`` at high/low frequency, ``A_M``/``M_M``
    bound the model-following error the same way.  ``omega_S`` and
    ``omega_M`` are filled in by the tuning.
    """

    M_S: float = 10 ** (6 / 20)
    A_S: float = 10 ** (-50 / 20)
    omega_S: float | None = None
    alpha_target: float = 0.764
    sigma: float = 0.0
    omega_M: float | None = None
    N_codesign: float = 1000.0
    A_M: float = 10 ** (-90 / 20)
    M_M: float = 1.0

    def __post_init__(self):
        if not self.A_S < 1.0 < self.M_S:
            raise ValueError("sensitivity bounds must satisfy A_S < 1 < M_S")
        if not 0.0 < self.alpha_target < 2.0:
            raise ValueError("alpha_target must lie in (0, 2)")
        if not 0.0 < self.A_M < self.M_M:
            raise ValueError("model-following bounds must satisfy 0 < A_M < M_M")
        if self.N_codesign <= 0:
            raise ValueError("N_codesign must be positive")


@dataclass(frozen=True)
class RefModelParams:
    omega_ref: float
    zeta_ref: float
    b_ref: float

    def __post_init__(self):
        if not 0.0 < self.zeta_ref < 1.0:
            raise ValueError("zeta_ref must lie in (0, 1)")
        if self.omega_ref <= 0 or self.b_ref <= 0:
            raise ValueError("reference model frequencies must be positive")


def _same(a, b) -> bool:
    """Deep equality where NaN equals NaN (certified margins may be undefined)."""
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass(eq=False)
class DesignPoint:
    tau: float
    controller: ControllerParams
    weights: WeightConfig
    refmodel: RefModelParams
    certified: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, DesignPoint):
            return NotImplemented
        return (self.tau == other.tau and self.controller == other.controller
                and self.weights == other.weights and self.refmodel == other.refmodel
                and _same(self.certified, other.certified))


@dataclass
class GainSchedule:
    points: list[DesignPoint]
    interpolation: str = "linear"

    def __post_init__(self):
        taus = [p.tau for p in self.points]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ScheduleError("design points must have strictly increasing tau")

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])


# ---------------------------------------------------------------------------
# weights


def _lowpass_weight(omega: float, low: float, high: float) -> StateSpace:
    # W = (s/high + omega)/(s + omega*low): |1/W| goes from low (DC) to high
    return tf([1.0 / high, omega], [1.0, omega * low])


def weight_soeta(cfg: WeightConfig, omega_S: float | None = None) -> StateSpace:
    """Sensitivity weight; ``|1/W|`` rises from ``A_S`` (DC) to ``M_S`` (HF)."""
    w = cfg.omega_S if omega_S is None else omega_S
    if w is None or w <= 0:
        raise ValueError("omega_S must be positive")
    return _lowpass_weight(w, cfg.A_S, cfg.M_S)


def weight_model_following(cfg: WeightConfig, omega_M: float | None = None) -> StateSpace:
    """Model-following weight; ``|1/W|`` rises from ``A_M`` to ``M_M``."""
    w = cfg.omega_M if omega_M is None else omega_M
    if w is None or w <= 0:
        raise ValueError("omega_M must be positive")
    return _lowpass_weight(w, cfg.A_M, cfg.M_M)


def codesign_gain(omega: float, N: float = 1000.0) -> float:
    """Soft objective ``N / (1 + N omega)``; decreasing in ``omega``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return N / (1.0 + N * omega)


def _max_bandwidth(w: np.ndarray, mag: np.ndarray, low: float, high: float) -> float:
    """Largest ``omega`` with ``|mag| <= |1/W(jw)|`` on the grid.

    ``|1/W|^2 = (w^2 + omega^2 low^2) / (w^2/high^2 + omega^2)``; solving
    the bound for ``omega`` pointwise gives the formula below.  Returns 0 if
    ``mag`` exceeds ``high`` anywhere and the grid top if nothing binds.
    """
    if np.any(mag > high):
        return 0.0
    active = mag > low
    if not np.any(active):
        return float(w[-1])
    m2 = mag[active] ** 2
    bound = w[active] * np.sqrt((1.0 - m2 / high ** 2) / (m2 - low ** 2))
    return float(bound.min())


def reference_model(ref: RefModelParams) -> StateSpace:
    """``w^2 b / ((s^2 + 2 zeta w s + w^2)(s + b))``, unit DC gain."""
    w, z, b = ref.omega_ref, ref.zeta_ref, ref.b_ref
    den = np.polymul([1.0, 2 * z * w, w * w], [1.0, b])
    return tf([w * w * b], den, ["r_eta"], ["eta_ref"])


# ---------------------------------------------------------------------------
# feedback tuning


def design_grid(tau: float, n: int = 3000) -> np.ndarray:
    """Log grid in units of ``1/tau``; the nominal problem is scale invariant."""
    return np.logspace(-4.0, 3.0, n) / tau


def _feedback_loops(plant: DesignPlant, ctrl: ControllerParams):
    S_eta = close_loop(plant, ctrl, ["d_eta"], ["eta"])
    S_acc = break_sensitivity(plant, ctrl, "Omegadot")
    return S_eta, S_acc


def _gains(x, tau: float) -> tuple[float, float]:
    return math.exp(x[0]) / tau, math.exp(x[1]) / tau


@dataclass
class _FeedbackEval:
    x: tuple
    feasible: bool
    omega_S: float
    disk: float
    objective: float


def _eval_feedback(plant: DesignPlant, cfg: WeightConfig, w: np.ndarray, x, alpha: float):
    if np.any(np.abs(np.asarray(x)) > 30.0):
        # gains beyond e^30 / tau overflow the loop algebra
        return _FeedbackEval(tuple(x), False, 0.0, math.inf, 1e6)
    K_eta, K_omega = _gains(x, plant.params.tau)
    ctrl = ControllerParams(K_eta, K_omega)
    S_eta, S_acc = _feedback_loops(plant, ctrl)
    if not (S_eta.is_stable() and S_acc.is_stable()):
        return _FeedbackEval(tuple(x), False, 0.0, math.inf, 1e6)
    shift = (cfg.sigma - 1.0) / 2.0
    disk = alpha * float(np.max(np.abs(_evaluate(S_acc, w)[:, 0, 0] + shift)))
    mag = np.abs(_evaluate(S_eta, w)[:, 0, 0])
    omega_S = _max_bandwidth(w, mag, cfg.A_S, cfg.M_S)
    if disk > 1.0 or omega_S <= 0.0:
        shape = float(mag.max()) / cfg.M_S
        return _FeedbackEval(tuple(x), False, 0.0, disk, 1000.0 + max(disk, shape))
    return _FeedbackEval(tuple(x), True, omega_S, disk,
                         codesign_gain(omega_S, cfg.N_codesign))


def _certify_feedback(plant, cfg, ctrl, omega_S):
    S_eta, S_acc = _feedback_loops(plant, ctrl)
    shift = (cfg.sigma - 1.0) / 2.0
    shifted = S_acc + StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
                                 [[shift]], S_acc.inputs, S_acc.outputs)
    disk = cfg.alpha_target * hinf_norm(shifted, rel_tol=CERT_TOL)
    # back off omega_S until the shape constraint certifies
    lo, hi = 0.0, omega_S
    shape = hinf_norm(weight_soeta(cfg, hi) * S_eta, rel_tol=CERT_TOL)
    if shape > 1.0:
        lo = omega_S * 0.9
        for _ in range(60):
            if hinf_norm(weight_soeta(cfg, lo) * S_eta, rel_tol=CERT_TOL) <= 1.0:
                break
            lo *= 0.9
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if hinf_norm(weight_soeta(cfg, mid) * S_eta, rel_tol=CERT_TOL) <= 1.0:
                lo = mid
            else:
                hi = mid
        omega_S = lo
        shape = hinf_norm(weight_soeta(cfg, omega_S) * S_eta, rel_tol=CERT_TOL)
    return omega_S, shape, disk


def _default_starts(rng: np.random.Generator, n: int) -> list[np.ndarray]:
    base = [np.log([0.1, 1.0]), np.log([0.3, 2.0]), np.log([0.05, 0.5])]
    extra = [np.log([0.2, 0.6]) + rng.normal(0.0, 0.7, 2) for _ in range(max(0, n - 3))]
    return (base + extra)[:max(n, 1)]


def _nelder_mead(fun, x0, budget: int, step: float | None = None):
    opts = dict(xatol=1e-7, fatol=1e-10, maxfev=budget)
    if step is not None:
        x0 = np.asarray(x0, dtype=float)
        simplex = np.vstack([x0, x0 + [step, 0.0], x0 + [0.0, step]])
        opts["initial_simplex"] = simplex
    return minimize(fun, x0, method="Nelder-Mead", options=opts)


def tune_feedback(plant: DesignPlant, cfg: WeightConfig = WeightConfig(), budget: int = 1500,
                  seed: int = 0, x0: Sequence[float] | None = None, n_starts: int = 3,
                  grid: np.ndarray | None = None):
    """Tune ``(K_eta, K_omega)`` and the co-designed ``omega_S``.

    Search variables are ``log(K tau)``.  For fixed gains the largest
    admissible ``omega_S`` has a closed form on the frequency grid, so the
    optimizer only sees the two gains: infeasible points score
    ``1000 + violation`` and feasible ones the co-design gain.  The result
    is re-certified with the Hamiltonian norm at ``rel_tol=1e-6`` and
    ``omega_S`` is backed off if the grid missed a peak.

    Returns ``(ControllerParams, omega_S, info)``.
    """
    tau = plant.params.tau
    w = design_grid(tau) if grid is None else np.asarray(grid)
    rng = np.random.default_rng(seed)
    per_start = max(50, budget // max(1, n_starts + (x0 is not None)))
    alpha = cfg.alpha_target
    best = None
    for attempt in range(4):
        cache: dict[tuple, _FeedbackEval] = {}

        def fun(x):
            key = tuple(np.round(x, 12))
            if key not in cache:
                cache[key] = _eval_feedback(plant, cfg, w, x, alpha)
            return cache[key].objective

        runs = []
        if x0 is not None:
            runs.append(_nelder_mead(fun, x0, per_start, step=0.02))
        else:
            for start in _default_starts(rng, n_starts):
                runs.append(_nelder_mead(fun, start, per_start))
        best_run = min(runs, key=lambda r: (r.fun, tuple(r.x)))
        best = cache[tuple(np.round(best_run.x, 12))]
        if not best.feasible:
            K_eta, K_omega = _gains(best.x, tau)
            raise InfeasibleDesignError(
                f"no feasible feedback gains at tau={tau:g}",
                {"tau": tau, "K_eta": K_eta, "K_omega": K_omega,
                 "disk": best.disk, "objective": best.objective})
        ctrl = ControllerParams(*_gains(best.x, tau))
        omega_S, shape, disk = _certify_feedback(plant, cfg, ctrl, best.omega_S)
        if disk <= 1.0 + CERT_TOL * 1e-2:
            break
        # the grid under-resolved the disk peak: tighten and retry
        alpha *= disk * (1.0 + 1e-7)
        if x0 is None:
            x0 = best.x
    else:
        raise InfeasibleDesignError(f"disk constraint did not certify at tau={tau:g}",
                                    {"tau": tau, "disk": disk})
    info = {"x": [float(v) for v in best.x], "shape": shape, "disk": disk,
            "n_evals": len(cache)}
    return ctrl, omega_S, info


# ---------------------------------------------------------------------------
# reference model


def _overshoot(ref: RefModelParams) -> float:
    return step_metrics(reference_model(ref)).overshoot


def derive_reference_model(closed_loop: StateSpace, band: tuple[float, float] = (0.045, 0.05),
                           max_iter: int = 60) -> RefModelParams:
    """Reference model from the feedback-only closed loop ``r -> eta``.

    ``b_ref`` is the real pole, ``omega_ref`` the dominant pair's natural
    frequency; ``zeta_ref`` is bisected until the model's step overshoot
    lands in ``band``.  Without a complex pair ``omega_ref`` is the slowest
    pole and ``b_ref`` the fastest.
    """
    try:
        cls = classify_poles(closed_loop)
        omega_ref = cls.omega_n
        reals = np.abs(np.asarray(cls.real_poles).real)
        if reals.size:
            b_ref = float(reals.min())
        else:
            others = [abs(p) for p in cls.complex_poles if abs(p.real) > abs(cls.dominant.real)]
            b_ref = float(min(others)) if others else 10.0 * omega_ref
    except ClassificationError:
        mags = np.abs(closed_loop.poles())
        omega_ref, b_ref = float(mags.min()), float(mags.max())
    lo, hi = 1e-3, 0.999
    best = None
    for _ in range(max_iter):
        zeta = 0.5 * (lo + hi)
        os_ = _overshoot(RefModelParams(omega_ref, zeta, b_ref))
        dist = 0.0 if band[0] <= os_ <= band[1] else min(abs(os_ - band[0]), abs(os_ - band[1]))
        if best is None or dist < best[0]:
            best = (dist, zeta)
        if dist == 0.0:
            break
        if os_ > band[1]:
            lo = zeta
        else:
            hi = zeta
    return RefModelParams(float(omega_ref), float(best[1]), float(b_ref))


# ---------------------------------------------------------------------------
# feedforward tuning


def _ff_params(x) -> tuple[float, float]:
    a = math.exp(x[0])
    return a, a * math.exp(x[1] ** 2)


def tune_feedforward(plant: DesignPlant, ctrl: ControllerParams, ref: RefModelParams,
                     cfg: WeightConfig = WeightConfig(), budget: int = 800,
                     x0: Sequence[float] | None = None, grid: np.ndarray | None = None):
    """Tune the lead ``(s/a + 1)/(s/b + 1)``, ``b >= a``, for model following.

    Maximizes ``omega_M`` subject to ``||W_M (T_ref - F T)||_inf <= 1`` with
    the feedback frozen.  Returns ``(ControllerParams, omega_M, info)``.
    """
    tau = plant.params.tau
    w = design_grid(tau) if grid is None else np.asarray(grid)
    fb = ControllerParams(ctrl.K_eta, ctrl.K_omega)
    T = _evaluate(close_loop(plant, fb, ["r_eta"], ["eta"]), w)[:, 0, 0]
    Tref = _evaluate(reference_model(ref), w)[:, 0, 0]
    s = 1j * w

    def omega_m(x):
        a, b = _ff_params(x)
        M = Tref - (s / a + 1.0) / (s / b + 1.0) * T
        return _max_bandwidth(w, np.abs(M), cfg.A_M, cfg.M_M)

    def fun(x):
        if abs(x[0]) > 50:
            return 2e3
        om = omega_m(x)
        if om <= 0.0:
            return 1000.0 + 1.0
        return codesign_gain(om, cfg.N_codesign)

    starts = [np.array([math.log(ref.b_ref), 0.0]),
              np.array([math.log(0.7 * ref.b_ref), 0.6]),
              np.array([math.log(0.5 * ref.b_ref), 1.0])]
    runs = []
    if x0 is not None:
        runs.append(_nelder_mead(fun, x0, budget // 2, step=0.02))
    for st in starts:
        runs.append(_nelder_mead(fun, st, budget // len(starts)))
    best = min(runs, key=lambda r: (r.fun, tuple(r.x)))
    if best.fun >= 1000.0:
        a, b = _ff_params(best.x)
        raise InfeasibleDesignError(f"model following infeasible at tau={tau:g}",
                                    {"tau": tau, "a_ff": a, "b_ff": b})
    a, b = _ff_params(best.x)
    if best.x[1] ** 2 < 1e-9:
        b = a
    out = ControllerParams(ctrl.K_eta, ctrl.K_omega, a, b)
    omega_M, norm = _certify_feedforward(plant, out, ref, cfg, omega_m(best.x))
    return out, omega_M, {"x": [float(v) for v in best.x], "model_following": norm}


def _certify_feedforward(plant, ctrl, ref, cfg, omega_M):
    tplant = replace(plant, blocks=_with_reference(plant, ref))
    M = close_loop(tplant, ctrl, ["r_eta"], ["e_ref_eta"])

    def norm(om):
        return hinf_norm(weight_model_following(cfg, om) * M, rel_tol=CERT_TOL)

    val = norm(omega_M)
    if val <= 1.0:
        return omega_M, val
    lo, hi = omega_M * 0.9, omega_M
    while norm(lo) > 1.0:
        lo *= 0.9
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if norm(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo, norm(lo)


def _with_reference(plant: DesignPlant, ref: RefModelParams) -> tuple:
    """Plant blocks with the reference model installed in ``e_ref_eta``."""
    Tref = reference_model(ref).rename(["r_eta"], ["_eta_ref"])
    return tuple(Tref if "_eta_ref" in b.outputs else b for b in plant.blocks)


# ---------------------------------------------------------------------------
# design points and schedules

BREAK_ORDER = ("m_c", "eta", "Omega", "Omegadot")


def certify_point(plant: DesignPlant, ctrl: ControllerParams, weights: WeightConfig,
                  ref: RefModelParams) -> dict:
    """Recompute every constraint and the nominal margins at ``rel_tol=1e-6``."""
    S_eta, S_acc = _feedback_loops(plant, ctrl)
    shift = (weights.sigma - 1.0) / 2.0
    from .linsys import static_gain
    disk = weights.alpha_target * hinf_norm(S_acc + static_gain(shift, S_acc.inputs, S_acc.outputs),
                                            rel_tol=CERT_TOL)
    shape = hinf_norm(weight_soeta(weights) * S_eta, rel_tol=CERT_TOL)
    tplant = replace(plant, blocks=_with_reference(plant, ref))
    M = close_loop(tplant, ctrl, ["r_eta"], ["e_ref_eta"])
    follow = hinf_norm(weight_model_following(weights) * M, rel_tol=CERT_TOL)
    T = close_loop(plant, ctrl, ["r_eta"], ["eta"])
    margins = {}
    for bp in BREAK_ORDER:
        cm, dm = nominal_margins(plant, ctrl, bp, channel=0, sigma=weights.sigma)
        lo, hi = dm.gm_db
        margins[bp] = {"gm_db": cm.gm_db, "gm_lower_db": cm.gm_lower_db, "pm_deg": cm.pm_deg,
                       "alpha": dm.alpha_max, "dgm_db": hi, "dpm_deg": dm.pm_deg}
    _, dm = nominal_margins(plant, ctrl, ["m_c", "Omegadot"], channel=None, sigma=weights.sigma)
    margins["m_c+Omegadot"] = {"alpha": dm.alpha_max, "dgm_db": dm.gm_db[1], "dpm_deg": dm.pm_deg}
    return {
        "constraint_soeta": shape,
        "constraint_disk": disk,
        "constraint_model_following": follow,
        "overshoot": step_metrics(T).overshoot,
        "bandwidth_soeta": sensitivity_bandwidth(S_eta),
        "margins": margins,
    }


def sensitivity_bandwidth(S: StateSpace, level_db: float = -3.0) -> float:
    """First frequency where ``|S|`` crosses ``level_db`` from below."""
    from scipy.optimize import brentq
    mags = np.abs(S.poles())
    w = np.logspace(np.log10(mags.min()) - 4, np.log10(mags.max()) + 2, 4000)
    level = 10 ** (level_db / 20)
    f = np.abs(_evaluate(S, w)[:, 0, 0]) - level
    idx = np.nonzero((f[:-1] < 0) & (f[1:] >= 0))[0]
    if idx.size == 0:
        return math.inf
    k = idx[0]
    return float(brentq(lambda x: abs(S(1j * x)[0, 0]) - level, w[k], w[k + 1], xtol=1e-12))


def design_point(params: QuadrotorParams, cfg: WeightConfig = WeightConfig(), seed: int = 0,
                 N: StateSpace | None = None, H: StateSpace | None = None,
                 x0_feedback=None, x0_feedforward=None, budget: int = 1500):
    """Full pipeline at one ``tau``: feedback, reference model, feedforward,
    certification.  Returns ``(DesignPoint, warm-start info)``."""
    plant = assemble_design_plant(params, N=N, H=H)
    ctrl, omega_S, fb_info = tune_feedback(plant, cfg, budget, seed, x0=x0_feedback)
    T = close_loop(plant, ctrl, ["r_eta"], ["eta"])
    if T.nstates == 0 or not T.is_stable() or abs(T.dcgain()[0, 0] - 1.0) > 1e-6:
        # the optimizer can only satisfy the constraints by switching the loop off
        raise InfeasibleDesignError(f"degenerate feedback at tau={params.tau:g}",
                                    {"tau": params.tau, "K_eta": ctrl.K_eta,
                                     "K_omega": ctrl.K_omega, "omega_S": omega_S})
    ref = derive_reference_model(T)
    ctrl, omega_M, ff_info = tune_feedforward(plant, ctrl, ref, cfg, x0=x0_feedforward)
    weights = replace(cfg, omega_S=omega_S, omega_M=omega_M)
    cert = certify_point(plant, ctrl, weights, ref)
    for key in ("constraint_soeta", "constraint_disk", "constraint_model_following"):
        if cert[key] > 1.0 + CERT_TOL:
            raise InfeasibleDesignError(f"{key} = {cert[key]:.9g} fails certification "
                                        f"at tau={params.tau:g}", cert)
    point = DesignPoint(params.tau, ctrl, weights, ref, cert)
    return point, {"feedback": fb_info["x"], "feedforward": ff_info["x"]}


def synthesize_schedule(tau_min: float = 0.010, tau_max: float = 0.080, n_points: int = 30,
                        cfg: WeightConfig = WeightConfig(), seed: int = 0,
                        params: QuadrotorParams = QuadrotorParams(),
                        N: StateSpace | None = None, H: StateSpace | None = None,
                        warm_start: bool = True, budget: int = 1500,
                        progress=None) -> GainSchedule:
    """Design points on ``n_points`` linearly spaced time constants.

    With ``warm_start`` each point starts from its neighbor's solution
    (search variables are ``log(K tau)``, so no rescaling is needed).
    """
    if n_points < 2:
        raise ValueError("a schedule needs at least two points")
    if not 0 < tau_min < tau_max:
        raise ValueError("need 0 < tau_min < tau_max")
    N = noise_model() if N is None else N
    H = indi_filter() if H is None else H
    points = []
    warm = None
    for k, tau in enumerate(np.linspace(tau_min, tau_max, n_points)):
        p = replace(params, tau=float(tau))
        try:
            pt, warm_next = design_point(
                p, cfg, seed + k, N, H,
                x0_feedback=warm["feedback"] if warm else None,
                x0_feedforward=warm["feedforward"] if warm else None,
                budget=budget)
        except InfeasibleDesignError as exc:
            raise ScheduleError(f"design point {k} (tau={tau:g}) infeasible: {exc}") from exc
        points.append(pt)
        if warm_start:
            warm = warm_next
        if progress is not None:
            progress(k, pt)
    return GainSchedule(points)


def interpolate(schedule: GainSchedule, tau_query: float):
    """Piecewise-linear lookup of controller and reference model in ``tau``;
    queries outside the grid are clamped with a warning."""
    if not schedule.points:
        raise ScheduleError("empty schedule")
    taus = schedule.taus
    if tau_query < taus[0] or tau_query > taus[-1]:
        warnings.warn(f"tau={tau_query:g} outside schedule [{taus[0]:g}, {taus[-1]:g}]; clamped",
                      stacklevel=2)
        tau_query = float(np.clip(tau_query, taus[0], taus[-1]))
    k = int(np.searchsorted(taus, tau_query))
    if k < len(taus) and taus[k] == tau_query:
        p = schedule.points[k]
        return p.controller, p.refmodel
    lo, hi = schedule.points[k - 1], schedule.points[k]
    t = (tau_query - lo.tau) / (hi.tau - lo.tau)

    def mix(x, y):
        return (1.0 - t) * x + t * y

    c0, c1 = lo.controller, hi.controller
    ctrl = ControllerParams(mix(c0.K_eta, c1.K_eta), mix(c0.K_omega, c1.K_omega),
                            mix(c0.a_ff, c1.a_ff), mix(c0.b_ff, c1.b_ff))
    r0, r1 = lo.refmodel, hi.refmodel
    ref = RefModelParams(mix(r0.omega_ref, r1.omega_ref), mix(r0.zeta_ref, r1.zeta_ref),
                         mix(r0.b_ref, r1.b_ref))
    return ctrl, ref


# ---------------------------------------------------------------------------
# schedule file


def _encode(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _encode(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_encode(v) for v in x]
    if isinstance(x, np.floating):
        return _encode(float(x))
    return x


def _decode(x):
    if x in ("nan", "inf", "-inf"):
        return float(x)
    if isinstance(x, dict):
        return {k: _decode(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_decode(v) for v in x]
    return x


def schedule_to_json(schedule: GainSchedule) -> str:
    points = []
    for p in schedule.points:
        points.append({
            "tau": p.tau,
            "K_eta": p.controller.K_eta,
            "K_omega": p.controller.K_omega,
            "a_ff": p.controller.a_ff,
            "b_ff": p.controller.b_ff,
            "omega_ref": p.refmodel.omega_ref,
            "zeta_ref": p.refmodel.zeta_ref,
            "b_ref": p.refmodel.b_ref,
            "weights": asdict(p.weights),
            "certified": p.certified,
        })
    doc = {"format": SCHEDULE_FORMAT, "version": SCHEDULE_VERSION,
           "interpolation": schedule.interpolation, "points": points}
    return json.dumps(_encode(doc), indent=2, allow_nan=False) + "\n"


def schedule_from_json(text: str) -> GainSchedule:
    doc = _decode(json.loads(text))
    if doc.get("format") != SCHEDULE_FORMAT:
        raise ScheduleError("not a gain schedule file")
    if doc.get("version") != SCHEDULE_VERSION:
        raise ScheduleError(f"unsupported schedule version {doc.get('version')!r}")
    points = []
    for r in doc["points"]:
        points.append(DesignPoint(
            tau=r["tau"],
            controller=ControllerParams(r["K_eta"], r["K_omega"], r["a_ff"], r["b_ff"]),
            weights=WeightConfig(**r["weights"]),
            refmodel=RefModelParams(r["omega_ref"], r["zeta_ref"], r["b_ref"]),
            certified=r.get("certified", {}),
        ))
    return GainSchedule(points, doc.get("interpolation", "linear"))


def save_schedule(schedule: GainSchedule, path) -> None:
    Path(path).write_text(schedule_to_json(schedule))


def load_schedule(path) -> GainSchedule:
    return schedule_from_json(Path(path).read_text())
