"""Disk and classical stability margins at the analysis points of the design
plant, nominal and sampled worst case."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .linsys import (StateSpace, UnstableSystemError, _evaluate, hinf_norm, inverse,
                     minreal, static_gain)
from .plant import ControllerParams, DesignPlant, close_loop
from .uncertainty import DeltaSample, sample_delta, zero_sample

__all__ = [
    "DiskMarginResult",
    "ClassicalMargins",
    "WorstCaseResult",
    "UnstableClosedLoopError",
    "disk_gain_phase",
    "alpha_from_gain",
    "alpha_from_phase",
    "disk_margin",
    "classical_margins",
    "break_loop",
    "loop_sensitivity",
    "break_sensitivity",
    "default_scaling",
    "nominal_margins",
    "worst_case_sampled",
    "MARGIN_COLUMNS",
    "margins_csv",
]


class UnstableClosedLoopError(ValueError):
    pass


# ---------------------------------------------------------------------------
# disk margins


def disk_gain_phase(alpha: float, sigma: float = 0.0) -> tuple[float, float, float]:
    """Gain interval and phase margin (deg) guaranteed by a disk of size ``alpha``.

    Returns ``(gamma_min, gamma_max, pm_deg)``; ``gamma_max`` is ``inf`` once
    ``alpha (1 + sigma) >= 2``.
    """
    if alpha < 0:
        raise ValueError("disk size must be non-negative")
    g_min = max((2.0 - alpha * (1.0 - sigma)) / (2.0 + alpha * (1.0 + sigma)), 0.0)
    if alpha * (1.0 + sigma) >= 2.0:
        g_max = math.inf
        c = g_min
    else:
        g_max = (2.0 + alpha * (1.0 - sigma)) / (2.0 - alpha * (1.0 + sigma))
        c = (1.0 + g_min * g_max) / (g_min + g_max)
    pm = math.degrees(math.acos(min(1.0, max(-1.0, c))))
    return g_min, g_max, pm


def alpha_from_gain(gamma_max: float, sigma: float = 0.0) -> float:
    """Inverse of the upper gain limit of :func:`disk_gain_phase`."""
    if math.isinf(gamma_max):
        return 2.0 / (1.0 + sigma)
    return 2.0 * (gamma_max - 1.0) / (gamma_max * (1.0 + sigma) + 1.0 - sigma)


def alpha_from_phase(pm_deg: float) -> float:
    """Inverse of the phase margin for a symmetric disk (``sigma = 0``)."""
    return 2.0 * math.tan(math.radians(pm_deg) / 2.0)


@dataclass(frozen=True)
class DiskMarginResult:
    alpha_max: float
    sigma: float
    gm_range: tuple[float, float]
    pm_range: tuple[float, float]
    break_point: str = ""

    @classmethod
    def from_alpha(cls, alpha: float, sigma: float = 0.0, break_point: str = ""):
        g_min, g_max, pm = disk_gain_phase(alpha, sigma)
        return cls(float(alpha), sigma, (g_min, g_max), (-pm, pm), break_point)

    @property
    def gm_db(self) -> tuple[float, float]:
        lo, hi = self.gm_range
        return (20 * math.log10(lo) if lo > 0 else -math.inf,
                20 * math.log10(hi) if math.isfinite(hi) else math.inf)

    @property
    def pm_deg(self) -> float:
        return self.pm_range[1]


def disk_margin(S: StateSpace, sigma: float = 0.0, break_point: str = "") -> DiskMarginResult:
    """Largest disk ``alpha`` with ``||alpha (S + (sigma-1)/2 I)||_inf <= 1``."""
    shift = (sigma - 1.0) / 2.0
    shifted = S + static_gain(shift * np.eye(S.noutputs), S.inputs, S.outputs)
    peak = hinf_norm(shifted, rel_tol=1e-6)
    alpha = math.inf if peak == 0.0 else 1.0 / peak
    return DiskMarginResult.from_alpha(alpha, sigma, break_point)


# ---------------------------------------------------------------------------
# classical margins


@dataclass(frozen=True)
class ClassicalMargins:
    """Worst classical margins of a scalar loop.

    ``gm_db`` is the upper gain margin (``inf`` without a phase crossover
    below unit gain), ``gm_lower_db`` the gain reduction margin (``-inf`` if
    none).  ``pm_deg`` is the smallest phase change moving a gain crossover
    onto -1, so it lies in [0, 180]; ``nan`` when there is no crossover.
    """

    gm_db: float
    pm_deg: float
    gm_lower_db: float = -math.inf
    w_gain: tuple[float, ...] = ()
    w_phase: tuple[float, ...] = ()

    @property
    def pm_defined(self) -> bool:
        return not math.isnan(self.pm_deg)


def _loop_value(L: StateSpace, w: float) -> complex:
    return complex(_evaluate(L, np.array([w]))[0, 0, 0])


def _grid_for(L: StateSpace, n: int = 4000) -> np.ndarray:
    mags = np.abs(L.poles())
    mags = mags[mags > 1e-6]
    lo = min(1e-3, 1e-2 * mags.min()) if mags.size else 1e-3
    hi = max(1e4, 1e2 * mags.max()) if mags.size else 1e4
    return np.logspace(np.log10(lo), np.log10(hi), n)


def classical_margins(L: StateSpace, n_grid: int = 1500) -> ClassicalMargins:
    """Gain/phase margins of a scalar loop from crossovers located on a
    log grid and refined by root bracketing."""
    if L.ninputs != 1 or L.noutputs != 1:
        raise ValueError("classical margins need a scalar loop")
    w = _grid_for(L, n_grid)
    v = _evaluate(L, w)[:, 0, 0]
    mag = np.abs(v)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag)
    im_n = np.where(mag > 0, v.imag / np.where(mag > 0, mag, 1.0), 0.0)

    def f_gain(x):
        return math.log(abs(_loop_value(L, x)))

    def f_phase(x):
        z = _loop_value(L, x)
        return z.imag / abs(z)

    w_gain, pms = [], []
    for k in np.nonzero(np.diff(np.sign(logmag)) != 0)[0]:
        if not (np.isfinite(logmag[k]) and np.isfinite(logmag[k + 1])):
            continue
        wc = brentq(f_gain, w[k], w[k + 1], xtol=1e-14, rtol=1e-13)
        w_gain.append(wc)
        # smallest phase change taking L(jw) onto -1
        pms.append(180.0 - abs(math.degrees(np.angle(_loop_value(L, wc)))))

    w_phase, upper, lower = [], [], []
    for k in np.nonzero(np.diff(np.sign(im_n)) != 0)[0]:
        if im_n[k] == 0.0 and im_n[k + 1] == 0.0:
            continue
        wp = brentq(f_phase, w[k], w[k + 1], xtol=1e-14, rtol=1e-13)
        z = _loop_value(L, wp)
        if z.real >= 0:
            continue
        w_phase.append(wp)
        gm = -20.0 * math.log10(abs(z))
        (upper if gm >= -1e-9 else lower).append(gm)

    return ClassicalMargins(
        gm_db=min(upper) if upper else math.inf,
        pm_deg=min(pms) if pms else math.nan,
        gm_lower_db=max(lower) if lower else -math.inf,
        w_gain=tuple(w_gain),
        w_phase=tuple(w_phase),
    )


# ---------------------------------------------------------------------------
# loop breaking


def _break_signals(plant: DesignPlant, point, channel: int | None) -> list[str]:
    points = [point] if isinstance(point, str) else list(point)
    names: list[str] = []
    for p in points:
        if p not in plant.break_points:
            raise ValueError(f"unknown break point {p!r}; expected one of "
                             f"{sorted(plant.break_points)}")
        sigs = plant.break_points[p]
        if channel is not None and len(sigs) > 1:
            sigs = [sigs[channel]]
        names += sigs
    return names


def _check_closure(plant: DesignPlant, ctrl: ControllerParams, delta) -> None:
    # the attitude-estimate noise integrator is open loop by construction
    ins = [n for n in plant.exogenous_inputs if n != "n_Omega"]
    cl = close_loop(plant, ctrl, ins,
                    list(plant.performance_outputs), delta=delta)
    if not cl.is_stable():
        raise UnstableClosedLoopError("closed loop is unstable")


def break_loop(plant: DesignPlant, ctrl: ControllerParams, point, channel: int | None = None,
               delta: DeltaSample | None = None, check: bool = True) -> StateSpace:
    """Loop transfer at an analysis point with every other loop closed.

    ``point`` is a key of ``plant.break_points`` (``m_c``, ``eta``,
    ``Omega``, ``Omegadot``) or a list of them for a multi-loop break.  For
    ``m_c`` a single motor is selected by ``channel``; all four otherwise.
    Sign convention: negative feedback, ``y = -L u``.
    """
    if check:
        _check_closure(plant, ctrl, delta)
    names = _break_signals(plant, point, channel)
    T = close_loop(plant, ctrl, names, names, open_at=names, delta=delta)
    return -T


def loop_sensitivity(L: StateSpace) -> StateSpace:
    """``(I + L)^-1``, minimal.  Integrators of ``L`` reappear as poles
    cancelled only numerically; prefer :func:`break_sensitivity`."""
    eye = static_gain(np.eye(L.noutputs), L.inputs, L.outputs)
    return minreal(inverse(eye + L))


def break_sensitivity(plant: DesignPlant, ctrl: ControllerParams, point,
                      channel: int | None = None, delta: DeltaSample | None = None,
                      scale: dict | None = None) -> StateSpace:
    """Sensitivity ``(I + L)^-1`` at an analysis point, realized on the
    closed-loop states by injecting an additive disturbance there.

    ``scale`` maps signal names to unit factors (``S -> D S D^-1``), which
    matters only for multi-loop breaks mixing physical units.
    """
    names = _break_signals(plant, point, channel)
    S = close_loop(plant, ctrl, [f"{n}__in" for n in names], names, delta=delta, inject=names)
    if scale and len(names) > 1:
        d = np.array([scale.get(n, 1.0) for n in names])
        S = StateSpace(S.A, S.B / d[None, :], d[:, None] * S.C,
                       d[:, None] * S.D / d[None, :], S.inputs, S.outputs)
    return S


def default_scaling(plant: DesignPlant) -> dict:
    """Express angular acceleration in units of motor command (divide by C_p)."""
    return {n: 1.0 / plant.params.C_p for n in plant.break_points["Omegadot"]}


def nominal_margins(plant: DesignPlant, ctrl: ControllerParams, point, channel: int | None = 0,
                    sigma: float = 0.0, delta: DeltaSample | None = None):
    """``(ClassicalMargins or None, DiskMarginResult)`` at one analysis point."""
    L = break_loop(plant, ctrl, point, channel, delta)
    S = break_sensitivity(plant, ctrl, point, channel, delta, default_scaling(plant))
    if not S.is_stable():
        raise UnstableClosedLoopError("loop sensitivity is unstable")
    label = point if isinstance(point, str) else "+".join(point)
    dm = disk_margin(S, sigma, label)
    cm = classical_margins(L) if L.ninputs == 1 else None
    return cm, dm


# ---------------------------------------------------------------------------
# sampled worst case


@dataclass
class WorstCaseResult:
    """Minima over the evaluated perturbations.

    Sampling gives an upper bound on the true worst-case margins (and a
    lower bound on the true worst sensitivity peak).
    """

    classical: ClassicalMargins
    disk: DiskMarginResult
    max_sensitivity: float
    classical_sample: DeltaSample | None = None
    disk_sample: DeltaSample | None = None
    sensitivity_sample: DeltaSample | None = None
    n_evaluated: int = 0
    n_unstable: int = 0
    unstable_samples: list = field(default_factory=list)
    upper_bound: bool = True


_UNSTABLE = (ClassicalMargins(0.0, 0.0, 0.0), 0.0, math.inf)


def _evaluate_sample(args):
    plant, ctrl, point, channels, sigma, sample = args
    cms, alphas, speaks = [], [], []
    try:
        _check_closure(plant, ctrl, sample)
        for ch in channels:
            L = break_loop(plant, ctrl, point, ch, sample, check=False)
            S = break_sensitivity(plant, ctrl, point, ch, sample, default_scaling(plant))
            if not S.is_stable():
                return _UNSTABLE
            alphas.append(disk_margin(S, sigma).alpha_max)
            speaks.append(hinf_norm(S, rel_tol=1e-6))
            if L.ninputs == 1:
                cms.append(classical_margins(L))
    except (UnstableClosedLoopError, UnstableSystemError):
        return _UNSTABLE
    if cms:
        cm = ClassicalMargins(min(c.gm_db for c in cms),
                              min((c.pm_deg for c in cms if c.pm_defined), default=math.nan),
                              max(c.gm_lower_db for c in cms))
    else:
        cm = None
    return cm, min(alphas), max(speaks)


def _channels(plant: DesignPlant, point, channel) -> list:
    if channel is not None:
        return [channel]
    if isinstance(point, str) and len(plant.break_points.get(point, ())) > 1:
        return list(range(len(plant.break_points[point])))
    return [None]


def worst_case_sampled(plant: DesignPlant, ctrl: ControllerParams, point, n_samples: int = 50,
                       seed: int = 0, channel: int | None = None, sigma: float = 0.0,
                       jobs: int = 1, extreme: bool = True) -> WorstCaseResult:
    """Worst margins over sampled perturbations of an uncertain plant.

    Samples: zero perturbation, ``ceil(n/2)`` grid-5 and ``floor(n/2)``
    uniform draws (per-sample seeds derived from ``seed``), and every sign
    vertex of the real scalars.  For multi-channel points without a
    ``channel`` each motor loop is broken in turn and the worst is kept.
    A destabilizing sample scores zero margins.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    structure = plant.delta_structure
    samples = [zero_sample(structure)]
    seeds = np.random.SeedSequence(seed).generate_state(n_samples)
    for k in range(n_samples):
        scheme = "grid-5" if k < (n_samples + 1) // 2 else "random"
        samples.append(sample_delta(structure, scheme, int(seeds[k])))
    if extreme and structure:
        # exhaustive vertex enumeration; evaluating every vertex here is the
        # same search as the sign-extreme scheme and keeps all margin kinds
        vertices = []
        sample_delta(structure, "extreme", seed,
                     objective=lambda s: vertices.append(s) or 0.0)
        samples += vertices

    channels = _channels(plant, point, channel)
    tasks = [(plant, ctrl, point, channels, sigma, s) for s in samples]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_sample, tasks, chunksize=8))
    else:
        results = [_evaluate_sample(t) for t in tasks]

    label = point if isinstance(point, str) else "+".join(point)
    best_gm = best_pm = best_lo = None
    gm, pm, lo = math.inf, math.inf, -math.inf
    a_min, a_arg = math.inf, None
    s_max, s_arg = -math.inf, None
    unstable = []
    for s, (cm, alpha, speak) in zip(samples, results):
        if alpha == 0.0:
            unstable.append(s)
        if cm is not None:
            if cm.gm_db < gm:
                gm, best_gm = cm.gm_db, s
            if cm.pm_defined and cm.pm_deg < pm:
                pm, best_pm = cm.pm_deg, s
            if cm.gm_lower_db > lo:
                lo, best_lo = cm.gm_lower_db, s
        if alpha < a_min:
            a_min, a_arg = alpha, s
        if speak > s_max:
            s_max, s_arg = speak, s
    classical = ClassicalMargins(gm, pm if math.isfinite(pm) else math.nan, lo)
    return WorstCaseResult(
        classical=classical,
        disk=DiskMarginResult.from_alpha(a_min, sigma, label),
        max_sensitivity=s_max,
        classical_sample=best_pm or best_gm or best_lo,
        disk_sample=a_arg,
        sensitivity_sample=s_arg,
        n_evaluated=len(samples),
        n_unstable=len(unstable),
        unstable_samples=unstable,
    )


def _sensitivity_peak(args):
    plant, ctrl, point, sample = args
    try:
        _check_closure(plant, ctrl, sample)
        S = break_sensitivity(plant, ctrl, point, None, sample)
    except UnstableClosedLoopError:
        return math.inf
    if not S.is_stable():
        return math.inf
    return hinf_norm(S, rel_tol=1e-6)


def worst_sensitivity_sample(plant: DesignPlant, ctrl: ControllerParams, n_samples: int = 20,
                             seed: int = 0, point: str = "eta",
                             jobs: int = 1) -> tuple[DeltaSample, float]:
    """Sample maximizing the output sensitivity peak at ``point``.

    Same candidate set as :func:`worst_case_sampled` but only the
    sensitivity norm is evaluated.  Ties keep the earliest candidate.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    structure = plant.delta_structure
    samples = [zero_sample(structure)]
    seeds = np.random.SeedSequence(seed).generate_state(n_samples)
    for k in range(n_samples):
        scheme = "grid-5" if k < (n_samples + 1) // 2 else "random"
        samples.append(sample_delta(structure, scheme, int(seeds[k])))
    if structure:
        sample_delta(structure, "extreme", seed, objective=lambda s: samples.append(s) or 0.0)
    tasks = [(plant, ctrl, point, s) for s in samples]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            peaks = list(pool.map(_sensitivity_peak, tasks, chunksize=8))
    else:
        peaks = [_sensitivity_peak(t) for t in tasks]
    k = int(np.argmax(peaks))
    return samples[k], float(peaks[k])


# ---------------------------------------------------------------------------
# export

MARGIN_COLUMNS = ("tau", "break_point", "case", "dgm_lower_db", "dgm_upper_db", "dpm_deg",
                  "gm_db", "gm_lower_db", "pm_deg", "alpha_max")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def margin_row(tau: float, point: str, case: str, cm: ClassicalMargins | None,
               dm: DiskMarginResult) -> dict:
    lo, hi = dm.gm_db
    return {
        "tau": tau, "break_point": point, "case": case,
        "dgm_lower_db": lo, "dgm_upper_db": hi, "dpm_deg": dm.pm_deg,
        "gm_db": cm.gm_db if cm else math.nan,
        "gm_lower_db": cm.gm_lower_db if cm else math.nan,
        "pm_deg": cm.pm_deg if cm else math.nan,
        "alpha_max": dm.alpha_max,
    }


def margins_csv(rows: Sequence[dict]) -> str:
    """CSV text, one row per (design point, break point, nominal/worst)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MARGIN_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in MARGIN_COLUMNS])
    return buf.getvalue()
