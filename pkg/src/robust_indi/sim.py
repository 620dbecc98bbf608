"""Nonlinear three-axis attitude simulation with discrete INDI and the
gain-scheduled outer loop, plus Monte Carlo campaigns over uncertain
effectiveness and actuator time constants.

The true plant integrates rigid-body Euler kinematics and dynamics with
RK4 substeps; the (possibly perturbed) linear actuators are propagated
exactly under the zero-order-held command, at the RK4 stage times.  The
controller runs at ``dt`` with bilinear-discretized ``H`` and feedforward
and a ZOH actuator model, all using nominal parameters.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.linalg import expm, matrix_balance
from scipy.signal import cont2discrete

from .linsys import StateSpace
from .plant import (NoiseConfig, QuadrotorParams, UncertaintyConfig, actuator,
                    indi_filter, noise_model, uncertainty_models)
from .synthesis import GainSchedule, interpolate
from .uncertainty import GRID5, DeltaSample, close_lft, equal_motor_grid, zero_sample

__all__ = [
    "Doublet",
    "SimConfig",
    "SimResult",
    "Metrics",
    "run_doublet",
    "compute_metrics",
    "monte_carlo",
    "CampaignResult",
    "run_csv",
    "campaign_csv",
    "envelope_csv",
    "tau_groups",
]


@dataclass(frozen=True)
class Doublet:
    """Roll doublet: ``+amplitude`` at ``t_start``, ``-amplitude`` after one
    phase, back to zero after two."""

    amplitude_deg: float = 45.0
    t_start: float = 0.5
    phase: float = 1.5

    def reference(self, t: np.ndarray) -> np.ndarray:
        a = math.radians(self.amplitude_deg)
        t1, t2, t3 = self.t_start, self.t_start + self.phase, self.t_start + 2 * self.phase
        r = np.zeros_like(t)
        r[(t >= t1) & (t < t2)] = a
        r[(t >= t2) & (t < t3)] = -a
        return r

    def steps(self) -> list[tuple[float, float, float]]:
        """``(switch time, level before, level after)`` in radians."""
        a = math.radians(self.amplitude_deg)
        t1 = self.t_start
        return [(t1, 0.0, a), (t1 + self.phase, a, -a), (t1 + 2 * self.phase, -a, 0.0)]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.002
    t_end: float = 5.0
    substeps: int = 10
    maneuver: Doublet = Doublet()
    params: QuadrotorParams = QuadrotorParams(axes="rpy")
    uncertainty: UncertaintyConfig = UncertaintyConfig()
    delta: DeltaSample | None = None
    noise_seed: int = 0
    noise_on: bool = False
    noise: NoiseConfig = NoiseConfig()
    filter_hz: float = 50.0
    hover: float = 0.5
    divergence_deg: float = 120.0
    saturate: bool = True  # clamp commands to [0, 1]; off only for diagnostics

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0 or self.substeps < 1:
            raise ValueError("dt, t_end and substeps must be positive")
        if abs(self.maneuver.amplitude_deg) > 45.0:
            raise ValueError("doublet amplitude is limited to 45 deg")
        if self.params.axes != "rpy":
            raise ValueError("the simulator needs the three-axis airframe (axes='rpy')")


@dataclass(frozen=True)
class Metrics:
    overshoot: float
    coupling_deg: float
    coupling_fraction: float
    stable: bool
    m_c_min: float
    m_c_max: float
    saturated_steps: int = 0


@dataclass
class SimResult:
    t: np.ndarray
    eta: np.ndarray       # (n, 3) roll, pitch, yaw [rad]
    omega: np.ndarray     # (n, 3) body rates [rad/s]
    omegadot: np.ndarray  # (n, 3) [rad/s^2]
    m_c: np.ndarray       # (n, 4) motor commands
    reference: np.ndarray  # (n,) roll reference [rad]
    stable: bool
    saturated_steps: int
    metrics: Metrics | None = None


# ---------------------------------------------------------------------------
# numerical kernel


@njit(cache=True, fastmath={"nsz", "arcp", "afn"}, error_model="numpy")
def _filt(A, B, C, D, x, u, buf):
    """One step of a discrete SISO filter; updates ``x`` in place."""
    n = x.shape[0]
    y = D * u
    for i in range(n):
        y += C[i] * x[i]
    for i in range(n):
        acc = B[i] * u
        for j in range(n):
            acc += A[i, j] * x[j]
        buf[i] = acc
    for i in range(n):
        x[i] = buf[i]
    return y


@njit(cache=True, fastmath={"nsz", "arcp", "afn"}, error_model="numpy")
def _propagate(Phi, Gam, x, a, out):
    n = x.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += Phi[i, j] * x[j]
        for j in range(a.shape[0]):
            acc += Gam[i, j] * a[j]
        out[i] = acc


@njit(cache=True, fastmath={"nsz", "arcp", "afn"}, error_model="numpy")
def _output(C, D, x, a, out):
    for i in range(C.shape[0]):
        acc = 0.0
        for j in range(x.shape[0]):
            acc += C[i, j] * x[j]
        for j in range(a.shape[0]):
            acc += D[i, j] * a[j]
        out[i] = acc


@njit(cache=True, fastmath={"nsz", "arcp", "afn"}, error_model="numpy")
def _rhs(s, m, E, inertia, out):
    phi, theta = s[0], s[1]
    p, q, r = s[3], s[4], s[5]
    sp, cp = math.sin(phi), math.cos(phi)
    ct, tt = math.cos(theta), math.tan(theta)
    out[0] = p + (q * sp + r * cp) * tt
    out[1] = q * cp - r * sp
    out[2] = (q * sp + r * cp) / ct
    ix, iy, iz = inertia[0], inertia[1], inertia[2]
    out[3] = -(iz - iy) * q * r / ix
    out[4] = -(ix - iz) * p * r / iy
    out[5] = -(iy - ix) * p * q / iz
    for ax in range(3):
        for i in range(4):
            out[3 + ax] += E[ax, i] * m[i]


@njit(cache=True, fastmath={"nsz", "arcp", "afn"}, error_model="numpy")
def _kernel(n_steps, dt, n_sub, Phi, Gam, Ca, Da, xa0, E, inertia, Einv, K_eta, K_omega,
            Fa, Fb, Fc, Fd, Ha, Hb, Hc, Hd, Aa, Ab, Ac, Ad, xhat0, xhm0,
            Na, Nb, Nc, Nd, noise, noise_on, ref, m_trim, div_limit, saturate,
            eta_h, om_h, omd_h, mc_h):
    h = dt / n_sub
    s = np.zeros(6)
    xa = xa0.copy()
    a = m_trim.copy()
    nf_ = Fa.shape[0]
    xf = np.zeros((3, nf_))
    xh_acc = np.zeros((3, Ha.shape[0]))
    xh_m = np.zeros((4, Ha.shape[0]))
    xhat = np.zeros((4, Aa.shape[0]))
    for i in range(4):
        xh_m[i] = xhm0 * m_trim[i]
        xhat[i] = xhat0 * m_trim[i]
    xn = np.zeros((3, Na.shape[0]))
    eta_noise = np.zeros(3)
    m = np.zeros(4)
    d = np.zeros(6)
    k1 = np.zeros(6)
    k2 = np.zeros(6)
    k3 = np.zeros(6)
    k4 = np.zeros(6)
    tmp = np.zeros(6)
    nu = np.zeros(3)
    omd_f = np.zeros(3)
    m_f = np.zeros(4)
    m1 = np.zeros(4)
    m2 = np.zeros(4)
    nx = xa.shape[0]
    xa_half = np.zeros(nx)
    xa_full = np.zeros(nx)
    buf = np.zeros(max(nx, Fa.shape[0], Ha.shape[0], Aa.shape[0], Na.shape[0]) + 1)
    n_sat = 0
    for k in range(n_steps + 1):
        # measurement at t_k with the command held over the last interval
        _output(Ca, Da, xa, a, m)
        _rhs(s, m, E, inertia, d)
        for j in range(3):
            eta_h[k, j] = s[j]
            om_h[k, j] = s[3 + j]
            omd_h[k, j] = d[3 + j]
        finite = True
        for j in range(6):
            if not math.isfinite(s[j]):
                finite = False
        if not finite or abs(s[0]) > div_limit or abs(s[1]) > div_limit or abs(s[2]) > div_limit:
            for i in range(4):
                mc_h[k, i] = a[i]
            return k, n_sat
        if k == n_steps:
            for i in range(4):
                mc_h[k, i] = a[i]
            break
        # outer loop
        for j in range(3):
            nfj = 0.0
            if noise_on:
                nfj = _filt(Na, Nb, Nc, Nd, xn[j], noise[k, j], buf)
                eta_noise[j] += dt * nfj
            rfj = _filt(Fa, Fb, Fc, Fd, xf[j], ref[k, j], buf)
            nu[j] = K_omega * (K_eta * (rfj - (s[j] + eta_noise[j])) - (s[3 + j] + nfj))
            omd_f[j] = _filt(Ha, Hb, Hc, Hd, xh_acc[j], d[3 + j], buf)
        # incremental law on the filtered actuator-state estimate
        for i in range(4):
            mhat = 0.0
            for q in range(Aa.shape[0]):
                mhat += Ac[q] * xhat[i, q]
            m_f[i] = _filt(Ha, Hb, Hc, Hd, xh_m[i], mhat, buf)
        for i in range(4):
            cmd = m_f[i]
            for j in range(3):
                cmd += Einv[i, j] * (nu[j] - omd_f[j])
            if cmd < 0.0 or cmd > 1.0:
                n_sat += 1
                if saturate:
                    cmd = min(1.0, max(0.0, cmd))
            a[i] = cmd
            mc_h[k, i] = a[i]
            _filt(Aa, Ab, Ac, Ad, xhat[i], a[i], buf)
        # plant over [t_k, t_k + dt]
        for _ in range(n_sub):
            _propagate(Phi, Gam, xa, a, xa_half)
            _propagate(Phi, Gam, xa_half, a, xa_full)
            _output(Ca, Da, xa, a, m)
            _output(Ca, Da, xa_half, a, m1)
            _output(Ca, Da, xa_full, a, m2)
            _rhs(s, m, E, inertia, k1)
            for j in range(6):
                tmp[j] = s[j] + 0.5 * h * k1[j]
            _rhs(tmp, m1, E, inertia, k2)
            for j in range(6):
                tmp[j] = s[j] + 0.5 * h * k2[j]
            _rhs(tmp, m1, E, inertia, k3)
            for j in range(6):
                tmp[j] = s[j] + h * k3[j]
            _rhs(tmp, m2, E, inertia, k4)
            for j in range(6):
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for i in range(nx):
                xa[i] = xa_full[i]
    return n_steps + 1, n_sat


# ---------------------------------------------------------------------------
# set-up


def _discrete_siso(sys: StateSpace, dt: float, method: str):
    if sys.nstates == 0:
        return (np.zeros((1, 1)), np.zeros(1), np.zeros(1), float(sys.D[0, 0]))
    # companion forms from tf() are badly scaled; balance first
    A, T = matrix_balance(sys.A, permute=False)
    B, C = np.linalg.solve(T, sys.B), sys.C @ T
    Ad, Bd, Cd, Dd, _ = cont2discrete((A, B, C, sys.D), dt, method=method)
    return (np.ascontiguousarray(Ad), np.ascontiguousarray(Bd[:, 0]),
            np.ascontiguousarray(Cd[0]), float(Dd[0, 0]))


def _steady(Ad, Bd, u):
    n = Ad.shape[0]
    return np.linalg.solve(np.eye(n) - Ad, Bd * u)


@lru_cache(maxsize=64)
def _models(params: QuadrotorParams, unc: UncertaintyConfig):
    return uncertainty_models(replace(params, axes="roll"), unc)


def _split_sample(cfg: SimConfig, sample: DeltaSample | None):
    """Effectiveness scalars, actuator real scalars and the actuator
    perturbation sample (``None`` when its dynamic part is zero)."""
    n = cfg.params.n_motors
    if sample is None:
        return np.zeros(n), np.zeros(n), None
    eff, act = _models(cfg.params, cfg.uncertainty)
    structure = eff.delta_structure + act.delta_structure
    if not sample.dynamic_blocks:
        # real-only shorthand: unmodeled dynamics at zero
        sample = DeltaSample(sample.real_scalars, zero_sample(structure).dynamic_blocks)
    values = sample.as_dict(structure)
    dC = np.array([values[b.name] for b in eff.delta_structure])
    dtau = np.array([values[b.name] for b in act.blocks("real")])
    dyn = tuple(sample.dynamic_blocks)
    if all(not np.any(b.D) and not np.any(b.C) for b in dyn):
        return dC, dtau, None
    params = tuple(p for p in sample.dynamic_params) if sample.dynamic_params else ()
    return dC, dtau, (act, DeltaSample(dtau, dyn, params))


def _actuator_arrays(cfg: SimConfig, dtau: np.ndarray, act, h2: float):
    """Half-substep ZOH propagation ``(Phi, Gam, C, D)`` of the true actuators."""
    if act is None:
        # real-only perturbation closes to first-order lags with tau (1 + r dtau)
        taus = cfg.params.tau * (1.0 + cfg.uncertainty.r_tau * dtau)
        e = np.exp(-h2 / taus)
        return np.diag(e), np.diag(1.0 - e), np.eye(4), np.zeros((4, 4))
    model, sample = act
    A_sys = close_lft(model, sample)
    n = A_sys.nstates
    big = np.zeros((n + 4, n + 4))
    big[:n, :n] = A_sys.A
    big[:n, n:] = A_sys.B
    Md = expm(big * h2)
    return (np.ascontiguousarray(Md[:n, :n]), np.ascontiguousarray(Md[:n, n:]),
            np.ascontiguousarray(A_sys.C), np.ascontiguousarray(A_sys.D))


@lru_cache(maxsize=256)
def _controller_arrays(controller, dt: float, filter_hz: float, tau: float,
                       noise: NoiseConfig):
    F = _discrete_siso(controller.feedforward(), dt, "bilinear")
    H = _discrete_siso(indi_filter(filter_hz), dt, "bilinear")
    Ahat = _discrete_siso(actuator(tau), dt, "zoh")
    N = _discrete_siso(noise_model(noise), dt, "bilinear")
    # steady filter states per unit command (scaled by the trim in the kernel)
    xhat0 = _steady(Ahat[0], Ahat[1], 1.0)
    mhat0 = float(Ahat[2] @ xhat0)
    xhm0 = _steady(H[0], H[1], mhat0)
    return F, H, Ahat, N, xhat0, xhm0


def trim_command(E: np.ndarray, hover: float) -> np.ndarray:
    """Command closest to uniform ``hover`` that produces zero moment."""
    m0 = np.full(E.shape[1], hover)
    return m0 - np.linalg.pinv(E) @ (E @ m0)


def _true_effectiveness(cfg: SimConfig, dC: np.ndarray) -> np.ndarray:
    E = cfg.params.effectiveness()
    return E * (1.0 + cfg.uncertainty.r_C * dC)[None, :]


def run_doublet(cfg: SimConfig, schedule: GainSchedule | None = None, controller=None,
                reference: np.ndarray | None = None, noise: np.ndarray | None = None) -> SimResult:
    """Simulate the roll doublet with gains looked up at ``cfg.params.tau``.

    Either a ``schedule`` or an explicit ``ControllerParams`` is needed.
    ``reference`` overrides the maneuver with an ``(n_steps, 3)`` array.
    """
    if controller is None:
        if schedule is None:
            raise ValueError("need a gain schedule or controller parameters")
        controller, _ = interpolate(schedule, cfg.params.tau)
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))
    t = np.arange(n_steps + 1) * dt
    if reference is None:
        ref = np.zeros((n_steps, 3))
        ref[:, 0] = cfg.maneuver.reference(t[:-1])
    else:
        ref = np.ascontiguousarray(reference, dtype=float)

    dC, dtau, act = _split_sample(cfg, cfg.delta)
    Phi, Gam, Ca, Da = _actuator_arrays(cfg, dtau, act, dt / cfg.substeps / 2.0)
    E_true = np.ascontiguousarray(_true_effectiveness(cfg, dC))
    m_trim = trim_command(E_true, cfg.hover)
    n = Phi.shape[0]
    xa0 = np.linalg.solve(np.eye(n) - Phi, Gam @ m_trim)
    Einv = np.ascontiguousarray(np.linalg.pinv(cfg.params.effectiveness()))
    F, H, Ahat, N, xhat0, xhm0 = _controller_arrays(controller, dt, cfg.filter_hz,
                                                    cfg.params.tau, cfg.noise)
    if cfg.noise_on:
        rng = np.random.default_rng(cfg.noise_seed)
        white = rng.standard_normal((n_steps, 3)) / math.sqrt(dt)
    else:
        white = np.zeros((n_steps, 3))
    if noise is not None:
        white = np.ascontiguousarray(noise, dtype=float)

    eta_h = np.zeros((n_steps + 1, 3))
    om_h = np.zeros((n_steps + 1, 3))
    omd_h = np.zeros((n_steps + 1, 3))
    mc_h = np.zeros((n_steps + 1, 4))
    inertia = np.asarray(cfg.params.inertia, dtype=float)
    n_done, n_sat = _kernel(
        n_steps, dt, cfg.substeps, Phi, Gam, Ca, Da, xa0, E_true, inertia, Einv,
        float(controller.K_eta), float(controller.K_omega), *F, *H, *Ahat, xhat0, xhm0, *N,
        white, bool(cfg.noise_on or noise is not None), ref, m_trim,
        math.radians(cfg.divergence_deg), bool(cfg.saturate), eta_h, om_h, omd_h, mc_h)
    stable = n_done == n_steps + 1
    keep = n_done if stable else n_done + 1
    r_full = np.concatenate([ref[:, 0], ref[-1:, 0]])
    res = SimResult(t[:keep], eta_h[:keep], om_h[:keep], omd_h[:keep], mc_h[:keep],
                    r_full[:keep], stable, int(n_sat))
    res.metrics = compute_metrics(res, cfg.maneuver)
    return res


# ---------------------------------------------------------------------------
# metrics


def compute_metrics(res: SimResult, maneuver: Doublet = Doublet()) -> Metrics:
    """Overshoot relative to each commanded step (worst step reported) and
    off-axis coupling during the maneuver."""
    if len(res.t) == 0:
        raise ValueError("empty histories")
    t, roll = res.t, res.eta[:, 0]
    steps = maneuver.steps()
    overshoot = 0.0
    for j, (ts, before, after) in enumerate(steps):
        size = after - before
        if size == 0.0:
            continue
        t_next = steps[j + 1][0] if j + 1 < len(steps) else math.inf
        win = (t >= ts) & (t < t_next)
        if not np.any(win):
            continue
        excess = np.max(np.sign(size) * (roll[win] - after))
        overshoot = max(overshoot, max(0.0, float(excess)) / abs(size))
    off = np.abs(res.eta[:, 1:3])
    coupling = float(np.degrees(off.max())) if off.size else 0.0
    span = 2.0 * abs(maneuver.amplitude_deg)
    return Metrics(
        overshoot=overshoot,
        coupling_deg=coupling,
        coupling_fraction=coupling / span if span else 0.0,
        stable=res.stable,
        m_c_min=float(res.m_c.min()),
        m_c_max=float(res.m_c.max()),
        saturated_steps=res.saturated_steps,
    )


# ---------------------------------------------------------------------------
# Monte Carlo


def tau_groups(n: int, n_groups: int = 5) -> list[np.ndarray]:
    return [g for g in np.array_split(np.arange(n), n_groups) if g.size]


def _random_realizations(structure, n: int, seed: int) -> list[DeltaSample]:
    """Grid-5 draws of the real scalars; unmodeled dynamics left at zero."""
    rng = np.random.default_rng(seed)
    zero = zero_sample(structure)
    nr = len(zero.real_scalars)
    vals = rng.choice(np.asarray(GRID5), size=(n, nr))
    return [DeltaSample(v, zero.dynamic_blocks, zero.dynamic_params) for v in vals]


@dataclass
class CampaignResult:
    rows: list[dict]
    t: np.ndarray
    envelopes: dict  # group -> (min, max, nominal) roll traces [rad]
    groups: list[np.ndarray]
    taus: np.ndarray
    structure_names: list[str]

    def summary(self) -> list[dict]:
        out = []
        for g, idx in enumerate(self.groups):
            rows = [r for r in self.rows if r["group"] == g]
            out.append({
                "group": g,
                "tau_min": float(self.taus[idx[0]]),
                "tau_max": float(self.taus[idx[-1]]),
                "runs": len(rows),
                "stable": sum(r["stable"] for r in rows),
                "max_overshoot": max(r["overshoot"] for r in rows),
                "max_coupling_deg": max(r["coupling_deg"] for r in rows),
                "m_c_min": min(r["m_c_min"] for r in rows),
                "m_c_max": max(r["m_c_max"] for r in rows),
            })
        return out

    @property
    def all_stable(self) -> bool:
        return all(r["stable"] for r in self.rows)


def _campaign_tau(args):
    k, tau, group, cfg, controller, realizations, names = args
    params = replace(cfg.params, tau=float(tau))
    base = replace(cfg, params=params)
    rows = []
    lo = hi = nominal = None
    for sid, kind, sample in realizations:
        run_cfg = replace(base, delta=sample,
                          noise_seed=int(np.random.SeedSequence([cfg.noise_seed, k, sid])
                                         .generate_state(1)[0]))
        res = run_doublet(run_cfg, controller=controller)
        m = res.metrics
        row = {"sample_id": sid, "kind": kind, "tau_index": k, "tau": float(tau),
               "group": group, "overshoot": m.overshoot, "coupling_deg": m.coupling_deg,
               "coupling_fraction": m.coupling_fraction, "stable": bool(m.stable),
               "m_c_min": m.m_c_min, "m_c_max": m.m_c_max,
               "saturated_steps": m.saturated_steps}
        row.update(zip(names, sample.real_scalars.tolist()))
        rows.append(row)
        roll = np.full(len(base_time(cfg)), np.nan)
        roll[:len(res.t)] = res.eta[:, 0]
        lo = roll.copy() if lo is None else np.fmin(lo, roll)
        hi = roll.copy() if hi is None else np.fmax(hi, roll)
        if kind == "nominal":
            nominal = roll
    return k, rows, lo, hi, nominal


def base_time(cfg: SimConfig) -> np.ndarray:
    return np.arange(int(round(cfg.t_end / cfg.dt)) + 1) * cfg.dt


def monte_carlo(cfg: SimConfig, schedule: GainSchedule, n_random: int = 1000, seed: int = 0,
                worst_samples: dict | None = None, jobs: int = 1, n_groups: int = 5,
                taus: np.ndarray | None = None) -> CampaignResult:
    """Doublet campaign at every scheduled ``tau``.

    Each ``tau`` runs the nominal plant, ``n_random`` grid-5 realizations
    (seeded, shared across ``tau``), the equal-motor structured grid and,
    if given, the worst-sensitivity realization ``worst_samples[tau_index]``.
    Instabilities are counted, never raised.
    """
    if n_random < 1:
        raise ValueError("n_random must be at least 1")
    taus = schedule.taus if taus is None else np.asarray(taus)
    eff, act = uncertainty_models(replace(cfg.params, axes="roll", tau=float(taus[0])),
                                  cfg.uncertainty)
    structure = eff.delta_structure + act.delta_structure
    names = [b.name for b in structure if b.kind == "real"]
    common = [(0, "nominal", zero_sample(structure))]
    common += [(1 + i, "random", s) for i, s in
               enumerate(_random_realizations(structure, n_random, seed))]
    off = 1 + n_random
    common += [(off + i, "structured", s) for i, s in enumerate(equal_motor_grid(structure))]
    off += len(common) - 1 - n_random
    groups = tau_groups(len(taus), n_groups)
    group_of = {int(i): g for g, idx in enumerate(groups) for i in idx}
    tasks = []
    for k, tau in enumerate(taus):
        real = list(common)
        if worst_samples and k in worst_samples:
            real.append((off, "worst", worst_samples[k]))
        controller, _ = interpolate(schedule, float(tau))
        tasks.append((k, float(tau), group_of[k], cfg, controller, real, names))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_campaign_tau, tasks))
    else:
        results = [_campaign_tau(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    rows = [row for r in results for row in r[1]]
    envelopes = {}
    for g, idx in enumerate(groups):
        part = [r for r in results if r[0] in set(int(i) for i in idx)]
        lo = np.fmin.reduce([p[2] for p in part])
        hi = np.fmax.reduce([p[3] for p in part])
        nominal = part[len(part) // 2][4]
        envelopes[g] = (lo, hi, nominal)
    return CampaignResult(rows, base_time(cfg), envelopes, groups, np.asarray(taus), names)


# ---------------------------------------------------------------------------
# CSV output

RUN_COLUMNS = ("time", "roll", "pitch", "yaw", "p", "q", "r", "m_c0", "m_c1", "m_c2", "m_c3",
               "roll_ref")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.10g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_csv(res: SimResult) -> str:
    """Per-run histories; angles in degrees, rates in rad/s."""
    deg = np.degrees
    cols = [res.t, deg(res.eta[:, 0]), deg(res.eta[:, 1]), deg(res.eta[:, 2]),
            res.omega[:, 0], res.omega[:, 1], res.omega[:, 2],
            res.m_c[:, 0], res.m_c[:, 1], res.m_c[:, 2], res.m_c[:, 3], deg(res.reference)]
    return _csv(RUN_COLUMNS, zip(*cols))


def campaign_csv(camp: CampaignResult) -> str:
    header = (["sample_id", "kind", "tau_index", "tau", "group"] + camp.structure_names
              + ["overshoot", "coupling_deg", "coupling_fraction", "stable", "m_c_min",
                 "m_c_max", "saturated_steps"])
    return _csv(header, ([r[c] for c in header] for r in camp.rows))


def summary_csv(camp: CampaignResult) -> str:
    rows = camp.summary()
    header = list(rows[0].keys())
    return _csv(header, ([r[c] for c in header] for r in rows))


def envelope_csv(camp: CampaignResult) -> str:
    """Roll envelopes (deg) per tau group: min, max and a nominal trace."""
    header = ["time"]
    cols = [camp.t]
    for g in sorted(camp.envelopes):
        lo, hi, nom = camp.envelopes[g]
        header += [f"g{g}_min", f"g{g}_max", f"g{g}_nominal"]
        cols += [np.degrees(lo), np.degrees(hi), np.degrees(nom)]
    return _csv(header, zip(*cols))
