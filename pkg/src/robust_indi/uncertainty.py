"""Uncertainty models for control effectiveness and actuator dynamics.

Uncertain quantities are pulled out of the nominal model into a block
diagonal perturbation ``Delta`` and recovered by upper-LFT closure.  Every
perturbation channel is scalar: real parametric scalars bounded by one, and
dynamic blocks with H-infinity norm below one.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linsys import (StateSpace, append, hinf_norm, interconnect, signal_names,
                     static_gain, sumblock, tf)

GRID5 = (-1.0, -0.5, 0.0, 0.5, 1.0)

__all__ = [
    "GRID5",
    "UncertainScalar",
    "DeltaBlock",
    "LftModel",
    "DeltaSample",
    "build_effectiveness_lft",
    "build_wm",
    "build_actuator_lft",
    "sample_delta",
    "equal_motor_grid",
    "zero_sample",
    "delta_system",
    "close_lft",
    "allpass_section",
]


@dataclass(frozen=True)
class UncertainScalar:
    nominal: float
    rel_radius: float
    delta: float = 0.0

    def __post_init__(self):
        if abs(self.delta) > 1.0:
            raise ValueError(f"|delta| must not exceed 1, got {self.delta}")

    @property
    def value(self) -> float:
        return self.nominal * (1.0 + self.rel_radius * self.delta)


@dataclass(frozen=True)
class DeltaBlock:
    name: str
    kind: str  # "real" or "dynamic"

    @property
    def to_delta(self) -> str:
        """Signal leaving the nominal system towards the perturbation."""
        return f"yd_{self.name}"

    @property
    def from_delta(self) -> str:
        return f"ud_{self.name}"

    @property
    def group(self) -> str:
        return re.sub(r"\d+$", "", self.name)


@dataclass
class LftModel:
    """Nominal system ``M`` partitioned against a structured perturbation.

    The first ``len(delta_structure)`` inputs/outputs of ``M`` are the
    perturbation channels, in structure order.
    """

    M: StateSpace
    delta_structure: tuple[DeltaBlock, ...]

    def __post_init__(self):
        k = len(self.delta_structure)
        want_in = [b.from_delta for b in self.delta_structure]
        want_out = [b.to_delta for b in self.delta_structure]
        if list(self.M.inputs[:k]) != want_in or list(self.M.outputs[:k]) != want_out:
            raise ValueError("perturbation channels must lead the M partition")

    @property
    def n_delta(self) -> int:
        return len(self.delta_structure)

    @property
    def plant_inputs(self) -> tuple[str, ...]:
        return self.M.inputs[self.n_delta:]

    @property
    def plant_outputs(self) -> tuple[str, ...]:
        return self.M.outputs[self.n_delta:]

    def nominal(self) -> StateSpace:
        """``M22``, i.e. the closure with zero perturbation."""
        return self.M.select(self.plant_inputs, self.plant_outputs)

    def blocks(self, kind: str | None = None) -> list[DeltaBlock]:
        return [b for b in self.delta_structure if kind is None or b.kind == kind]


@dataclass
class DeltaSample:
    real_scalars: np.ndarray
    dynamic_blocks: tuple[StateSpace, ...] = ()
    # (gain, corner) of each dynamic all-pass section, when sampled that way
    dynamic_params: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        self.real_scalars = np.asarray(self.real_scalars, dtype=float)
        if np.any(np.abs(self.real_scalars) > 1.0):
            raise ValueError("real perturbations must lie in [-1, 1]")
        self.dynamic_blocks = tuple(self.dynamic_blocks)

    def is_zero(self) -> bool:
        return (not np.any(self.real_scalars)
                and all(not np.any(b.D) and not np.any(b.C) for b in self.dynamic_blocks))

    def as_dict(self, structure: Sequence[DeltaBlock]) -> dict:
        """Flat, JSON-friendly description keyed by block name."""
        n_real = sum(b.kind == "real" for b in structure)
        n_dyn = len(structure) - n_real
        if len(self.real_scalars) != n_real or len(self.dynamic_blocks) != n_dyn:
            raise ValueError("sample does not match the perturbation structure")
        out = {}
        reals = iter(self.real_scalars)
        dyns = iter(self.dynamic_params or [None] * n_dyn)
        for b in structure:
            if b.kind == "real":
                out[b.name] = float(next(reals))
            else:
                p = next(dyns)
                out[b.name] = None if p is None else [float(p[0]), float(p[1])]
        return out


# ---------------------------------------------------------------------------
# model construction


def roll_effectiveness(C_p: float, n_motors: int = 4) -> np.ndarray:
    if n_motors != 4:
        raise ValueError("the symmetric quadrotor layout needs exactly 4 motors")
    return np.array([[-C_p, -C_p, C_p, C_p]])


def build_effectiveness_lft(C_p: float, r_C: float = 0.2, n_motors: int = 4,
                            E: np.ndarray | None = None,
                            inputs: Sequence[str] | None = None,
                            outputs: Sequence[str] | None = None) -> LftModel:
    """Per-motor relative uncertainty on each effectiveness column.

    ``E`` defaults to the roll row ``[-C_p, -C_p, C_p, C_p]``; a full
    multi-axis matrix may be given instead, in which case every axis sees
    the same per-motor scaling ``(1 + r_C * delta_i)``.
    """
    if C_p <= 0:
        raise ValueError("C_p must be positive")
    if not 0.0 <= r_C < 1.0:
        raise ValueError(f"r_C = {r_C} >= 1 allows sign flips of the effectiveness")
    if E is None:
        E = roll_effectiveness(C_p, n_motors)
    E = np.atleast_2d(np.asarray(E, dtype=float))
    p, n = E.shape
    if n != n_motors:
        raise ValueError("effectiveness columns must match n_motors")
    structure = tuple(DeltaBlock(f"dC{i}", "real") for i in range(n))
    inputs = list(inputs or signal_names("m", n))
    outputs = list(outputs or (["acc"] if p == 1 else signal_names("acc", p)))
    D = np.block([[np.zeros((n, n)), r_C * np.eye(n)],
                  [E, E]])
    M = static_gain(D, [b.from_delta for b in structure] + inputs,
                    [b.to_delta for b in structure] + outputs)
    return LftModel(M, structure)


def build_wm(tau: float, r0: float = 0.04, r_inf: float = 1.0) -> StateSpace:
    """Relative-uncertainty weight ``(tau_w s + r0) / (tau_w/r_inf s + 1)``, tau_w = tau/5."""
    if tau <= 0 or r0 <= 0 or r_inf <= 0:
        raise ValueError("tau, r0 and r_inf must be positive")
    tw = tau / 5.0
    return tf([tw, r0], [tw / r_inf, 1.0])


def build_actuator_lft(tau: float, r_tau: float = 0.4, wm: StateSpace | None = None,
                       n_motors: int = 4, inputs: Sequence[str] | None = None,
                       outputs: Sequence[str] | None = None) -> LftModel:
    """First-order actuators with parametric time constant and multiplicative
    unstructured uncertainty, ``A_p = 1/(tau_p s + 1) * (1 + w_m Delta)``.

    Structure: ``n_motors`` real scalars ``dtau*`` followed by ``n_motors``
    dynamic blocks ``Dtau*``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not 0.0 <= r_tau < 1.0:
        raise ValueError("r_tau must lie in [0, 1)")
    if wm is None:
        wm = build_wm(tau)
    inputs = list(inputs or signal_names("a_in", n_motors))
    outputs = list(outputs or signal_names("m", n_motors))
    real = [DeltaBlock(f"dtau{i}", "real") for i in range(n_motors)]
    dyn = [DeltaBlock(f"Dtau{i}", "dynamic") for i in range(n_motors)]
    blocks = []
    for i in range(n_motors):
        # tau x' = a - x - u_d ;  y_d = r_tau (a - x - u_d)
        core = StateSpace([[-1.0 / tau]], [[1.0 / tau, -1.0 / tau]],
                          [[1.0], [-r_tau]], [[0.0, 0.0], [r_tau, -r_tau]],
                          [inputs[i], real[i].from_delta], [f"_x{i}", real[i].to_delta])
        blocks.append(core)
        blocks.append(static_gain(1.0, [f"_x{i}"], [dyn[i].to_delta]))
        blocks.append(wm.rename([dyn[i].from_delta], [f"_w{i}"]))
        blocks.append(sumblock(f"{outputs[i]} = _x{i} + _w{i}"))
    structure = tuple(real + dyn)
    M = interconnect(blocks,
                     [b.from_delta for b in structure] + inputs,
                     [b.to_delta for b in structure] + outputs, minimal=False)
    return LftModel(M, structure)


# ---------------------------------------------------------------------------
# sampling and closure


def allpass_section(gain: float, corner: float) -> StateSpace:
    """``gain * (s - a)/(s + a)``: flat magnitude ``|gain|``, phase sweeping 180 deg."""
    return tf([gain, -gain * corner], [1.0, corner])


def zero_sample(structure: Sequence[DeltaBlock]) -> DeltaSample:
    nr = sum(b.kind == "real" for b in structure)
    nd = sum(b.kind == "dynamic" for b in structure)
    return DeltaSample(np.zeros(nr), tuple(static_gain(0.0) for _ in range(nd)),
                       tuple((0.0, 1.0) for _ in range(nd)))


def _structure(model) -> tuple[DeltaBlock, ...]:
    return model.delta_structure if hasattr(model, "delta_structure") else tuple(model)


def _dynamic(rng: np.random.Generator, nd: int, gain: float = 0.999):
    params = []
    for _ in range(nd):
        a = 10.0 ** rng.uniform(0.0, 4.0)
        g = gain * (1.0 if rng.random() < 0.5 else -1.0)
        params.append((g, a))
    return tuple(allpass_section(g, a) for g, a in params), tuple(params)


def sample_delta(model, scheme: str = "random", seed: int = 0,
                 objective: Callable[[DeltaSample], float] | None = None) -> DeltaSample:
    """Draw a perturbation matching ``model.delta_structure``.

    ``grid-5`` draws each real scalar from {-1, -0.5, 0, 0.5, 1}; ``random``
    draws uniformly in [-1, 1]; ``extreme`` enumerates all sign vertices of
    the real scalars and keeps the one maximizing ``objective``.  Dynamic
    blocks are random all-pass sections of norm 0.999 in every scheme.
    """
    structure = _structure(model)
    rng = np.random.default_rng(seed)
    nr = sum(b.kind == "real" for b in structure)
    nd = sum(b.kind == "dynamic" for b in structure)
    if scheme == "grid-5":
        real = rng.choice(np.asarray(GRID5), size=nr)
    elif scheme == "random":
        real = rng.uniform(-1.0, 1.0, size=nr)
    elif scheme == "extreme":
        if objective is None:
            raise ValueError("extreme scheme needs an objective to maximize")
        if nr > 8:
            raise ValueError("sign exhaustion limited to 8 real scalars")
        dyn, params = _dynamic(rng, nd)
        best, best_val = None, -np.inf
        for signs in itertools.product((-1.0, 1.0), repeat=nr):
            cand = DeltaSample(np.array(signs), dyn, params)
            val = objective(cand)
            if val > best_val:
                best, best_val = cand, val
        return best
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    dyn, params = _dynamic(rng, nd)
    return DeltaSample(real, dyn, params)


def equal_motor_grid(structure: Sequence[DeltaBlock]) -> list[DeltaSample]:
    """Structured grid: all scalars of a group (e.g. every ``dC*``) share one
    value from the 5-point grid; dynamic blocks are zero."""
    structure = _structure(structure)
    real = [b for b in structure if b.kind == "real"]
    groups = list(dict.fromkeys(b.group for b in real))
    zero = zero_sample(structure)
    out = []
    for values in itertools.product(GRID5, repeat=len(groups)):
        lookup = dict(zip(groups, values))
        out.append(DeltaSample(np.array([lookup[b.group] for b in real]),
                               zero.dynamic_blocks, zero.dynamic_params))
    return out


def delta_system(structure: Sequence[DeltaBlock], sample: DeltaSample) -> StateSpace:
    """Block-diagonal perturbation wired from ``yd_*`` to ``ud_*`` signals."""
    structure = _structure(structure)
    reals = iter(sample.real_scalars)
    dyns = iter(sample.dynamic_blocks)
    parts = []
    try:
        for b in structure:
            if b.kind == "real":
                parts.append(static_gain(float(next(reals)), [b.to_delta], [b.from_delta]))
            else:
                parts.append(next(dyns).rename([b.to_delta], [b.from_delta]))
    except StopIteration as exc:
        raise ValueError("sample does not match the perturbation structure") from exc
    if next(reals, None) is not None or next(dyns, None) is not None:
        raise ValueError("sample does not match the perturbation structure")
    return append(*parts)


def close_lft(model: LftModel, sample: DeltaSample) -> StateSpace:
    """Upper LFT ``F_u(M, Delta)``; zero perturbation returns ``M22`` exactly."""
    if sample.is_zero():
        delta_system(model.delta_structure, sample)  # structure check
        return model.nominal()
    D = delta_system(model.delta_structure, sample)
    return interconnect([model.M, D], model.plant_inputs, model.plant_outputs,
                        minimal=False)


def check_dynamic_norms(sample: DeltaSample) -> float:
    """Largest H-infinity norm among the dynamic blocks."""
    return max((hinf_norm(b, 1e-8) for b in sample.dynamic_blocks), default=0.0)
