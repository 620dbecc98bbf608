"""Robust gain-scheduled attitude control design for INDI quadrotors."""

from .linsys import StateSpace, freq_response, hinf_norm, interconnect, step_metrics
from .margins import disk_margin, worst_case_sampled
from .plant import ControllerParams, QuadrotorParams, UncertaintyConfig, assemble_design_plant
from .sim import SimConfig, monte_carlo, run_doublet
from .synthesis import GainSchedule, WeightConfig, interpolate, synthesize_schedule

__version__ = "0.1.0"

__all__ = [
    "StateSpace", "freq_response", "hinf_norm", "interconnect", "step_metrics",
    "disk_margin", "worst_case_sampled",
    "ControllerParams", "QuadrotorParams", "UncertaintyConfig", "assemble_design_plant",
    "SimConfig", "monte_carlo", "run_doublet",
    "GainSchedule", "WeightConfig", "interpolate", "synthesize_schedule",
]
