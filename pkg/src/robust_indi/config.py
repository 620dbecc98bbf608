"""Project configuration: one JSON document validated against a schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .plant import NoiseConfig, QuadrotorParams, UncertaintyConfig
from .sim import Doublet, SimConfig
from .synthesis import WeightConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending key."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def load_schema() -> dict:
    text = resources.files("robust_indi").joinpath("config_schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class PlantSection:
    C_p: float = 300.0
    tau: float = 0.017
    C_q: float | None = None  # pitch effectiveness, defaults to C_p
    C_r: float | None = None  # yaw effectiveness, defaults to C_p / 10
    inertia: tuple[float, float, float] = (1.0, 1.0, 1.8)
    filter_hz: float = 50.0
    hover: float = 0.5


@dataclass(frozen=True)
class WeightSection:
    M_S_db: float = 6.0
    A_S_db: float = -50.0
    alpha_target: float = 0.764
    sigma: float = 0.0
    N_codesign: float = 1000.0
    A_M_db: float = -90.0
    M_M_db: float = 0.0


@dataclass(frozen=True)
class ScheduleSection:
    tau_min: float = 0.010
    tau_max: float = 0.080
    n_points: int = 30
    budget: int = 1500
    warm_start: bool = True


@dataclass(frozen=True)
class AnalysisSection:
    n_samples: int = 20
    vertices: bool = True


@dataclass(frozen=True)
class SimSection:
    dt: float = 0.002
    t_end: float = 5.0
    substeps: int = 10
    amplitude_deg: float = 45.0
    t_start: float = 0.5
    phase: float = 1.5
    noise_on: bool = False
    divergence_deg: float = 120.0


@dataclass(frozen=True)
class MonteCarloSection:
    n_random: int = 1000
    n_groups: int = 5
    worst_samples: int = 20


@dataclass(frozen=True)
class Seeds:
    synthesis: int = 0
    analysis: int = 0
    montecarlo: int = 0
    noise: int = 0


@dataclass(frozen=True)
class ProjectConfig:
    plant: PlantSection = PlantSection()
    uncertainty: UncertaintyConfig = UncertaintyConfig()
    noise: NoiseConfig = NoiseConfig()
    weights: WeightSection = WeightSection()
    schedule: ScheduleSection = ScheduleSection()
    analysis: AnalysisSection = AnalysisSection()
    sim: SimSection = SimSection()
    montecarlo: MonteCarloSection = MonteCarloSection()
    seeds: Seeds = Seeds()
    output_dir: str = "out"
    schema_version: int = field(default=SCHEMA_VERSION)

    # -- derived library objects ------------------------------------------

    def quadrotor(self, tau: float | None = None, axes: str = "roll") -> QuadrotorParams:
        p = self.plant
        return QuadrotorParams(C_p=p.C_p, tau=p.tau if tau is None else tau, axes=axes,
                               C_q=p.C_q, C_r=p.C_r, inertia=tuple(p.inertia))

    def weight_config(self) -> WeightConfig:
        w = self.weights
        db = lambda x: 10 ** (x / 20)  # noqa: E731
        return WeightConfig(M_S=db(w.M_S_db), A_S=db(w.A_S_db), alpha_target=w.alpha_target,
                            sigma=w.sigma, N_codesign=w.N_codesign, A_M=db(w.A_M_db),
                            M_M=db(w.M_M_db))

    def sim_config(self, tau: float | None = None) -> SimConfig:
        s = self.sim
        return SimConfig(dt=s.dt, t_end=s.t_end, substeps=s.substeps,
                         maneuver=Doublet(s.amplitude_deg, s.t_start, s.phase),
                         params=self.quadrotor(tau, axes="rpy"), uncertainty=self.uncertainty,
                         noise_seed=self.seeds.noise, noise_on=s.noise_on, noise=self.noise,
                         filter_hz=self.plant.filter_hz, hover=self.plant.hover,
                         divergence_deg=s.divergence_deg)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plant"]["inertia"] = list(d["plant"]["inertia"])
        return d


_SECTIONS = {
    "plant": PlantSection, "uncertainty": UncertaintyConfig, "noise": NoiseConfig,
    "weights": WeightSection, "schedule": ScheduleSection, "analysis": AnalysisSection,
    "sim": SimSection, "montecarlo": MonteCarloSection, "seeds": Seeds,
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts += extra[:1]
    elif err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        parts += missing[:1]
    return ".".join(parts) or "<root>"


def config_from_dict(doc: dict) -> ProjectConfig:
    """Validate ``doc`` against the schema and build a :class:`ProjectConfig`.

    Missing sections and keys take their defaults; unknown keys are errors.
    """
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _path(err))
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = dict(doc.get(name, {}))
        if name == "plant" and "inertia" in section:
            section["inertia"] = tuple(section["inertia"])
        try:
            kwargs[name] = cls(**section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), name) from exc
    cfg = ProjectConfig(output_dir=doc.get("output_dir", "out"), **kwargs)
    # cross-field checks live in the library dataclasses
    for name, check in (("weights", cfg.weight_config), ("sim", cfg.sim_config)):
        try:
            check()
        except ValueError as exc:
            raise ConfigError(str(exc), name) from exc
    sch = cfg.schedule
    if not 0 < sch.tau_min < sch.tau_max:
        raise ConfigError("need 0 < tau_min < tau_max", "schedule.tau_min")
    return cfg


def load_config(path) -> ProjectConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    return config_from_dict(doc)


def with_overrides(cfg: ProjectConfig, seed: int | None = None, out: str | None = None,
                   samples: int | None = None) -> ProjectConfig:
    """Apply command-line overrides; ``seed`` sets every seed at once."""
    if seed is not None:
        cfg = replace(cfg, seeds=Seeds(seed, seed, seed, seed))
    if out is not None:
        cfg = replace(cfg, output_dir=out)
    if samples is not None:
        if samples < 1:
            raise ConfigError("must be at least 1", "montecarlo.n_random")
        cfg = replace(cfg, montecarlo=replace(cfg.montecarlo, n_random=samples))
    return cfg
