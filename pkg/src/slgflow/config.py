"""Experiment configuration: schema, validation, domain construction.

Configs are plain JSON objects; unknown keys are rejected so that typos fail
loudly instead of silently running defaults.
"""

import json
from dataclasses import asdict, dataclass, field

from . import geometry
from .operators import PRESET_NAMES


class ConfigError(ValueError):
    """Configuration file failed validation."""


_DOMAIN_KEYS = {"kind", "semi_axes", "weights"}
_INITIAL_KEYS = {"kind", "amplitude", "offset", "scale"}


@dataclass
class ExperimentConfig:
    source: dict
    target: dict
    profile: str
    spacing: float = 1.0 / 32.0
    sigma: float = 0.4
    t_max: float = 3.0
    max_steps: int = 400_000
    convergence_tol: float = 2e-4
    boundary_tol: float = 1e-10
    burn_in_steps: int = 10
    record_interval: int = 10
    output_dir: str | None = None
    initial_data: dict = field(default_factory=lambda: {"kind": "quadratic"})
    seed: int = 0
    boundary_gradient_order: int = 1
    boundary_collocation: bool = True
    collocation_relax_time: float = 1.0
    cinfty_window: int = 10
    hausdorff_samples: int = 256
    preset: str | None = None

    def to_json_dict(self):
        return asdict(self)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate_domain_spec(spec, label):
    _require(isinstance(spec, dict), f"{label} must be an object")
    unknown = set(spec) - _DOMAIN_KEYS
    _require(not unknown, f"{label} has unknown keys {sorted(unknown)}")
    kind = spec.get("kind")
    _require(kind in ("ellipse", "blend"), f"{label}.kind must be 'ellipse' or 'blend'")
    if kind == "ellipse":
        ax = spec.get("semi_axes")
        _require(isinstance(ax, (list, tuple)) and len(ax) == 2,
                 f"{label}.semi_axes must be a pair")
        _require(all(isinstance(v, (int, float)) and v > 0 for v in ax),
                 f"{label}.semi_axes must be positive numbers")
    else:
        axes = spec.get("semi_axes")
        w = spec.get("weights")
        _require(isinstance(axes, (list, tuple)) and axes
                 and all(isinstance(a, (list, tuple)) and len(a) == 2 for a in axes),
                 f"{label}.semi_axes must be a list of pairs")
        _require(isinstance(w, (list, tuple)) and len(w) == len(axes)
                 and all(isinstance(v, (int, float)) and v > 0 for v in w),
                 f"{label}.weights must be positive, one per component")


def build_domain(spec):
    if spec["kind"] == "ellipse":
        return geometry.make_ellipse(tuple(spec["semi_axes"]))
    return geometry.make_blend([tuple(a) for a in spec["semi_axes"]],
                               list(spec["weights"]))


def validate_config_dict(raw):
    _require(isinstance(raw, dict), "config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    _require(not unknown, f"unknown config keys {sorted(unknown)}")
    for key in ("source", "target", "profile"):
        _require(key in raw, f"missing required config key '{key}'")
    validate_domain_spec(raw["source"], "source")
    validate_domain_spec(raw["target"], "target")
    _require(raw["profile"] in PRESET_NAMES,
             f"profile must be one of {PRESET_NAMES}, got {raw['profile']!r}")
    cfg = ExperimentConfig(**raw)
    for name in ("spacing", "sigma", "t_max", "convergence_tol", "boundary_tol"):
        _require(getattr(cfg, name) > 0, f"{name} must be positive")
    _require(cfg.burn_in_steps >= 0, "burn_in_steps must be >= 0")
    _require(cfg.record_interval >= 1, "record_interval must be >= 1")
    _require(cfg.max_steps >= 1, "max_steps must be >= 1")
    _require(cfg.boundary_gradient_order in (1, 2),
             "boundary_gradient_order must be 1 or 2")
    _require(cfg.collocation_relax_time >= 0,
             "collocation_relax_time must be >= 0")
    _require(isinstance(cfg.initial_data, dict), "initial_data must be an object")
    unknown = set(cfg.initial_data) - _INITIAL_KEYS
    _require(not unknown, f"initial_data has unknown keys {sorted(unknown)}")
    kind = cfg.initial_data.get("kind", "quadratic")
    _require(kind in ("quadratic", "quadratic-perturbed"),
             "initial_data.kind must be 'quadratic' or 'quadratic-perturbed'")
    if kind == "quadratic-perturbed":
        amp = cfg.initial_data.get("amplitude", 0.0)
        _require(isinstance(amp, (int, float)) and amp >= 0,
                 "initial_data.amplitude must be a non-negative number")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    return validate_config_dict(raw)
