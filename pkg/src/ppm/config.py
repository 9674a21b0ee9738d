"""TOML experiment configuration: sections, defaults and validation.

Layout::

    seed = 0            # master seed
    Z = 10              # outer holdout repetitions
    workers = 1
    output_dir = "out"

    [data]        path, outcome_column
    [split]       holdout_fraction
    [tuning]      m_grid, alpha (number or list), K, v, seed, min_subpop,
                  min_events, weight_scheme, weight_basis, standardize
    [fit]         max_iterations, tolerance, ridge_penalty
    [validation]  B, inner_split, level, max_retries
    [metrics]     ici_span, slope_method
    [simulation]  n, n_features, n_binary, r, noise_sd, seed, binary_first

When ``[data] path`` is absent the dataset is simulated from
``[simulation]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import SplitPlan
from .glm import FitConfig
from .simgen import SimulationConfig
from .similarity import WeightScheme
from .tuner import DEFAULT_GRID, TuningConfig
from .validator import ValidationConfig


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


_INT = (int,)
_NUM = (int, float)

# section -> key -> accepted python types
_SCHEMA = {
    "": {"seed": _INT, "Z": _INT, "workers": _INT, "output_dir": (str,)},
    "data": {"path": (str,), "outcome_column": (str,)},
    "split": {"holdout_fraction": _NUM},
    "tuning": {
        "m_grid": (list,),
        "alpha": _NUM + (list,),
        "K": _INT,
        "v": _INT,
        "seed": _INT,
        "min_subpop": _INT,
        "min_events": _INT,
        "weight_scheme": (str,),
        "weight_basis": (str,),
        "standardize": (bool,),
    },
    "fit": {"max_iterations": _INT, "tolerance": _NUM, "ridge_penalty": _NUM},
    "validation": {"B": _INT, "inner_split": _NUM, "level": _NUM, "max_retries": _INT},
    "metrics": {"ici_span": _NUM, "slope_method": (str,)},
    "simulation": {
        "n": _INT,
        "n_features": _INT,
        "n_binary": _INT,
        "r": _NUM,
        "noise_sd": _NUM,
        "seed": _INT,
        "binary_first": (bool,),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None = None
    outcome_column: str = "y"
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    split: SplitPlan = field(default_factory=SplitPlan)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    alphas: tuple = (0.5,)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    Z: int = 10
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.Z < 1:
            raise ConfigError("Z: must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")
        if not self.alphas:
            raise ConfigError("tuning.alpha: empty list")


def _check_types(doc):
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in _SCHEMA or key == "":
                raise ConfigError(f"{key}: unknown section")
            section = _SCHEMA[key]
            for sub, v in value.items():
                path = f"{key}.{sub}"
                if sub not in section:
                    raise ConfigError(f"{path}: unknown key")
                _check_type(path, v, section[sub])
        else:
            if key not in _SCHEMA[""]:
                raise ConfigError(f"{key}: unknown key")
            _check_type(key, value, _SCHEMA[""][key])


def _check_type(path, value, types):
    # bool is an int subclass; only accept it where bool is asked for
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{path}: expected {_names(types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{path}: expected {_names(types)}, got {type(value).__name__}")


def _names(types):
    return " or ".join(sorted({t.__name__ for t in types}))


def _numbers(path, values):
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise ConfigError(f"{path}: expected a list of numbers")
    return tuple(float(v) for v in values)


def _build(path, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def from_dict(doc):
    """Build an :class:`ExperimentConfig` from a parsed TOML document."""
    _check_types(doc)
    seed = doc.get("seed", 0)
    data = doc.get("data", {})
    split = doc.get("split", {})
    tuning = dict(doc.get("tuning", {}))
    fit = doc.get("fit", {})
    validation = doc.get("validation", {})
    metrics = doc.get("metrics", {})
    simulation = dict(doc.get("simulation", {}))

    alpha = tuning.pop("alpha", 0.5)
    alphas = _numbers("tuning.alpha", alpha if isinstance(alpha, list) else [alpha])
    if any(not 0 <= a <= 1 for a in alphas):
        raise ConfigError("tuning.alpha: must lie in [0, 1]")
    if "m_grid" in tuning:
        tuning["m_grid"] = _numbers("tuning.m_grid", tuning["m_grid"])
    else:
        tuning["m_grid"] = DEFAULT_GRID
    if "weight_scheme" in tuning:
        try:
            tuning["weight_scheme"] = WeightScheme(tuning["weight_scheme"])
        except ValueError:
            raise ConfigError(
                f"tuning.weight_scheme: unknown scheme {tuning['weight_scheme']!r}"
            ) from None
    tuning.setdefault("seed", seed)
    simulation.setdefault("seed", seed)
    if metrics.get("slope_method", "logistic") not in ("logistic", "linear"):
        raise ConfigError(f"metrics.slope_method: unknown method {metrics['slope_method']!r}")

    fit_cfg = _build("fit", FitConfig, **fit)
    tuning_cfg = _build("tuning", TuningConfig, alpha=alphas[0], fit=fit_cfg, **tuning)
    split_cfg = _build(
        "split", SplitPlan, K=tuning_cfg.K, v=tuning_cfg.v, seed=seed, **split
    )
    validation_cfg = _build(
        "validation",
        ValidationConfig,
        weight_scheme=tuning_cfg.weight_scheme,
        weight_basis=tuning_cfg.weight_basis,
        fit=fit_cfg,
        min_events=tuning_cfg.min_events,
        standardize=tuning_cfg.standardize,
        seed=seed,
        **validation,
        **metrics,
    )
    sim_cfg = _build("simulation", SimulationConfig, **simulation)
    top = {k: doc[k] for k in ("Z", "workers", "output_dir") if k in doc}
    return _build(
        "config",
        ExperimentConfig,
        data_path=data.get("path"),
        outcome_column=data.get("outcome_column", "y"),
        simulation=sim_cfg,
        split=split_cfg,
        tuning=tuning_cfg,
        alphas=alphas,
        validation=validation_cfg,
        seed=seed,
        **top,
    )


def parse_config(path=None):
    """Read and validate a TOML config file; ``None`` gives all defaults."""
    if path is None:
        return from_dict({})
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from None
    return from_dict(doc)


def with_overrides(cfg, **changes):
    """Copy of `cfg` with top-level fields replaced."""
    return replace(cfg, **changes)
