"""Experiment configuration: defaults, file loading and validation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

from .core import DAY_SECONDS, integer_ratio
from .errors import ConfigError

FORMAT_VERSION = 1

STOCHASTIC = {"generate", "match-leaks", "sweep", "popularity", "timeofday", "cohorts", "uniqueness"}
NEEDS_DATASET = {"match-leaks", "sweep", "popularity", "timeofday", "cohorts", "uniqueness"}
COMMANDS = ("generate", "ingest", "match-leaks", "sweep", "popularity", "timeofday", "cohorts", "uniqueness", "selftest")


@dataclass
class ExperimentConfig:
    """Every knob any subcommand reads. Units follow the published setup: minutes and km."""

    command: str = ""
    out: Optional[str] = None
    dataset: Optional[str] = None
    input: Optional[str] = None
    seed: Optional[int] = None
    k: List[int] = field(default_factory=lambda: list(range(1, 11)))
    delta_t_min: List[float] = field(default_factory=lambda: [5])
    delta_xy_km: List[float] = field(default_factory=lambda: [0.2])
    sample_size: int = 1000
    method: str = "index"
    leaks_per_user: int = 1
    r: float = 0.5
    mode: str = "both"
    exhaustive: bool = False
    symmetric: bool = False
    bins: int = 100
    repeat: int = 10
    merge_threshold: float = 150.0
    day_start: int = 0
    users: int = 1000
    sites: int = 2000
    events_csv: bool = True
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _as_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def validate(raw: dict):
    """Fill defaults and check a configuration.

    Returns
    -------
    (ExperimentConfig or None, list of str)
        The normalized config and the human-readable problems found; the
        config is ``None`` when any problem was found.
    """
    errors = []
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        errors.append(f"unknown config keys: {', '.join(unknown)}")
    values = {k: v for k, v in raw.items() if k in _FIELDS and v is not None}
    cfg = ExperimentConfig()
    for k, v in values.items():
        setattr(cfg, k, v)

    if cfg.format_version != FORMAT_VERSION:
        errors.append(f"format_version {cfg.format_version} unsupported (expected {FORMAT_VERSION})")
    if cfg.command not in COMMANDS:
        errors.append(f"unknown command {cfg.command!r}")
    if cfg.command != "selftest" and not cfg.out:
        errors.append("missing output directory (out)")
    if cfg.command in NEEDS_DATASET:
        if not cfg.dataset:
            errors.append("missing dataset path")
        elif not Path(cfg.dataset).is_file():
            errors.append(f"dataset file {cfg.dataset} does not exist")
    if cfg.command == "ingest":
        if not cfg.input:
            errors.append("missing input path")
        elif not Path(cfg.input).is_file():
            errors.append(f"input file {cfg.input} does not exist")
    if cfg.command in STOCHASTIC and cfg.seed is None:
        errors.append("seed is required for stochastic commands")

    try:
        cfg.k = sorted({int(v) for v in _as_list(cfg.k)})
        if not cfg.k or cfg.k[0] < 1:
            errors.append("k values must be >= 1")
    except (TypeError, ValueError):
        errors.append("k must be a list of integers")

    try:
        cfg.delta_t_min = sorted(float(v) for v in _as_list(cfg.delta_t_min))
        prev = None
        for v in cfg.delta_t_min:
            secs = v * 60
            if v <= 0 or abs(secs - round(secs)) > 1e-9:
                errors.append(f"delta_t {v} min is not a positive whole number of seconds")
            elif DAY_SECONDS % round(secs):
                errors.append(f"delta_t {v} min does not divide the day")
            if prev is not None:
                try:
                    integer_ratio(v, prev)
                except ConfigError:
                    errors.append(f"delta_t chain: {v} is not an integer multiple of {prev}")
            prev = v
        cfg.delta_t_min = [int(v) if float(v).is_integer() else v for v in cfg.delta_t_min]
    except (TypeError, ValueError):
        errors.append("delta_t_min must be a list of numbers")

    try:
        cfg.delta_xy_km = sorted(float(v) for v in _as_list(cfg.delta_xy_km))
        prev = None
        for v in cfg.delta_xy_km:
            if v <= 0:
                errors.append(f"delta_xy {v} km must be positive")
            elif prev is not None:
                try:
                    integer_ratio(v, prev)
                except ConfigError:
                    errors.append(f"delta_xy chain: {v} is not an integer multiple of {prev}")
            prev = v
    except (TypeError, ValueError):
        errors.append("delta_xy_km must be a list of numbers")

    for name in ("sample_size", "leaks_per_user", "bins", "repeat", "users", "sites"):
        v = getattr(cfg, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            errors.append(f"{name} must be a positive integer")
    if not (isinstance(cfg.r, (int, float)) and 0 <= cfg.r < 1):
        errors.append("r must lie in [0, 1)")
    if cfg.mode not in ("strict", "relaxed", "both"):
        errors.append("mode must be strict, relaxed or both")
    if cfg.method not in ("index", "pruned", "naive"):
        errors.append("method must be index, pruned or naive")
    if not (isinstance(cfg.merge_threshold, (int, float)) and cfg.merge_threshold > 0):
        errors.append("merge_threshold must be positive")
    if errors:
        return None, errors
    return cfg, []
