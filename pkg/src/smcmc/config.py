"""Run configuration: strict YAML schema with every unknown key rejected."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

__all__ = [
    "ConfigError",
    "RunConfig",
    "ScheduleSection",
    "DataSection",
    "SyntheticSection",
    "MixtureSection",
    "GpSection",
    "McmcSection",
    "SmcSection",
    "VerifySection",
    "load_config",
    "parse_config",
    "config_digest",
    "dump_config",
]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScheduleSection(_Strict):
    epsilon: float = Field(0.5, gt=0.0, lt=1.0)
    m_cap: int = Field(2000, ge=2)
    m_min: int = Field(2, ge=2)
    diag_stride: int = Field(1, ge=1)
    batch_size: int | None = Field(None, ge=1)
    batch_sizes: list[int] | None = None

    @model_validator(mode="after")
    def _batches(self):
        if self.batch_size is not None and self.batch_sizes is not None:
            raise ValueError("give batch_size or batch_sizes, not both")
        if self.batch_sizes is not None and (not self.batch_sizes or min(self.batch_sizes) < 1):
            raise ValueError("batch_sizes must be non-empty positive integers")
        if self.m_min > self.m_cap:
            raise ValueError("m_min must not exceed m_cap")
        return self


class SyntheticSection(_Strict):
    n: int = Field(ge=1)
    seed: int = 0


class DataSection(_Strict):
    path: str | None = None
    schema_: Literal["mixture", "gp", "heart"] | None = Field(None, alias="schema")
    synthetic: SyntheticSection | None = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("exactly one of path / synthetic must be given")
        return self


class MixtureSection(_Strict):
    zeta: float = 0.0
    kappa: float = Field(0.01, gt=0)
    alpha: float = Field(1.0, gt=0)
    beta: float = Field(2.0, gt=0)
    delta: float = Field(1.0, gt=0)
    k: int = Field(4, ge=1)
    init_center: list[float] | None = [-3.0, 0.0, 3.0, 6.0]
    init_sd: float = Field(0.1, ge=0)


class GpSection(_Strict):
    H: int = Field(10, ge=2)
    power: float = Field(2.0, gt=0)
    shape: float = Field(1.0, gt=0)
    rate: float = Field(1.0, gt=0)
    sigma2: float = Field(1.0, gt=0)
    jitter: float = Field(1e-8, ge=0)
    r: int = Field(1, ge=1)
    n_diag: int = Field(10, ge=1)
    grid_points: int = Field(30, ge=2)
    standardize: bool = True


class McmcSection(_Strict):
    iterations: int = Field(ge=1)


class SmcSection(_Strict):
    ess_threshold: float = Field(0.5, ge=0.0, le=1.0)
    move_count: int = Field(5, ge=0)


class VerifySection(_Strict):
    suite: str = "all"
    instances: int = Field(100, ge=1)


class RunConfig(_Strict):
    algorithm: Literal["smcmc", "mcmc", "smc", "verify"]
    model: Literal["mixture", "gp"] = "mixture"
    seed: int = 0
    L: int = Field(200, ge=2)
    workers: int = Field(1, ge=1)
    chunk_size: int = Field(64, ge=1)
    output_dir: str = "out"
    schedule: ScheduleSection = ScheduleSection()
    data: DataSection | None = None
    mixture: MixtureSection = MixtureSection()
    gp: GpSection = GpSection()
    mcmc: McmcSection | None = None
    smc: SmcSection = SmcSection()
    verify: VerifySection = VerifySection()

    @model_validator(mode="after")
    def _consistent(self):
        if self.algorithm != "verify" and self.data is None:
            raise ValueError("data section is required")
        if self.algorithm == "mcmc" and self.mcmc is None:
            raise ValueError("mcmc.iterations is required for algorithm mcmc")
        if self.algorithm == "smc" and self.model != "mixture":
            raise ValueError("the SMC comparator supports the mixture model only")
        if self.mixture.init_center is not None and len(self.mixture.init_center) != self.mixture.k:
            raise ValueError("mixture.init_center must have k entries")
        return self


def _format(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(raw: dict, base_dir: str | Path | None = None) -> RunConfig:
    """Validate a mapping; relative data paths are checked against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>: configuration must be a mapping")
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None
    if cfg.data is not None and cfg.data.path is not None:
        p = Path(cfg.data.path)
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        if not p.is_file():
            raise ConfigError(f"data.path: file not found: {p}")
        cfg.data.path = str(p.resolve())
        if cfg.data.schema_ is None:
            cfg.data.schema_ = "mixture" if cfg.model == "mixture" else "gp"
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Read YAML (or JSON) from ``path``.

    A run manifest is accepted too: its ``config`` entry is used.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: invalid YAML in {path}: {exc}") from None
    if isinstance(raw, dict) and "config" in raw and "config_sha256" in raw:
        raw = raw["config"]
    return parse_config(raw, path.parent)


# keys that say where and how fast to run, not what to compute
LOCATION_KEYS = ("output_dir", "workers")


def dump_config(cfg: RunConfig, *, full: bool = True, location: bool = True) -> dict:
    """Plain-data form.

    With ``full=False`` only keys present in the input are kept; with
    ``location=False`` the output directory and worker count are dropped.
    """
    out = cfg.model_dump(mode="json", by_alias=True, exclude_unset=not full)
    if not location:
        for k in LOCATION_KEYS:
            out.pop(k, None)
    return out


def config_digest(cfg: RunConfig) -> str:
    """sha256 of the canonical JSON of everything that determines the results."""
    blob = json.dumps(dump_config(cfg, location=False), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
