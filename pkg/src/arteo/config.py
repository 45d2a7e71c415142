"""Experiment configuration: a TOML document validated into typed settings.

Grammar: top-level keys ``scenario``, ``algorithm``, ``T``, ``seeds``,
``zeta``, ``explore``, ``workers``, ``output_dir`` plus the tables
``[confidence]``, ``[kernel]``, ``[solver]``, ``[motor]``, ``[toy]``,
``[bid]`` and ``[search]``. Unknown keys are rejected. Omitted keys take
the scenario defaults.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Literal

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "dump_config",
]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConfidenceSection(_Strict):
    rkhs_bound: float | None = Field(None, gt=0)
    noise_scale: float | None = Field(None, ge=0)
    failure_prob: float = Field(0.05, gt=0, lt=1)
    beta_override: float | None = Field(None, ge=0)


class KernelSection(_Strict):
    family: Literal["se", "matern32"] = "se"
    length_scale: float = Field(gt=0)
    signal_variance: float = Field(gt=0)


class SolverSection(_Strict):
    n_starts: int = Field(8, ge=1)
    max_inner_iter: int = Field(500, ge=1)
    max_outer_iter: int = Field(30, ge=1)
    tol_feas: float = Field(1e-6, gt=0)
    tol_stationarity: float = Field(1e-6, gt=0)
    n_screen: int = Field(256, ge=0)


class MotorSection(_Strict):
    torque_lo: float = 0.0
    torque_hi: float = 38.0
    limit: float = Field(225.6, gt=0)
    noise_std: float = Field(1.0, ge=0)
    margin: float = Field(5.0, ge=0)
    seed_torques: tuple[float, ...] = (2.0, 6.0)
    reference: Literal["default", "long", "constant"] = "default"
    constant_level: float = Field(120.0, ge=0)
    segments: list[tuple[int, float]] | None = None
    reference_csv: str | None = None

    @model_validator(mode="after")
    def _box(self):
        if self.torque_lo > self.torque_hi:
            raise ValueError("torque_lo must not exceed torque_hi")
        if not self.seed_torques:
            raise ValueError("seed_torques must be nonempty")
        return self


class ToySection(_Strict):
    goal: float = 15.0
    steps: int = Field(20, ge=1)
    limit: float = 25.0
    noise_std: float = Field(0.01, ge=0)


class BidSection(_Strict):
    m: int = Field(10, ge=1)
    count: int = Field(25, ge=1)
    data_seed: int = 0
    campaigns_csv: str | None = None
    seed_csv: str | None = None
    click_cost: float = 1.0
    seed_size: int = Field(30, ge=1)
    roi_fraction: float = Field(0.9, gt=0)
    price_dims: int = Field(16, ge=1)
    click_dims: int = Field(8, ge=1)
    price_noise_std: float = Field(1.0, ge=0)
    click_noise_std: float = Field(0.05, ge=0)
    click_rate: float = Field(0.3, ge=0.05, le=0.5)
    click_input: Literal["features", "features+bid"] = "features"
    beta_override: float | None = Field(2.0, ge=0)
    price_kernel: KernelSection = KernelSection(family="matern32", length_scale=1.0, signal_variance=150.0**2)
    click_kernel: KernelSection = KernelSection(family="se", length_scale=0.5, signal_variance=0.25)

    @model_validator(mode="after")
    def _paths(self):
        if (self.campaigns_csv is None) != (self.seed_csv is None):
            raise ValueError("campaigns_csv and seed_csv must be given together")
        if self.click_dims > self.price_dims:
            raise ValueError("click_dims must not exceed price_dims")
        return self


class SearchSection(_Strict):
    candidates: list[float] = [5.0, 10.0, 25.0, 50.0, 100.0]
    seeds: list[int] = [0, 1, 2, 3, 4]
    bo_bounds: tuple[float, float] = (1.0, 100.0)
    bo_budget: int = Field(20, ge=3, le=35)
    horizons: list[int] = [50, 100, 200]

    @field_validator("bo_bounds")
    @classmethod
    def _order(cls, v):
        if not v[0] < v[1]:
            raise ValueError("lower bound must be below upper bound")
        return v

    @field_validator("horizons")
    @classmethod
    def _increasing(cls, v):
        if not v or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("horizons must be nonempty and increasing")
        return v


class ExperimentConfig(_Strict):
    scenario: Literal["motor", "bid", "toy"] = "motor"
    algorithm: Literal["arteo", "safe_ucb", "both"] = "arteo"
    T: int | None = Field(None, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    zeta: float | None = Field(None, ge=0)
    explore: Literal["rule", "never", "always"] = "rule"
    workers: int = Field(1, ge=1)
    output_dir: str = "out"
    confidence: ConfidenceSection = ConfidenceSection()
    kernel: KernelSection | None = None
    solver: SolverSection = SolverSection()
    motor: MotorSection = MotorSection()
    toy: ToySection = ToySection()
    bid: BidSection = BidSection()
    search: SearchSection = SearchSection()

    @model_validator(mode="after")
    def _bid_algorithm(self):
        if self.scenario == "bid" and self.algorithm != "arteo":
            raise ValueError("the bid scenario runs only with algorithm = 'arteo'")
        return self


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate TOML text.

    Raises
    ------
    ConfigError
        With the line number for syntax errors and the dotted field path
        for invalid values.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        where = f" at line {line}, column {exc.colno}" if line else ""
        raise ConfigError(f"syntax error{where}: {getattr(exc, 'msg', exc)}") from None
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_drop_none(v) for v in obj]
    return obj


def dump_config(config: ExperimentConfig) -> str:
    """Effective configuration as TOML; ``parse_config`` of the output gives ``config`` back."""
    return tomli_w.dumps(_drop_none(config.model_dump(mode="python")))
