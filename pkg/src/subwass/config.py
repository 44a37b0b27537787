"""Run configuration: a TOML file with ``[run]``, ``[bernstein]`` and ``[params]`` sections."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import bernstein
from .experiments import ESTIMATORS, RegimeError

KINDS = ("curve", "proxy", "clt", "floor", "critical", "constants", "uniformity")


class ConfigError(ValueError):
    def __init__(self, message: str, fields: list[str]):
        super().__init__(message)
        self.fields = fields


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    kind: Literal[KINDS]  # type: ignore[valid-type]
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    out: Optional[str] = None


class BernsteinSection(_Section):
    variant: Literal["stable", "drift_stable", "stable_mix"] = "stable"
    alpha: float = Field(0.5, gt=0.0, le=1.0)
    beta: Optional[float] = Field(None, gt=0.0, le=1.0)
    drift: Optional[float] = Field(None, ge=0.0)
    weight: Optional[float] = Field(None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _variant_fields(self):
        if self.variant == "drift_stable":
            if self.drift is None:
                raise ValueError("drift_stable needs 'drift'")
            if self.alpha >= 1.0:
                raise ValueError("alpha must be < 1 for drift_stable")
        if self.variant == "stable_mix" and self.beta is None:
            raise ValueError("stable_mix needs 'beta'")
        return self

    def spec(self) -> bernstein.BernsteinSpec:
        d = self.model_dump(exclude_none=True)
        return bernstein.from_dict(d)


class Params(_Section):
    d: int = Field(1, ge=1, le=4)
    r: float = Field(0.0, ge=0.0)
    t: float = Field(200.0, gt=0.0)
    t_grid: list[float] = Field(default_factory=lambda: [25.0, 50.0, 100.0, 200.0])
    step: float = Field(0.01, gt=0.0)
    replicas: int = Field(200, ge=1)
    estimator: Literal[ESTIMATORS] = "exact_1d"  # type: ignore[valid-type]
    start: Union[Literal["stationary"], list[float]] = "stationary"
    starts: list[float] = Field(default_factory=lambda: [0.0, 1.5707963267948966, 3.141592653589793])
    n_grid: list[int] = Field(default_factory=lambda: [2**k for k in range(5, 11)])
    p: float = Field(2.0, gt=0.0)
    r_grid: list[float] = Field(default_factory=lambda: [0.1 / 2**k for k in range(10)])
    tol: float = Field(1e-8, gt=0.0)
    schedule: Optional[Literal["power", "critical"]] = None
    max_atoms: int = Field(2000, ge=1)


class RunConfig(_Section):
    run: RunSection
    bernstein: BernsteinSection = Field(default_factory=BernsteinSection)
    params: Params = Field(default_factory=Params)

    @property
    def spec(self) -> bernstein.BernsteinSpec:
        return self.bernstein.spec()

    def to_toml(self) -> str:
        return tomli_w.dumps(self.model_dump(exclude_none=True))

    @classmethod
    def from_toml(cls, text: str) -> RunConfig:
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}", []) from exc
        return cls.validated(data)

    @classmethod
    def validated(cls, data: dict) -> RunConfig:
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            fields = [".".join(str(p) for p in e["loc"]) for e in exc.errors()]
            msgs = "; ".join(f"{f or '<root>'}: {e['msg']}" for f, e in zip(fields, exc.errors()))
            raise ConfigError(f"schema violation: {msgs}", fields) from exc


def load(path: Union[str, Path]) -> RunConfig:
    return RunConfig.from_toml(Path(path).read_text())


def check_regime(cfg: RunConfig) -> None:
    """Reject parameter sets outside the regime of the dispatched experiment."""
    p, kind = cfg.params, cfg.run.kind
    crit = bernstein.critical_dimension(cfg.spec)
    alpha = bernstein.class_tags(cfg.spec).lower_index
    if kind in ("constants", "clt") and p.r == 0 and p.d >= crit:
        raise RegimeError(f"r=0 divergent: d >= 2(1+alpha) (d={p.d}, alpha={alpha:g})")
    if kind == "clt" and p.d != 1:
        raise RegimeError("clt experiments run in d = 1")
    if kind == "proxy":
        schedule = p.schedule or ("critical" if p.d == crit else "power")
        if schedule == "power" and not p.d > crit:
            raise RegimeError(f"supercritical proxy needs d > 2(1+alpha) = {crit:g} (d={p.d})")
        if schedule == "critical" and p.d != crit:
            raise RegimeError(f"critical proxy needs d = 2(1+alpha) = {crit:g} (d={p.d})")
    if kind in ("curve", "uniformity"):
        if p.estimator == "exact_1d" and p.d != 1 or kind == "uniformity" and p.d != 1:
            raise RegimeError("exact_1d transport needs d = 1")
        ts = [p.t] if kind == "uniformity" else p.t_grid
        for t in ts:
            n = t / p.step
            if abs(n - round(n)) > 1e-9 * n or p.step > t:
                raise RegimeError(f"t={t:g} is not a whole number of steps of {p.step:g}")
    if kind == "curve" and isinstance(p.start, list) and len(p.start) != p.d:
        raise RegimeError(f"start must have d={p.d} coordinates")
    if kind == "critical" and any(not 0 < r <= 0.1 for r in p.r_grid):
        raise RegimeError("critical curve needs r_grid within (0, 0.1]")
    if kind == "floor" and p.d not in (1, 2):
        raise RegimeError("discretization floor supports d in {1, 2}")
