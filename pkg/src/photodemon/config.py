"""Run configuration: one strict JSON document per run.

Unknown keys are rejected at every level so that a resolved config can be
written next to the artifacts and fed back in to reproduce them.
"""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fock import VARIANTS

U64_MAX = 2**64 - 1
Variant = Literal["quantum", "classical"]


def default_rs() -> list[float]:
    return [round(0.005 * k, 3) for k in range(1, 61)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    n_bars: list[float] = Field(default_factory=lambda: [3.97, 7.99], min_length=1)
    rs: list[float] = Field(default_factory=default_rs, min_length=1)
    etas: list[float] = Field(default_factory=lambda: [1.0], min_length=1)
    n_detectors: int = Field(10, ge=1)
    m_th: int = Field(1, ge=1)
    variants: list[Variant] = Field(default_factory=lambda: list(VARIANTS), min_length=1)
    n_max: int | None = Field(None, ge=0)

    @field_validator("n_bars")
    @classmethod
    def _positive(cls, v):
        if any(not x > 0 for x in v):
            raise ValueError("every n_bar must be positive")
        return v

    @field_validator("rs")
    @classmethod
    def _ratios(cls, v):
        if any(not 0 <= x < 1 for x in v):
            raise ValueError("every r must lie in [0, 1)")
        return v

    @field_validator("etas")
    @classmethod
    def _efficiencies(cls, v):
        if any(not 0 < x <= 1 for x in v):
            raise ValueError("every eta must lie in (0, 1]")
        return v

    @model_validator(mode="after")
    def _threshold(self):
        if self.m_th > self.n_detectors:
            raise ValueError("m_th cannot exceed n_detectors")
        return self


class VerifyConfig(GridConfig):
    etas: list[float] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)
    tol: float = Field(1e-10, gt=0)


class PNRDSettings(_Strict):
    channels: int = Field(10, ge=1)
    eta: float = Field(1.0, gt=0, le=1)
    dark_rate: float = Field(0.0, ge=0, lt=1)


class SimulateConfig(_Strict):
    n_bar: float = Field(3.97, gt=0)
    r: float = Field(0.144, ge=0, lt=1)
    eta: float = Field(1.0, gt=0, le=1)
    n_detectors: int = Field(10, ge=1)
    m_th: int = Field(1, ge=1)
    variant: Variant = "quantum"
    shots: int = Field(1_000_000, gt=0)
    pnrd: PNRDSettings = Field(default_factory=PNRDSettings)

    @model_validator(mode="after")
    def _threshold(self):
        if self.m_th > self.n_detectors:
            raise ValueError("m_th cannot exceed n_detectors")
        return self


class RetrieveConfig(_Strict):
    """``clicks`` and ``reference`` are file paths; ``reference_n_bar`` asks for a thermal reference."""

    clicks: str | None = None
    eta: float = Field(1.0, gt=0, le=1)
    alpha: float = Field(1e-6, ge=0)
    max_iters: int = Field(100_000, ge=1)
    stop_tol: float = Field(1e-10, gt=0)
    n_max: int | None = Field(None, ge=0)
    init: Literal["thermal-fit", "uniform"] = "thermal-fit"
    reference: str | None = None
    reference_n_bar: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_reference(self):
        if self.reference is not None and self.reference_n_bar is not None:
            raise ValueError("give at most one of reference and reference_n_bar")
        return self


class FormatConfig(_Strict):
    click_csv: bool = True
    json_indent: int = Field(2, ge=0)


class RunConfig(_Strict):
    mode: Literal["sweep", "simulate", "retrieve", "verify"] | None = None
    seed: int = Field(0, ge=0, le=U64_MAX)
    threads: int = Field(1, ge=0)
    sweep: GridConfig = Field(default_factory=GridConfig)
    simulate: SimulateConfig = Field(default_factory=SimulateConfig)
    retrieve: RetrieveConfig = Field(default_factory=RetrieveConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    formats: FormatConfig = Field(default_factory=FormatConfig)

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def load_config(text: str | None = None, **overrides) -> RunConfig:
    """Parse and validate a JSON config, applying top-level ``overrides`` that are not None.

    Raises
    ------
    ValueError
        On malformed JSON or any schema violation.
    """
    data = {}
    if text is not None:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ValueError(f"invalid config: {exc}") from exc
