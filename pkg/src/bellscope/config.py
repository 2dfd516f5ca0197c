"""Experiment configuration, report envelopes and CSV helpers."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .models import CorrelationModel, model_from_descriptor
from .quantum import BellLabel, BellState, Parity
from .settings import PHOTON_OPTIMAL, SINGLET_OPTIMAL, ChshSettings, pr_assignment


class ConfigError(ValueError):
    """Configuration could not be read or failed validation."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


BellName = Literal["PsiMinus", "PsiPlus", "PhiPlus", "PhiMinus"]
Realization = Literal["spin-half", "photon"]


class QuantumSpec(_Strict):
    kind: Literal["quantum"] = "quantum"
    state: BellName = "PsiMinus"
    realization: Realization | None = None


class LhvSpec(_Strict):
    kind: Literal["lhv"]
    weights: list[float] = Field(min_length=16, max_length=16)


class PrSpec(_Strict):
    kind: Literal["pr"]


class GeneralizedPrSpec(_Strict):
    kind: Literal["generalized-pr"]
    c: float = Field(ge=0.0, le=0.5)
    e: float | None = None
    replaced_cell: Literal["first", "fourth"] = "first"


class TableSpec(_Strict):
    kind: Literal["table"]
    cells: dict[str, list[float]]


ModelSpec = Annotated[Union[QuantumSpec, LhvSpec, PrSpec, GeneralizedPrSpec, TableSpec], Field(discriminator="kind")]


class AngleSettings(_Strict):
    a: float
    a_prime: float
    b: float
    b_prime: float


SettingsPreset = Literal["singlet-optimal", "photon-optimal", "pr-assignment"]


class ScanSpec(_Strict):
    start: float = 0.0
    stop: float = 2.0 * math.pi
    points: int = Field(default=721, ge=2)


class SpectrumSpec(_Strict):
    points: int = Field(default=101, ge=2)


class Tolerances(_Strict):
    analytic: float = Field(default=1e-12, gt=0)
    optimizer: float = Field(default=1e-6, gt=0)
    monte_carlo: float = Field(default=5e-3, gt=0)
    z_threshold: float = Field(default=3.0, gt=0)


class ExperimentConfig(_Strict):
    model: ModelSpec = Field(default_factory=QuantumSpec)
    state: BellName | None = None
    realization: Realization | None = None
    settings: SettingsPreset | AngleSettings | None = None
    optimize: Literal["min", "max"] | None = None
    grid_points: int = Field(default=16, ge=8)
    refine_iters: int = Field(default=50, ge=0)
    n_per_pair: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str | None = None
    write_json_ensemble: bool = True
    scan: ScanSpec = Field(default_factory=ScanSpec)
    spectrum: SpectrumSpec = Field(default_factory=SpectrumSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    verify_models: list[ModelSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _model_builds(self) -> "ExperimentConfig":
        for spec in [self.model, *self.verify_models]:
            try:
                model_from_descriptor(spec.model_dump(exclude_none=True))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"invalid model {spec.model_dump(exclude_none=True)}: {exc}") from exc
        return self

    def build_model(self) -> CorrelationModel:
        return model_from_descriptor(self.model.model_dump(exclude_none=True))

    def target_state(self) -> BellState:
        """State whose conservation targets the analyses compare against.

        Falls back to the quantum model's own state, then to the singlet.
        """
        if self.state is not None:
            return BellState.of(self.state, self.realization)
        if isinstance(self.model, QuantumSpec):
            return BellState.of(self.model.state, self.model.realization)
        return BellState.of(BellLabel.PSI_MINUS, self.realization)

    def chsh_settings(self) -> ChshSettings:
        """Explicit angles, a named preset, or a default chosen from the model."""
        s = self.settings
        if isinstance(s, AngleSettings):
            return ChshSettings.from_angles(s.a, s.a_prime, s.b, s.b_prime)
        if s is None:
            if isinstance(self.model, QuantumSpec):
                s = "singlet-optimal" if self.target_state().parity is Parity.UNLIKE else "photon-optimal"
            else:
                s = "pr-assignment"
        if s == "singlet-optimal":
            return SINGLET_OPTIMAL
        if s == "photon-optimal":
            return PHOTON_OPTIMAL
        return pr_assignment(self.target_state())

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ReportEnvelope:
    command: str
    config: dict[str, Any]
    results: dict[str, Any]
    generated_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    artifact: str = "bellscope"
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return {
            "artifact": self.artifact,
            "version": self.version,
            "command": self.command,
            "generated_at": self.generated_at,
            "config": self.config,
            "results": self.results,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportEnvelope":
        data = json.loads(text)
        return cls(
            command=data["command"],
            config=data["config"],
            results=data["results"],
            generated_at=data["generated_at"],
            artifact=data["artifact"],
            version=data["version"],
        )


def fmt(x: float) -> str:
    """17 significant digits; round-trips every double."""
    return format(float(x), ".17g")


def write_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()
