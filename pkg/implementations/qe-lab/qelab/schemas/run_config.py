# qelab/schemas/run_config.py

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from qelab.config import settings
from qelab.errors import ConfigError

Command = Literal["zoo", "verify", "dim", "profile", "asympt"]


class GridAxis(BaseModel):
    """Sampling of one coordinate axis."""

    lo: float
    hi: float
    count: int = Field(..., ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_order(self) -> "GridAxis":
        if self.hi < self.lo:
            raise ValueError("grid axis upper bound below lower bound")
        return self


class GridSpec(BaseModel):
    """Either a per-axis point count over the example's box or explicit axes."""

    points: Optional[int] = Field(None, ge=1)
    axes: Optional[list[GridAxis]] = None

    model_config = ConfigDict(extra="forbid")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"11"`` or ``"lo:hi:count,lo:hi:count,..."``."""
        text = text.strip()
        try:
            if ":" not in text:
                return cls(points=int(text))
            axes = []
            for chunk in text.split(","):
                lo, hi, count = chunk.split(":")
                axes.append(GridAxis(lo=float(lo), hi=float(hi), count=int(count)))
            return cls(axes=axes)
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"cannot parse grid spec {text!r}: {e}") from e


class Tolerances(BaseModel):
    residual: float = Field(default_factory=lambda: settings.RESIDUAL_TOL)
    fd_residual: float = Field(default_factory=lambda: settings.FD_RESIDUAL_TOL)
    gradr: float = Field(default_factory=lambda: settings.GRADR_TOL)
    lapr: float = Field(default_factory=lambda: settings.LAPR_TOL)
    lemma: float = Field(default_factory=lambda: settings.LEMMA_TOL)
    quotient: float = Field(default_factory=lambda: settings.QUOTIENT_TOL)
    mu_spread: float = Field(default_factory=lambda: settings.MU_SPREAD_TOL)
    convention: float = Field(default_factory=lambda: settings.CONVENTION_TOL)
    profile: float = Field(default_factory=lambda: settings.PROFILE_TOL)
    singular: float = Field(default_factory=lambda: settings.SINGULAR_TOL)
    eigen_gap: float = Field(default_factory=lambda: settings.EIGEN_GAP_TOL)

    model_config = ConfigDict(extra="forbid")


class OutputSpec(BaseModel):
    path: Optional[str] = None
    format: Literal["text", "json"] = "text"

    model_config = ConfigDict(extra="forbid")


class RunConfig(BaseModel):
    """Configuration of one CLI run."""

    command: Command
    example: Optional[str] = None
    params: dict[str, Union[float, str]] = Field(default_factory=dict)
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    loop_budget: Optional[int] = Field(None, ge=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    dim_filter: Optional[int] = None
    potential: Optional[str] = None
    output: OutputSpec = Field(default_factory=OutputSpec)

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "command": "verify",
                "example": "thm1-iii",
                "params": {"m": 2, "a": 1.5},
                "grid": {"points": 5},
                "seed": 0,
            }
        },
    )

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides) -> "RunConfig":
        """Load a JSON configuration document; keyword overrides win."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.build(**data)

    @classmethod
    def build(cls, **data) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(str(e)) from e
