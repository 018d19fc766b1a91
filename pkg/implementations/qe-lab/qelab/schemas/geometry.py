# qelab/schemas/geometry.py

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class ChartPoint(BaseModel):
    """A point given by its coordinates in a named chart."""

    coords: tuple[float, ...] = Field(..., description="Chart coordinates")
    chart_id: str = Field("default", description="Chart identifier")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"coords": [0.5, 0.0, 0.0], "chart_id": "thm1-iii"}
        },
    )

    @field_validator("coords")
    @classmethod
    def check_coords(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not 1 <= len(v) <= 4:
            raise ValueError("charts of dimension 1 to 4 are supported")
        if not all(math.isfinite(c) for c in v):
            raise ValueError("coordinates must be finite")
        return v

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)
