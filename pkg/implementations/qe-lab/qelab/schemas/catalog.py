# qelab/schemas/catalog.py

from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class ParameterSpec(BaseModel):
    """One parameter accepted by a catalog entry."""

    name: str
    default: Optional[Union[float, str]] = None
    choices: Optional[list[str]] = None
    constraint: Optional[str] = Field(None, description="Human-readable constraint")


class CatalogEntry(BaseModel):
    """Describes a buildable example and the literature it comes from."""

    name: str = Field(..., description="Catalog key")
    dimension: int
    parameters: list[ParameterSpec] = Field(default_factory=list)
    reference: str = Field(..., description="Literature tag")
    description: str = ""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "name": "thm1-iii",
                "dimension": 3,
                "parameters": [
                    {"name": "m", "default": 2.0},
                    {"name": "a", "default": 1.0, "constraint": "a > sqrt(m/(m+2))"},
                ],
                "reference": "rotational warped product, non-Einstein for a != 1",
            }
        },
    )
