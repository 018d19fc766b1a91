# qelab/schemas/reports.py

from typing import Annotated, Any, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field


def _floats(values) -> list[float]:
    return [float(v) for v in np.ravel(np.asarray(values, dtype=float))]


class ResidualReport(BaseModel):
    """Pointwise and aggregated residuals of one identity over a grid."""

    kind: Literal["residual"] = "residual"
    identity: str
    structure: str
    residuals: list[float] = Field(default_factory=list)
    max_residual: float = 0.0
    mean_residual: float = 0.0
    tolerance: float
    passed: bool
    flagged_points: int = Field(0, description="Points with an ill-conditioned frame")
    notes: Optional[str] = None

    @classmethod
    def from_residuals(
        cls,
        identity: str,
        structure: str,
        residuals: Sequence[float],
        tolerance: float,
        flagged_points: int = 0,
        notes: Optional[str] = None,
    ) -> "ResidualReport":
        values = _floats(residuals)
        worst = max(values) if values else 0.0
        mean = sum(values) / len(values) if values else 0.0
        return cls(
            identity=identity,
            structure=structure,
            residuals=values,
            max_residual=worst,
            mean_residual=mean,
            tolerance=tolerance,
            passed=worst <= tolerance,
            flagged_points=flagged_points,
            notes=notes,
        )

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        """Combine two sweeps of the same identity."""
        if (self.identity, self.structure) != (other.identity, other.structure):
            raise ValueError(
                "can only merge reports of the same identity and structure"
            )
        return ResidualReport.from_residuals(
            self.identity,
            self.structure,
            self.residuals + other.residuals,
            min(self.tolerance, other.tolerance),
            self.flagged_points + other.flagged_points,
            self.notes or other.notes,
        )


class SolutionSpaceEstimate(BaseModel):
    """Numerical estimate of the dimension of the potential-function space."""

    kind: Literal["dimension"] = "dimension"
    structure: str
    dim_estimate: int
    singular_values: list[float]
    tol: float
    threshold: float
    gap_ratio: float
    low_confidence: bool
    basis: list[list[float]] = Field(
        default_factory=list, description="Prolonged states (u, du) at the base point"
    )
    base_point: list[float] = Field(default_factory=list)
    positive_count: int = 0
    loops_used: int = 0
    measured: bool = Field(
        True,
        description="False when no loop constrained the estimate "
        "and dim W = n + 1 is assumed",
    )
    notes: Optional[str] = None

    @property
    def passed(self) -> bool:
        return not self.low_confidence


class DecayFit(BaseModel):
    """Log-log power-law fit of a quantity over radii."""

    kind: Literal["decay"] = "decay"
    quantity: str
    flat: bool = False
    slope: Optional[float] = None
    tau: Optional[float] = Field(None, description="Decay exponent, i.e. -slope")
    leading_tau: Optional[float] = Field(
        None, description="Local decay orders extrapolated to r = infinity"
    )
    constant: Optional[float] = None
    residual: Optional[float] = None
    radii: list[float] = Field(default_factory=list)
    values: list[float] = Field(default_factory=list)
    reference_slope: Optional[float] = None
    within_reference: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.within_reference is not False


class DecayChainReport(BaseModel):
    """Decay fits of b, Christoffel symbols and Ricci tensor on one end."""

    kind: Literal["decay-chain"] = "decay-chain"
    end: str
    dimension: int
    metric_fit: DecayFit
    christoffel_fit: DecayFit
    ricci_fit: DecayFit
    af_range_ok: bool
    chain_ok: bool
    regime: Optional[str] = None
    slack: float

    @property
    def passed(self) -> bool:
        return self.af_range_ok and self.chain_ok


class GrowthReport(BaseModel):
    """Comparison of sup-over-sphere growth of u against the pointwise bounds."""

    kind: Literal["growth"] = "growth"
    structure: str
    m: float
    radii: list[float]
    sup_values: list[float]
    exponent: float
    lower_exponent: float
    lower_ok: bool
    upper_ok: bool
    slack: float
    resolvable: bool = Field(
        True,
        description="Whether the radii are far enough out "
        "to separate log r from r^lower_exponent",
    )
    notes: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


class GradientReport(BaseModel):
    """Check of |grad u| against sqrt(mu/(m-1))."""

    kind: Literal["gradient"] = "gradient"
    structure: str
    mu: float
    bound: float
    max_gradient: float
    tolerance: float
    passed: bool


class ProfileSummary(BaseModel):
    """Summary of one integrated profile."""

    kind: Literal["profile"] = "profile"
    family: str
    params: dict[str, float] = Field(default_factory=dict)
    t_max: float
    points: int
    first_integral_residual: float
    tolerance: float
    sign_ok: bool
    f_at_1: Optional[float] = None
    passed: bool


class TransportCheck(BaseModel):
    """Known-solution transport along random paths."""

    kind: Literal["transport"] = "transport"
    structure: str
    paths: int
    max_relative_error: float
    tolerance: float
    passed: bool


class DichotomyReport(BaseModel):
    """Outcome of the quotient dichotomy scan for one solution pair."""

    kind: Literal["dichotomy"] = "dichotomy"
    structure: str
    classification: Literal["CONSTANT", "NOWHERE_ZERO", "VIOLATION"]
    min_gradient: float
    max_gradient: float
    eps: float

    @property
    def passed(self) -> bool:
        return self.classification != "VIOLATION"


CheckResult = Annotated[
    Union[
        ResidualReport,
        SolutionSpaceEstimate,
        DecayFit,
        DecayChainReport,
        GrowthReport,
        GradientReport,
        ProfileSummary,
        TransportCheck,
        DichotomyReport,
    ],
    Field(discriminator="kind"),
]


class Report(BaseModel):
    """Top-level machine-readable run report."""

    schema_version: str = "1.0"
    tool_version: str
    command: str
    config: dict[str, Any]
    seed: int
    checks: list[CheckResult] = Field(default_factory=list)
    catalog: Optional[list[dict[str, Any]]] = None
    passed: bool = True
    wall_time: float = 0.0
