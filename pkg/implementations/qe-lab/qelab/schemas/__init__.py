# qelab/schemas/__init__.py

from .catalog import CatalogEntry, ParameterSpec
from .geometry import ChartPoint
from .reports import (
    CheckResult,
    DecayChainReport,
    DecayFit,
    DichotomyReport,
    GradientReport,
    GrowthReport,
    ProfileSummary,
    Report,
    ResidualReport,
    SolutionSpaceEstimate,
    TransportCheck,
)
from .run_config import GridAxis, GridSpec, OutputSpec, RunConfig, Tolerances
