# qelab/config.py

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Configuration settings for the laboratory.

    Every field can be overridden through a ``QELAB_``-prefixed environment
    variable or a ``.env`` file.
    """

    LOG_LEVEL: str = "INFO"
    DEFAULT_SEED: int = 0

    # residual tolerances (scale-normalized)
    RESIDUAL_TOL: float = 1e-8
    FD_RESIDUAL_TOL: float = 1e-5
    GRADR_TOL: float = 1e-5
    LAPR_TOL: float = 1e-4
    LEMMA_TOL: float = 1e-4
    QUOTIENT_TOL: float = 1e-7
    MU_SPREAD_TOL: float = 1e-8
    CONVENTION_TOL: float = 1e-6

    PROFILE_TOL: float = 1e-9
    PROFILE_T_MAX: float = 3.5
    PROFILE_GRID_STEP: float = 0.01

    TRANSPORT_RTOL: float = 1e-10
    SINGULAR_TOL: float = 1e-6
    EIGEN_GAP_TOL: float = 1e-6

    GRID_POINTS: int = 11
    BOX_HALF_WIDTH: float = 3.0

    EXPONENT_SLACK: float = 0.05
    CHAIN_SLACK: float = 0.1

    model_config = SettingsConfigDict(
        env_prefix="QELAB_", env_file=".env", extra="ignore"
    )


settings = Settings()
