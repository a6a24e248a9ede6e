"""
Application Configuration
Loads settings from environment variables
"""
from pydantic_settings import BaseSettings
from pydantic import field_validator


class Settings(BaseSettings):
    """Engine settings loaded from environment variables"""

    # Project
    PROJECT_NAME: str = "liftedmap"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names"""
        if isinstance(v, str):
            return v.strip().upper()
        return v

    # Exact inference
    BRUTE_FORCE_CAP: int = 2 ** 24

    # Solver numerics
    ENERGY_TOLERANCE: float = 1e-9
    HANDOFF_TOLERANCE: float = 1e-9  # relative, floored at 1
    DRIFT_CHECK_INTERVAL: int = 64  # moves between full energy re-evaluations
    DRIFT_TOLERANCE: float = 1e-6  # relative

    # Harness
    DOMINANCE_GRID_POINTS: int = 64
    MAX_PARALLEL_RUNS: int = 4
    DEFAULT_SEED: int = 0

    # Pipelines
    OUT_OF_FRAME_FACTOR: float = 10.0  # multiple of the largest window cost
    SEED_PENALTY: float = 1000.0

    class Config:
        env_file = ".env"
        case_sensitive = True


# Global settings instance
settings = Settings()
