"""Testbed configuration using Pydantic Settings."""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_LAYOUT_PATH = Path(__file__).resolve().parent.parent / "data" / "opcode_layout.txt"


class Settings(BaseSettings):
    """Testbed settings loaded from environment variables (prefix EVGUARD_)."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="EVGUARD_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    log_level: str = "INFO"
    default_seed: int = 7
    output_dir: str = "./runs"

    # Feature pipeline
    layout_path: Path = DEFAULT_LAYOUT_PATH
    scaling: Literal["minmax", "standard"] = "minmax"

    # Training / evaluation
    cv_jobs: int = Field(default=1, ge=1)
    gradient_check_coordinates: int = Field(default=200, ge=1)
    epoch_log_interval: int = Field(default=10, ge=1)  # epochs between INFO lines

    # Detection mesh
    mesh_propagation: Literal["global", "downstream"] = "global"

    @field_validator("log_level", mode="after")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Upper-case the log level name."""
        return v.strip().upper() or "INFO"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    Uses lru_cache to ensure settings are loaded only once.
    """
    return Settings()


# Global settings instance
settings = get_settings()
