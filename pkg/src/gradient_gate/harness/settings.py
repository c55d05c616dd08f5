"""Process-level settings read from ``GRADIENT_GATE_*`` environment variables or ``.env``."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class HarnessSettings(BaseSettings):
    """Defaults for every experiment run; none is required."""

    model_config = SettingsConfigDict(
        env_prefix="GRADIENT_GATE_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"
    output_dir: Path = Path("results")
    data_dir: Path = Path("data/mnist")
    workers: int = Field(1, ge=1)
    progress: bool = False


@lru_cache
def get_settings() -> HarnessSettings:
    """Get cached settings instance."""
    return HarnessSettings()
