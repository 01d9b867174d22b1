"""
Environment-level settings (log level, worker count, output directory).
"""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Defaults read from ECC_IMAGING_* environment variables."""
    model_config = SettingsConfigDict(env_prefix="ECC_IMAGING_", extra="ignore")

    log_level: str = "INFO"
    workers: int = Field(1, ge=1)
    output_dir: str = "outputs"


def get_settings() -> Settings:
    return Settings()
