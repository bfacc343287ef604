"""
Process-level settings.
Values come from the environment (prefix INVARIANT_) after a .env file is loaded.
"""
import logging
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Runtime settings shared by the CLI and the HTTP service"""
    model_config = SettingsConfigDict(env_prefix="INVARIANT_", frozen=True)

    log_level: str = "INFO"
    workers: int = 1
    out_dir: str = "runs"
    # Fourier amplitudes below this fraction of the peak count as band-limited
    spectral_threshold: float = 1e-12
    # Largest mesh accepted through the HTTP API
    api_max_steps: int = 200_000


@lru_cache
def get_settings() -> Settings:
    """Cached settings instance"""
    return Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once for CLI and server entry points"""
    logging.basicConfig(
        level=(level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
