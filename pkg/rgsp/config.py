"""Process-wide settings read from the environment (and a local .env file)."""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Settings:
    seed: Optional[int] = None
    jobs: Optional[int] = None
    log_level: str = "WARNING"
    output_dir: str = "results"

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            seed=_int_or_none(os.getenv("RGSP_SEED")),
            jobs=_int_or_none(os.getenv("RGSP_JOBS")),
            log_level=os.getenv("RGSP_LOG_LEVEL", "WARNING").upper(),
            output_dir=os.getenv("RGSP_OUTPUT_DIR", "results"),
        )


def _int_or_none(value: Optional[str]) -> Optional[int]:
    if value is None or value.strip() == "":
        return None
    try:
        return int(value)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring non-integer setting %r", value)
        return None


def get_settings() -> Settings:
    """Re-read the environment on every call so tests can monkeypatch it."""
    return Settings.from_env()
