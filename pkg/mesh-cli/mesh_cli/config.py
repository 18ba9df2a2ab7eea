import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path


_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


@dataclass
class CliSettings:
    log_level: str = "INFO"
    output_root: Path = Path("runs")

    @classmethod
    def from_env(cls) -> "CliSettings":
        log_level = os.getenv("MESH_LOG_LEVEL", "INFO").upper()
        if log_level not in _LEVELS:
            raise RuntimeError(f"MESH_LOG_LEVEL must be one of {', '.join(sorted(_LEVELS))}")
        return cls(
            log_level=log_level,
            output_root=Path(os.getenv("MESH_OUTPUT_ROOT", "runs")),
        )


@lru_cache(maxsize=1)
def get_settings() -> CliSettings:
    return CliSettings.from_env()


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(levelname)s %(name)s %(message)s")
