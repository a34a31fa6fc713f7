"""
Runtime settings for the threshold group-testing toolkit.

Values come from the process environment, optionally seeded from a `.env`
file in the working directory:

- GT_DEBUG           enable icecream tracing in every module (default: off)
- GT_EXACT_N_MAX     largest universe handled with exact rationals (default: 200)
- GT_ENUM_N_MAX      largest universe for exact induced distributions (default: 22)
- GT_ENUM_CLASS_MAX  largest C(n, s) enumerated per size class (default: 1000000)
- GT_REPORT_DIR      directory for JSON run reports (default: reports)
"""

import os
from pathlib import Path

from dotenv import load_dotenv
from icecream import ic
from pydantic import BaseModel, Field

load_dotenv()


class Settings(BaseModel):
    """Environment-derived knobs shared by all packages."""

    debug: bool = Field(default=False, description="Turn on icecream tracing")
    exact_n_max: int = Field(default=200, ge=1, description="Exact rational cutoff for hypergeometric laws")
    enum_n_max: int = Field(default=22, ge=1, description="Universe cutoff for exact enumeration")
    enum_class_max: int = Field(default=1_000_000, ge=1, description="Per-class C(n, s) cutoff")
    report_dir: Path = Field(default=Path("reports"), description="Where JSON run reports go")


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in {"1", "true", "yes", "on"}


def load_settings() -> Settings:
    """Build settings from the current environment."""
    return Settings(
        debug=_env_flag("GT_DEBUG"),
        exact_n_max=int(os.getenv("GT_EXACT_N_MAX", "200")),
        enum_n_max=int(os.getenv("GT_ENUM_N_MAX", "22")),
        enum_class_max=int(os.getenv("GT_ENUM_CLASS_MAX", "1000000")),
        report_dir=Path(os.getenv("GT_REPORT_DIR", "reports")),
    )


def configure_debug(enabled: bool) -> None:
    """Switch icecream output on or off for the whole process."""
    if enabled:
        ic.enable()
    else:
        ic.disable()


SETTINGS = load_settings()
configure_debug(SETTINGS.debug)
