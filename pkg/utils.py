"""
Shared helpers: environment lookups and float formatting.
"""

import math
import os

from dotenv import load_dotenv

load_dotenv()  # MIRRORVLC_* settings may come from a .env file


def env_int(name: str, default: int) -> int:
    """Read a positive integer from the environment, falling back to default."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        print(f"⚠️  Ignoring {name}={raw!r}: not an integer")
        return default
    return value if value > 0 else default


def thread_count() -> int:
    return env_int("MIRRORVLC_THREADS", 1)


def default_output_dir() -> str:
    return os.getenv("MIRRORVLC_OUTPUT_DIR", "results")


def slow_tests_enabled() -> bool:
    return os.getenv("MIRRORVLC_RUN_SLOW", "").strip().lower() in ("1", "true", "yes")


def format_float(value: float) -> str:
    """Shortest text that parses back to exactly the same float."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def parse_float(text: str) -> float:
    return float(text.strip())
