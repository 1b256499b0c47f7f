"""
Runtime configuration.

Defaults are read from the environment (optionally populated from a `.env`
file, see `.env.example`). Command-line flags override these values.
"""

import os
import logging
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class ConfigError(ValueError):
    """An environment variable holds a value that cannot be used."""


def _env_float(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return float(default)
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {raw!r}")
    return value


def _env_int(name, default, minimum=0):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return int(default)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {raw!r}")
    return value


# === 1. Numerical tolerances ===
TAIL_EPS = _env_float("CPENT_TAIL_EPS", 1e-12)
LC_TOL = _env_float("CPENT_LC_TOL", 1e-12)
FD_STEP = _env_float("CPENT_FD_STEP", 1e-5)
UNDERFLOW_FLOOR = _env_float("CPENT_UNDERFLOW_FLOOR", 1e-300)

# === 2. Sweeps ===
SEED = _env_int("CPENT_SEED", 20240601)
N_JOBS = _env_int("CPENT_N_JOBS", 1, minimum=-1)
SUPPORT_CAP = _env_int("CPENT_SUPPORT_CAP", 200, minimum=1)
GRID_RESOLUTION = _env_int("CPENT_GRID_RESOLUTION", 200, minimum=1)

# === 3. Logging ===
LOG_LEVEL = os.getenv("CPENT_LOG_LEVEL", "WARNING").upper()
if not isinstance(logging.getLevelName(LOG_LEVEL), int):
    raise ConfigError(f"CPENT_LOG_LEVEL is not a logging level: {LOG_LEVEL!r}")


def as_dict():
    """Resolved defaults, embedded in output artifacts."""
    return {
        "tail_eps": TAIL_EPS,
        "lc_tol": LC_TOL,
        "fd_step": FD_STEP,
        "underflow_floor": UNDERFLOW_FLOOR,
        "seed": SEED,
        "n_jobs": N_JOBS,
        "support_cap": SUPPORT_CAP,
        "grid_resolution": GRID_RESOLUTION,
    }
