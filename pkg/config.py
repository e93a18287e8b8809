import os
from dotenv import load_dotenv

# Load .env only for local convenience. Batch machines pass env vars directly.
load_dotenv()


def _float_env(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        return default


def _threads_env() -> int:
    raw = os.environ.get("KSLAB_THREADS", "").strip()
    if raw.isdigit() and int(raw) > 0:
        return int(raw)
    return os.cpu_count() or 1


class BaseConfig:
    # --- Output ---
    OUTPUT_DIR = os.environ.get("KSLAB_OUTPUT_DIR", "runs")
    VERSION_STAMP = "kslab 0.1.0"

    # --- Logging ---
    LOG_LEVEL = os.environ.get("KSLAB_LOG_LEVEL", "INFO").upper()

    # --- Sweeps ---
    # KSLAB_THREADS caps the number of parallel sweep workers
    THREADS = _threads_env()

    # --- Solver defaults (experiment files override these) ---
    BLOWUP_THRESHOLD = _float_env("KSLAB_BLOWUP_THRESHOLD", 1e8)
    DT_SAFETY = _float_env("KSLAB_DT_SAFETY", 0.1)
    DT_MAX = _float_env("KSLAB_DT_MAX", 1e-3)
    REGRID_FACTOR = 1e3
    STEADY_TOL = 1e-10

    # --- Profile construction ---
    PHI_CAP = _float_env("KSLAB_PHI_CAP", 1e8)
    ZERO_TOL = _float_env("KSLAB_ZERO_TOL", 1e-10)
    XI_FLOOR = _float_env("KSLAB_XI_FLOOR", 1e-6)
    PROFILE_S_MAX = 1.0
    PROFILE_TOL = 1e-12

    # --- Analysis ---
    ALPHA_MISMATCH_LIMIT = 0.15
    ZERO_COUNT_TOL = 1e-8


class DevelopmentConfig(BaseConfig):
    LOG_LEVEL = os.environ.get("KSLAB_LOG_LEVEL", "DEBUG").upper()


class ProductionConfig(BaseConfig):
    pass


class TestingConfig(BaseConfig):
    # Sweeps run inline under test
    THREADS = 1


def get_config():
    """Choose config based on KSLAB_ENV. Default to Production."""
    env = (os.environ.get("KSLAB_ENV") or "production").lower()
    if env.startswith("dev"):
        return DevelopmentConfig
    if env.startswith("test"):
        return TestingConfig
    return ProductionConfig
