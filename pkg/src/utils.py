"""
Heralded Fock Tomography – Utilities

Seed splitting, range checks and a timing decorator shared by the modules.
"""
import functools
import hashlib
import logging
import time

import numpy as np

from src.errors import ParameterError

logger = logging.getLogger(__name__)


def derive_seed(seed: int, label: str) -> int:
    """
    Derives a stable 63-bit sub-seed for the component named *label*.

    The rule is sha256(f"{seed}:{label}") truncated to its first 8 bytes,
    top bit cleared. It never depends on Python's hash randomization, so
    identical (seed, label) pairs give identical streams on every run.
    """
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator for sampling block *block* of a run seeded with *seed*."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def require_unit_interval(name: str, value: float) -> float:
    """Returns *value* as float, raising ParameterError unless 0 ≤ value ≤ 1."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return value


def log_duration(label: str):
    """
    Decorator that logs how long the wrapped call took at INFO level.
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            started = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                logger.info("%s finished in %.2f s", label, time.perf_counter() - started)
        return wrapper
    return decorator
