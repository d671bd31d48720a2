"""
Configuration constants for the SBP engine.
Contains file-format constants, environment lookups and logging setup.
"""

import logging
import os
from typing import Optional

from dotenv import load_dotenv

# Environment variable names
ENV_SEED = 'SBP_SEED'
ENV_LOG_LEVEL = 'SBP_LOG_LEVEL'
ENV_RANK = 'SBP_RANK'
ENV_WORLD_SIZE = 'SBP_WORLD_SIZE'
ENV_RENDEZVOUS = 'SBP_RENDEZVOUS'
ENV_COLLECTIVE_TIMEOUT = 'SBP_COLLECTIVE_TIMEOUT'

DEFAULT_SEED = 42
DEFAULT_RENDEZVOUS = '127.0.0.1:29500'
DEFAULT_COLLECTIVE_TIMEOUT = 120.0

# Partial results are combined pairwise until this many remain
DCSBP_COMBINE_THRESHOLD = 4

# Golden-section ratio on community counts
GOLDEN_RATIO = 0.618

# Generator constants
TRUNCATED_MIN_DEGREE = 10
TRUNCATED_MAX_DEGREE = 100
UNTRUNCATED_MAX_DEGREE_FRACTION = 1 / 20
DEFAULT_POWERLAW_EXPONENT = -2.5
DEFAULT_INTRA_RATIO = 2.0
DEFAULT_DIRICHLET_ALPHA = 2.0
DESK_SCALE_DIVISOR = 10

# Benchmark CSV schema
BENCH_COLUMNS = [
    'preset', 'algo', 'ranks', 'seed', 'nmi', 'dl_norm',
    'island_fraction', 'seconds', 'final_C', 'status'
]

# Per-phase trace CSV schema
TRACE_COLUMNS = ['phase', 'kind', 'communities', 'dl', 'accepted_moves', 'sweeps', 'seconds']

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s %(message)s'


def load_environment(env_file: Optional[str] = None) -> None:
    """Load a .env file (if present) into the process environment"""
    load_dotenv(env_file, override=False)


def get_default_seed() -> int:
    """Seed from SBP_SEED, falling back to DEFAULT_SEED"""
    value = os.getenv(ENV_SEED)
    if value is None or value.strip() == '':
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{ENV_SEED} must be an integer, got {value!r}")


def get_collective_timeout() -> float:
    value = os.getenv(ENV_COLLECTIVE_TIMEOUT)
    return float(value) if value else DEFAULT_COLLECTIVE_TIMEOUT


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for CLI use; library modules only create loggers"""
    level_name = (level or os.getenv(ENV_LOG_LEVEL) or 'WARNING').upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING), format=LOG_FORMAT)
