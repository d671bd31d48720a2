"""
Seeded random streams keyed by (seed, stream, rank, phase, worker, sweep).
"""

import numpy as np

STREAM_MERGE = 1
STREAM_MCMC = 2
STREAM_FINE_TUNE_MERGE = 3
STREAM_FINE_TUNE_MCMC = 5
STREAM_GENERATOR = 4


def make_rng(seed: int, stream: int, rank: int = 0, phase: int = 0,
             worker: int = 0, sweep: int = 0) -> np.random.Generator:
    """Independent, reproducible generator; rank 0 is used by serial runs"""
    return np.random.default_rng(np.random.SeedSequence([seed, stream, rank, phase, worker, sweep]))
