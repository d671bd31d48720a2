"""
Run any algorithm on any backend and return rank 0's result.
"""

import logging
import time
from typing import Callable, Dict, Optional

from ..analysis.records import PartitionResult
from ..analysis.sbp import sbp
from ..data.graph import Graph
from ..data.sbp_config import SbpConfig
from ..errors import GraphInputError
from .base_communicator import BaseCommunicator
from .dcsbp import dcsbp_run
from .edist import edist_run
from .inprocess_communicator import run_inprocess
from .socket_communicator import run_multiprocess

logger = logging.getLogger(__name__)

ALGORITHMS = ('serial', 'dcsbp', 'edist')
BACKENDS = ('inprocess', 'multiprocess')


def _dcsbp_rank(comm: BaseCommunicator, g: Graph, cfg: SbpConfig) -> PartitionResult:
    return dcsbp_run(g, cfg, comm)


def _edist_rank(comm: BaseCommunicator, g: Graph, cfg: SbpConfig) -> PartitionResult:
    return edist_run(g, cfg, comm)


# communicator first, as the rank launchers call them; kept at module level for pickling
RANK_ENTRY_POINTS: Dict[str, Callable[[BaseCommunicator, Graph, SbpConfig], PartitionResult]] = {
    'dcsbp': _dcsbp_rank,
    'edist': _edist_rank,
}


def validate_run(algo: str, ranks: int, backend: str, num_vertices: int) -> None:
    """Reject unknown names and impossible combinations before any work starts"""
    if algo not in ALGORITHMS:
        raise GraphInputError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    if backend not in BACKENDS:
        raise GraphInputError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
    if ranks < 1:
        raise GraphInputError(f"rank count must be >= 1, got {ranks}")
    if algo == 'serial' and ranks != 1:
        raise GraphInputError("the serial algorithm runs on exactly one rank")
    if ranks > num_vertices:
        raise GraphInputError(f"{ranks} ranks exceed the {num_vertices} vertices of the graph")


def run_algorithm(g: Graph, cfg: SbpConfig, algo: str = 'serial', ranks: int = 1,
                  backend: str = 'inprocess', timeout: Optional[float] = None) -> PartitionResult:
    """
    Partition a graph

    Args:
        g: Graph
        cfg: Inference settings
        algo: 'serial', 'dcsbp' or 'edist'
        ranks: Number of logical ranks N
        backend: 'inprocess' (threads) or 'multiprocess' (local sockets)
        timeout: Collective timeout in seconds; defaults to cfg.collective_timeout

    Returns:
        Rank 0's PartitionResult, with wall seconds in timings['wall_seconds']
    """
    validate_run(algo, ranks, backend, g.num_vertices)
    timeout = cfg.collective_timeout if timeout is None else timeout
    started = time.perf_counter()

    if algo == 'serial':
        result = sbp(g, cfg)
        result.stats.setdefault('island_fraction', 0.0)
    else:
        entry = RANK_ENTRY_POINTS[algo]
        runner = run_inprocess if backend == 'inprocess' else run_multiprocess
        logger.info("[%s] Launching %d ranks on the %s backend", algo.upper(), ranks, backend)
        result = runner(ranks, entry, g, cfg, timeout=timeout)[0]

    result.timings['wall_seconds'] = time.perf_counter() - started
    return result
