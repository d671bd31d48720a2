"""
MCMC phase: Metropolis-Hastings vertex moves, sequential and hybrid sweeps.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..data.graph import Graph
from ..data.sbp_config import SbpConfig
from .blockmodel import (Blockmodel, VertexContext, apply_move, description_length,
                         move_delta, vertex_context)
from .proposals import BlockmodelView, accept_move, proposal_probability, propose_target
from .records import MoveRecord, SweepStats
from .rng import STREAM_MCMC, make_rng

logger = logging.getLogger(__name__)

# Smoothing weight of the newest sweep's improvement
IMPROVEMENT_SMOOTHING = 0.5


@dataclass
class MCMCResult:
    blockmodel: Blockmodel
    dl_trace: List[float] = field(default_factory=list)
    sweeps: int = 0
    stats: SweepStats = field(default_factory=SweepStats)


def evaluate_vertex(b: Blockmodel, vertex: int, beta: float, rng: np.random.Generator,
                    stats: SweepStats) -> Optional[Tuple[int, VertexContext, object]]:
    """
    Propose and test one move for `vertex` without applying it

    Returns:
        (destination, context, entries) if accepted, else None
    """
    C = b.num_communities
    if C < 2:
        return None

    current = b.assignment[vertex]
    context = vertex_context(b, vertex)
    degree = context.degree
    counts = context.neighbor_counts(current)

    candidate, p_forward = propose_target(b, counts, degree, current, rng)
    delta_dl, entries = move_delta(b, vertex, current, candidate, context)
    p_backward = proposal_probability(BlockmodelView(b, entries),
                                      context.neighbor_counts(candidate), degree,
                                      candidate, current)
    stats.proposals += 1
    if accept_move(delta_dl, p_forward, p_backward, beta, rng, stats):
        return candidate, context, entries
    return None


def sequential_sweep(b: Blockmodel, vertices: Sequence[int], beta: float,
                     rng: np.random.Generator, stats: SweepStats) -> List[MoveRecord]:
    """Visit vertices in the given order, applying each accepted move immediately"""
    moves = []
    for vertex in vertices:
        outcome = evaluate_vertex(b, vertex, beta, rng, stats)
        if outcome is not None:
            destination, context, entries = outcome
            apply_move(b, vertex, destination, context, entries)
            stats.accepted += 1
            moves.append(MoveRecord(vertex, destination))
    return moves


def split_by_degree(g: Graph, vertices: Sequence[int], fraction: float) -> Tuple[List[int], List[int]]:
    """(high-degree vertices, remainder), each in ascending vertex order"""
    ranked = sorted(vertices, key=lambda v: (-g.d_total[v], v))
    cut = int(math.ceil(fraction * len(ranked)))
    return sorted(ranked[:cut]), sorted(ranked[cut:])


def _evaluate_chunk(b: Blockmodel, chunk: Sequence[int], beta: float,
                    rng: np.random.Generator) -> Tuple[List[MoveRecord], SweepStats]:
    stats = SweepStats()
    accepted = []
    for vertex in chunk:
        outcome = evaluate_vertex(b, vertex, beta, rng, stats)
        if outcome is not None:
            accepted.append(MoveRecord(vertex, outcome[0]))
    return accepted, stats


def hybrid_sweep(g: Graph, b: Blockmodel, cfg: SbpConfig, worker_count: int,
                 vertices: Optional[Sequence[int]] = None, sweep_index: int = 0,
                 phase_index: int = 0, rank: int = 0,
                 stats: Optional[SweepStats] = None,
                 stream: int = STREAM_MCMC) -> List[MoveRecord]:
    """
    One sweep: high-degree vertices sequentially, the rest evaluated concurrently

    Workers read a frozen blockmodel and only propose; accepted moves are applied afterwards
    by this thread in ascending vertex order with freshly computed contexts. With one worker
    (or fraction 1.0) this is exactly the sequential sweep.

    Returns:
        Moves actually applied during the sweep
    """
    if worker_count < 1:
        raise ValueError(f"worker_count must be >= 1, got {worker_count}")
    if vertices is None:
        vertices = range(g.num_vertices)
    if stats is None:
        stats = SweepStats()

    seed = cfg.seed
    sequential_rng = make_rng(seed, stream, rank=rank, phase=phase_index,
                              worker=0, sweep=sweep_index)
    if worker_count == 1 or cfg.hybrid_high_degree_fraction >= 1.0:
        return sequential_sweep(b, sorted(vertices), cfg.beta, sequential_rng, stats)

    high, low = split_by_degree(g, vertices, cfg.hybrid_high_degree_fraction)
    moves = sequential_sweep(b, high, cfg.beta, sequential_rng, stats)

    chunks = [low[worker::worker_count] for worker in range(worker_count)]
    rngs = [make_rng(seed, stream, rank=rank, phase=phase_index, worker=worker + 1,
                     sweep=sweep_index) for worker in range(worker_count)]
    with ThreadPoolExecutor(max_workers=worker_count) as pool:
        results = list(pool.map(lambda args: _evaluate_chunk(b, args[0], cfg.beta, args[1]),
                                zip(chunks, rngs)))

    proposed = []
    for accepted, worker_stats in results:
        proposed.extend(accepted)
        worker_stats.accepted = 0
        stats.absorb(worker_stats)

    for vertex, destination in sorted(proposed):
        if b.assignment[vertex] == destination:
            continue
        apply_move(b, vertex, destination)
        stats.accepted += 1
        moves.append(MoveRecord(vertex, destination))
    return moves


def run_sweeps(b: Blockmodel, threshold: float, max_sweeps: int,
               sweep_fn: Callable[[int], int]) -> Tuple[List[float], int]:
    """
    Repeat sweeps until the smoothed DL improvement falls to threshold·|DL|

    Args:
        b: Blockmodel the sweeps mutate (DL is read from it after each sweep)
        threshold: Relative improvement threshold t
        max_sweeps: Upper bound on sweeps
        sweep_fn: Runs sweep number i and returns its accepted move count

    Returns:
        (DL after each sweep, sweeps executed)
    """
    dl_before = description_length(b)
    trace = []
    smoothed = None
    for sweep_index in range(max_sweeps):
        sweep_fn(sweep_index)
        dl_after = description_length(b)
        trace.append(dl_after)

        improvement = abs(dl_before - dl_after)
        if smoothed is None:
            smoothed = improvement
        else:
            smoothed = IMPROVEMENT_SMOOTHING * improvement + (1 - IMPROVEMENT_SMOOTHING) * smoothed
        if smoothed <= threshold * abs(dl_before):
            return trace, sweep_index + 1
        dl_before = dl_after
    return trace, max_sweeps


def mcmc_phase(g: Graph, b: Blockmodel, cfg: SbpConfig, threshold: Optional[float] = None,
               phase_index: int = 0, rank: int = 0,
               vertices: Optional[Sequence[int]] = None,
               stream: int = STREAM_MCMC) -> MCMCResult:
    """
    Metropolis-Hastings refinement of the vertex assignment

    Args:
        g: Graph
        b: Blockmodel (mutated in place)
        cfg: Inference settings
        threshold: Convergence threshold t; defaults to cfg.convergence_threshold
        phase_index: Phase counter keying the random streams
        rank: Rank keying the random streams (0 for serial runs)
        vertices: Vertices to sweep; defaults to all

    Returns:
        MCMCResult with the per-sweep DL trace
    """
    if threshold is None:
        threshold = cfg.convergence_threshold
    stats = SweepStats()
    started = time.perf_counter()

    def sweep(sweep_index: int) -> int:
        before = stats.accepted
        hybrid_sweep(g, b, cfg, cfg.workers, vertices=vertices, sweep_index=sweep_index,
                     phase_index=phase_index, rank=rank, stats=stats, stream=stream)
        return stats.accepted - before

    trace, sweeps = run_sweeps(b, threshold, cfg.mcmc_max_sweeps, sweep)
    logger.info("[MCMC] Phase %d: %d sweeps, %d/%d moves accepted, DL %.3f (%.2fs)",
                phase_index, sweeps, stats.accepted, stats.proposals,
                trace[-1] if trace else float('nan'), time.perf_counter() - started)
    return MCMCResult(b, trace, sweeps, stats)
