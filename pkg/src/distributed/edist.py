"""
Exact distributed SBP.

Every rank holds the full graph and a replica of the blockmodel. Merge proposals are split
by community ownership (c mod N == rank), MCMC sweeps by a degree-balanced vertex schedule;
replicas are synchronized with all-gathers after every merge phase and every sweep.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..analysis.block_merge import apply_best_merges, evaluate_merges
from ..analysis.blockmodel import Blockmodel, checksum, first_difference, renumber
from ..analysis.mcmc import MCMCResult, hybrid_sweep, run_sweeps
from ..analysis.phases import BasePhases
from ..analysis.records import MoveRecord, PartitionResult, SweepStats
from ..analysis.rng import STREAM_MERGE, make_rng
from ..analysis.sbp import sbp
from ..data.graph import Graph
from ..data.sbp_config import SbpConfig
from ..errors import GraphInputError, InvalidOperationError, ProtocolError, ReplicaDivergenceError
from . import wire
from .base_communicator import BaseCommunicator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OwnershipSchedule:
    """Per-rank MCMC vertex sets; merge ownership is c mod N"""
    num_ranks: int
    vertex_sets: Tuple[Tuple[int, ...], ...]

    def vertices_of(self, rank: int) -> Tuple[int, ...]:
        return self.vertex_sets[rank]

    def communities_of(self, num_communities: int, rank: int) -> range:
        return range(rank, num_communities, self.num_ranks)


def degree_balanced_schedule(d_total: Sequence[int], num_ranks: int) -> OwnershipSchedule:
    """
    Deal degree-sorted vertices to ranks in a zigzag

    Position p of the (descending degree, ascending id) order goes to rank r iff
    p mod 2N is r or 2N-1-r. Each rank's set is returned in ascending vertex order.
    """
    if num_ranks < 1:
        raise GraphInputError(f"rank count must be >= 1, got {num_ranks}")
    order = sorted(range(len(d_total)), key=lambda v: (-d_total[v], v))
    sets: List[List[int]] = [[] for _ in range(num_ranks)]
    period = 2 * num_ranks
    for position, vertex in enumerate(order):
        slot = position % period
        rank = slot if slot < num_ranks else period - 1 - slot
        sets[rank].append(vertex)
    return OwnershipSchedule(num_ranks, tuple(tuple(sorted(s)) for s in sets))


@dataclass
class EdistStats:
    sync_points: int = 0
    verified_sync_points: int = 0
    moves_exchanged: int = 0
    proposals_exchanged: int = 0

    def to_dict(self, comm: BaseCommunicator) -> Dict[str, float]:
        return {
            'sync_points': self.sync_points,
            'verified_sync_points': self.verified_sync_points,
            'moves_exchanged': self.moves_exchanged,
            'proposals_exchanged': self.proposals_exchanged,
            'bytes_sent': comm.bytes_sent,
        }


def verify_replicas(b: Blockmodel, comm: BaseCommunicator, label: str) -> None:
    """
    Compare blockmodel checksums across ranks

    Raises:
        ReplicaDivergenceError naming the first cell where some rank differs from rank 0
    """
    digests = comm.allgather_variable(checksum(b).encode('ascii'))
    if all(d == digests[0] for d in digests):
        return

    gathered = comm.allgather_variable(wire.encode_cells(b.cells()))
    reference = wire.decode_cells(gathered[0])
    diverging = [r for r, d in enumerate(digests) if d != digests[0]]
    for rank in diverging:
        cell = first_difference(reference, wire.decode_cells(gathered[rank]))
        if cell is not None:
            i, j, expected, found = cell
            raise ReplicaDivergenceError(
                f"replicas diverge at {label}: B[{i}][{j}] is {expected} on rank 0 "
                f"but {found} on rank {rank}", cell=(i, j), ranks=diverging)
    raise ReplicaDivergenceError(f"replicas diverge at {label} (checksums differ)",
                                 ranks=diverging)


def distributed_block_merge(g: Graph, b: Blockmodel, schedule: OwnershipSchedule, cfg: SbpConfig,
                            comm: BaseCommunicator, target: int, phase_index: int = 0,
                            stats: Optional[EdistStats] = None) -> Blockmodel:
    """
    Merge phase with proposals split by community ownership

    Each rank proposes for the communities the schedule gives it (c mod N == rank), the proposals are all-gathered
    and every rank applies the same (ΔDL, community)-sorted greedy prefix.
    """
    C = b.num_communities
    if target < 1:
        raise InvalidOperationError(f"merge target must be >= 1, got {target}")
    if target >= C:
        raise InvalidOperationError(f"merge target {target} is not below the current count {C}")

    rng = make_rng(cfg.seed, STREAM_MERGE, rank=comm.rank, phase=phase_index)
    owned = schedule.communities_of(C, comm.rank)
    proposals = evaluate_merges(b, owned, cfg.merge_proposals_per_community, rng)

    gathered = comm.allgather_variable(wire.encode_merge_proposals(proposals))
    everyone = [p for payload in gathered for p in wire.decode_merge_proposals(payload)]
    if stats is not None:
        stats.sync_points += 1
        stats.proposals_exchanged += len(everyone)

    applied = apply_best_merges(b, everyone, target)
    renumber(b)
    logger.info("[EDIST] %s merge phase %d: %d merges, C %d -> %d", comm.log_prefix(),
                phase_index, applied, C, b.num_communities)
    if cfg.debug_checks:
        verify_replicas(b, comm, f"merge phase {phase_index}")
        if stats is not None:
            stats.verified_sync_points += 1
    return b


def exchange_moves(b: Blockmodel, local_moves: Sequence[MoveRecord],
                   comm: BaseCommunicator) -> int:
    """
    All-gather accepted moves and reconcile the replica

    Remote moves are applied to the assignment in ascending vertex order and the blockmodel
    is rebuilt from it. A single rank has nothing to reconcile.

    Returns:
        Total moves across all ranks
    """
    gathered = comm.allgather_variable(wire.encode_move_records(local_moves))
    records: List[Tuple[int, MoveRecord]] = []
    for rank, payload in enumerate(gathered):
        records.extend((rank, m) for m in wire.decode_move_records(payload))

    seen = set()
    for _rank, move in records:
        if move.vertex in seen:
            raise ProtocolError(f"vertex {move.vertex} moved by more than one rank in a sweep")
        seen.add(move.vertex)

    if comm.size > 1:
        remote = sorted((m for r, m in records if r != comm.rank), key=lambda m: m.vertex)
        for move in remote:
            if not (0 <= move.destination < b.num_slots):
                raise ProtocolError(f"move of vertex {move.vertex} to unknown community {move.destination}")
            b.assignment[move.vertex] = move.destination
        b.rebuild()
    return len(records)


def distributed_mcmc_phase(g: Graph, b: Blockmodel, schedule: OwnershipSchedule, cfg: SbpConfig,
                           comm: BaseCommunicator, threshold: Optional[float] = None,
                           phase_index: int = 0,
                           stats: Optional[EdistStats] = None) -> MCMCResult:
    """
    MCMC phase where each rank sweeps its owned vertices and replicas sync after every sweep

    The termination rule is evaluated on the reconciled blockmodel, so every rank stops
    after the same sweep.
    """
    if threshold is None:
        threshold = cfg.convergence_threshold
    sweep_stats = SweepStats()
    owned = schedule.vertices_of(comm.rank)

    def sweep(sweep_index: int) -> int:
        moves = hybrid_sweep(g, b, cfg, cfg.workers, vertices=owned, sweep_index=sweep_index,
                             phase_index=phase_index, rank=comm.rank, stats=sweep_stats)
        total = exchange_moves(b, moves, comm)
        if stats is not None:
            stats.sync_points += 1
            stats.moves_exchanged += total
        if cfg.debug_checks:
            verify_replicas(b, comm, f"phase {phase_index} sweep {sweep_index}")
            if stats is not None:
                stats.verified_sync_points += 1
        return total

    trace, sweeps = run_sweeps(b, threshold, cfg.mcmc_max_sweeps, sweep)
    logger.info("[EDIST] %s MCMC phase %d: %d sweeps, %d local moves", comm.log_prefix(),
                phase_index, sweeps, sweep_stats.accepted)
    return MCMCResult(b, trace, sweeps, sweep_stats)


class DistributedPhases(BasePhases):
    """Phase runner that plugs the distributed phases into the SBP driver"""

    def __init__(self, cfg: SbpConfig, comm: BaseCommunicator, schedule: OwnershipSchedule):
        super().__init__(cfg)
        self.comm = comm
        self.schedule = schedule
        self.stats = EdistStats()

    def block_merge(self, b: Blockmodel, target: int, phase_index: int) -> Blockmodel:
        return distributed_block_merge(b.graph, b, self.schedule, self.cfg, self.comm, target,
                                       phase_index, self.stats)

    def mcmc(self, b: Blockmodel, threshold: float, phase_index: int) -> MCMCResult:
        return distributed_mcmc_phase(b.graph, b, self.schedule, self.cfg, self.comm, threshold,
                                      phase_index, self.stats)

    def get_runner_name(self) -> str:
        return f"edist-{self.comm.size}"


def edist_run(g: Graph, cfg: SbpConfig, comm: BaseCommunicator) -> PartitionResult:
    """
    Full SBP with both phases distributed; every rank returns the same partition

    Args:
        g: Full graph (loaded on every rank)
        cfg: Inference settings
        comm: This rank's communicator

    Returns:
        PartitionResult (without the blockmodel object)
    """
    if comm.size > g.num_vertices:
        raise GraphInputError(f"cannot run {comm.size} ranks on {g.num_vertices} vertices")
    schedule = degree_balanced_schedule(g.d_total, comm.size)
    phases = DistributedPhases(cfg, comm, schedule)
    logger.info("[EDIST] %s owns %d vertices", comm.log_prefix(),
                len(schedule.vertices_of(comm.rank)))

    result = sbp(g, cfg, phases=phases)
    result = result.slim()
    result.stats.update(phases.stats.to_dict(comm))
    result.stats['island_fraction'] = 0.0
    return result
