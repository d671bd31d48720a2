"""
Divide-and-conquer SBP.

Each rank partitions its round-robin subgraph independently; rank 0 combines the partial
results pairwise down to a threshold, concatenates the rest and fine-tunes on the full graph.
"""

import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from ..analysis.blockmodel import apply_merge, build, delta_dl_merge, renumber
from ..analysis.phases import SerialPhases
from ..analysis.records import PartitionResult
from ..analysis.sbp import sbp
from ..data.graph import Graph, induced_subgraph, round_robin_part
from ..data.sbp_config import SbpConfig
from ..errors import GraphInputError, ProtocolError
from . import wire
from .base_communicator import BaseCommunicator

logger = logging.getLogger(__name__)


@dataclass
class PartialResult:
    """One subgraph's partition; assignment[i] is the community of global vertex vertex_map[i]"""
    rank: int
    vertex_map: Tuple[int, ...]
    assignment: List[int]
    num_communities: int
    island_count: int = 0

    def __post_init__(self):
        if len(self.vertex_map) != len(self.assignment):
            raise GraphInputError(
                f"partial from rank {self.rank} covers {len(self.vertex_map)} vertices "
                f"but assigns {len(self.assignment)}")


def encode_partial(partial: PartialResult) -> bytes:
    header = [partial.rank, partial.num_communities, partial.island_count]
    return wire.encode_int_sequences(header, partial.vertex_map, partial.assignment)


def decode_partial(payload: bytes) -> PartialResult:
    header, vertex_map, assignment = wire.decode_int_sequences(payload, 3)
    if len(header) != 3:
        raise ProtocolError(f"partial result header has {len(header)} fields")
    rank, num_communities, island_count = header
    return PartialResult(rank, tuple(vertex_map), assignment, num_communities, island_count)


def combine_pair(pa: PartialResult, pb: PartialResult, g: Graph) -> PartialResult:
    """
    Fold pb's communities into pa's on the union subgraph (cross edges included)

    Each pb community, in ascending id order, merges into the pa community with the lowest
    ΔDL at that moment (ties go to the lower id). The result keeps pa's labels.
    """
    if set(pa.vertex_map) & set(pb.vertex_map):
        raise GraphInputError(f"partials of ranks {pa.rank} and {pb.rank} overlap")

    labels: Dict[int, int] = {}
    for vertex, community in zip(pa.vertex_map, pa.assignment):
        labels[vertex] = community
    for vertex, community in zip(pb.vertex_map, pb.assignment):
        labels[vertex] = pa.num_communities + community

    union = induced_subgraph(g, list(pa.vertex_map) + list(pb.vertex_map), owner_rank=pa.rank)
    b = build(union.graph, [labels[v] for v in union.vertex_map],
              pa.num_communities + pb.num_communities)

    pa_communities = range(pa.num_communities)
    for community in range(pa.num_communities, pa.num_communities + pb.num_communities):
        if b.sizes[community] == 0:
            continue
        target = min(pa_communities, key=lambda p: (delta_dl_merge(b, community, p), p))
        apply_merge(b, community, target)
    renumber(b)

    return PartialResult(pa.rank, union.vertex_map, list(b.assignment), b.num_communities,
                         pa.island_count + pb.island_count)


def combine_partials(partials: Sequence[PartialResult], g: Graph,
                     threshold: int) -> Tuple[List[PartialResult], int]:
    """
    Combine successive pairs in rounds until at most `threshold` partials remain

    Returns:
        (remaining partials, number of pairwise combines)
    """
    remaining = list(partials)
    combines = 0
    while len(remaining) > threshold:
        pairs = min(len(remaining) - threshold, len(remaining) // 2)
        merged = [combine_pair(remaining[2 * k], remaining[2 * k + 1], g) for k in range(pairs)]
        combines += pairs
        remaining = merged + remaining[2 * pairs:]
        logger.info("[DCSBP] Combine round: %d pairs, %d partials left", pairs, len(remaining))
    return remaining, combines


def assemble(num_vertices: int, partials: Sequence[PartialResult]) -> List[int]:
    """Full-graph assignment with each partial's labels shifted into a disjoint range"""
    assignment = [-1] * num_vertices
    offset = 0
    for partial in partials:
        for vertex, community in zip(partial.vertex_map, partial.assignment):
            assignment[vertex] = offset + community
        offset += partial.num_communities
    missing = [v for v, c in enumerate(assignment) if c < 0]
    if missing:
        raise GraphInputError(f"{len(missing)} vertices missing from the partial results")
    return assignment


def _encode_outcome(result: PartitionResult, combines: int, islands: float) -> bytes:
    return (wire.encode_int_sequences(result.assignment, [result.num_communities, combines])
            + wire.encode_floats([result.description_length, islands]))


def _decode_outcome(payload: bytes) -> Tuple[List[int], int, int, float, float]:
    floats_at = len(payload) - (8 + 2 * 8)
    assignment, (num_communities, combines) = wire.decode_int_sequences(payload[:floats_at], 2)
    (dl, islands), _ = wire.decode_floats(payload, floats_at)
    return assignment, num_communities, combines, dl, islands


def dcsbp_run(g: Graph, cfg: SbpConfig, comm: BaseCommunicator) -> PartitionResult:
    """
    Divide-and-conquer SBP over comm.size ranks; every rank returns the final partition

    With a single rank this is exactly the serial run.
    """
    started = time.perf_counter()
    sub = round_robin_part(g, comm.size, comm.rank)
    local = sbp(sub.graph, cfg, phases=SerialPhases(cfg, rank=comm.rank))
    local_seconds = time.perf_counter() - started
    logger.info("[DCSBP] %s subgraph V=%d E=%d islands=%d -> C=%d (%.2fs)", comm.log_prefix(),
                sub.graph.num_vertices, sub.graph.num_edges, sub.island_count(),
                local.num_communities, local_seconds)

    if comm.size == 1:
        result = local.slim()
        result.stats.update({'island_fraction': 0.0, 'combines': 0})
        return result

    partial = PartialResult(comm.rank, sub.vertex_map, local.assignment, local.num_communities,
                            sub.island_count())
    payload = b''
    trace = []
    timings = {'local_seconds': local_seconds}
    if comm.is_root:
        received = comm.receive_at_root(patient=True)
        partials = [partial] + [decode_partial(received[r]) for r in sorted(received)]
        remaining, combines = combine_partials(partials, g, cfg.combine_threshold)
        assignment = assemble(g.num_vertices, remaining)
        islands = sum(p.island_count for p in partials) / g.num_vertices

        tune_started = time.perf_counter()
        tuned = sbp(g, cfg, initial_assignment=assignment,
                    phases=SerialPhases(cfg, rank=0, continuation=True))
        timings['fine_tune_seconds'] = time.perf_counter() - tune_started
        trace = tuned.trace
        logger.info("[DCSBP] Root: %d combines, fine-tune C=%d DL=%.3f", combines,
                    tuned.num_communities, tuned.description_length)
        payload = _encode_outcome(tuned, combines, islands)
    else:
        comm.send_to_root(encode_partial(partial))

    outcome = comm.broadcast_from_root(payload, patient=True)
    assignment, num_communities, combines, dl, islands = _decode_outcome(outcome)
    timings['total_seconds'] = time.perf_counter() - started
    return PartitionResult(assignment, dl, num_communities, trace, timings,
                           {'island_fraction': islands, 'combines': combines,
                            'local_communities': local.num_communities})
