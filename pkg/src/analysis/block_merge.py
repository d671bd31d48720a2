"""
Block merge phase: agglomerative community merging by greedy ΔDL.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional

import numpy as np

from ..data.graph import Graph
from ..data.sbp_config import SbpConfig
from ..errors import InvalidOperationError
from .blockmodel import Blockmodel, apply_merge, delta_dl_merge, renumber
from .proposals import propose_target
from .records import MergeProposal
from .rng import STREAM_MERGE, make_rng

logger = logging.getLogger(__name__)


def community_neighbor_counts(b: Blockmodel, community: int) -> Dict[int, int]:
    """community t -> B[c][t] + B[t][c] (the diagonal counted from both sides)"""
    counts = dict(b.M[community])
    for t, count in b.M_T[community].items():
        counts[t] = counts.get(t, 0) + count
    return counts


def best_merge_for(b: Blockmodel, community: int, num_proposals: int,
                   rng: np.random.Generator) -> Optional[MergeProposal]:
    """Best of `num_proposals` proposed merges for one community, by ΔDL"""
    if b.num_communities < 2:
        return None
    counts = community_neighbor_counts(b, community)
    degree = b.degree_total(community)

    evaluated: Dict[int, float] = {}
    best = None
    for _ in range(num_proposals):
        target, _probability = propose_target(b, counts, degree, community, rng)
        delta = evaluated.get(target)
        if delta is None:
            delta = delta_dl_merge(b, community, target)
            evaluated[target] = delta
        if best is None or delta < best.delta_dl:
            best = MergeProposal(community, target, delta)
    return best


def evaluate_merges(b: Blockmodel, communities: Iterable[int], num_proposals: int,
                    rng: np.random.Generator) -> List[MergeProposal]:
    """Best proposal for each listed community, all against the same (unmodified) blockmodel"""
    proposals = []
    for community in communities:
        proposal = best_merge_for(b, community, num_proposals, rng)
        if proposal is not None:
            proposals.append(proposal)
    return proposals


def apply_best_merges(b: Blockmodel, proposals: Iterable[MergeProposal], target_count: int) -> int:
    """
    Apply merges in (ΔDL, community) order until `target_count` communities remain

    Endpoints are resolved through the merge-forwarding chain; a proposal whose two ends
    already share a root is skipped.

    Returns:
        Number of merges applied
    """
    applied = 0
    for proposal in sorted(proposals, key=lambda p: (p.delta_dl, p.community)):
        if b.num_communities <= target_count:
            break
        source = b.find(proposal.community)
        target = b.find(proposal.target)
        if source == target:
            continue
        apply_merge(b, source, target)
        applied += 1

    if b.num_communities > target_count:
        logger.warning("[MERGE] Proposals exhausted at C=%d (target %d)",
                       b.num_communities, target_count)
    return applied


def default_target(num_communities: int, rate: float = 0.5) -> int:
    return max(1, int(math.floor(num_communities * rate)))


def block_merge_phase(g: Graph, b: Blockmodel, cfg: SbpConfig, target: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None,
                      phase_index: int = 0) -> Blockmodel:
    """
    One agglomerative merge phase

    Args:
        g: Graph the blockmodel was built on
        b: Blockmodel with dense community ids (renumbered)
        cfg: Inference settings (merge_proposals_per_community)
        target: Community count to reach; defaults to half the current count
        rng: Random stream; defaults to the serial merge stream for `phase_index`
        phase_index: Phase counter used to key the default stream

    Returns:
        The same blockmodel, merged down and renumbered
    """
    C = b.num_communities
    if target is None:
        target = default_target(C)
    if target < 1:
        raise InvalidOperationError(f"merge target must be >= 1, got {target}")
    if target >= C:
        raise InvalidOperationError(f"merge target {target} is not below the current count {C}")
    if rng is None:
        rng = make_rng(cfg.seed, STREAM_MERGE, rank=0, phase=phase_index)

    proposals = evaluate_merges(b, range(C), cfg.merge_proposals_per_community, rng)
    applied = apply_best_merges(b, proposals, target)
    renumber(b)
    logger.info("[MERGE] Phase %d: %d merges, C %d -> %d", phase_index, applied, C,
                b.num_communities)
    return b
