"""
Proposal distribution and Metropolis-Hastings acceptance.

A proposal picks a random incident edge of the source, looks at the community t of the
far endpoint, and then either proposes a uniformly random other community (probability
C/(d_total[t]+C)) or a community s drawn in proportion to B[t][s] + B[s][t].
"""

import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np

from .blockmodel import Blockmodel, DeltaEntries
from .records import SweepStats

logger = logging.getLogger(__name__)


class BlockmodelView:
    """Read-only view of a blockmodel with pending entries overlaid"""

    __slots__ = ('b', 'delta')

    def __init__(self, b: Blockmodel, delta: Optional[DeltaEntries] = None):
        self.b = b
        self.delta = delta

    @property
    def num_communities(self) -> int:
        return self.b.num_communities

    def cell(self, row: int, col: int) -> int:
        value = self.b.M[row].get(col, 0)
        if self.delta is not None:
            value += self.delta.cells.get((row, col), 0)
        return value

    def degree_total(self, community: int) -> int:
        total = self.b.d_out[community] + self.b.d_in[community]
        if self.delta is not None:
            total += self.delta.out_degrees.get(community, 0)
            total += self.delta.in_degrees.get(community, 0)
        return total


def _uniform_other(num_communities: int, current: int, rng: np.random.Generator) -> int:
    choice = int(rng.integers(num_communities - 1))
    return choice + 1 if choice >= current else choice


def _pick_weighted(counts: Dict[int, int], total: int, rng: np.random.Generator) -> int:
    """Key drawn with probability count / total (dict order fixes the mapping)"""
    threshold = rng.random() * total
    running = 0
    last = None
    for key, count in counts.items():
        running += count
        last = key
        if threshold < running:
            return key
    return last


def _neighbor_weight_excluding(b: Blockmodel, t: int, current: int) -> int:
    """W_t = d_total[t] − B[t][current] − B[current][t]"""
    return b.degree_total(t) - b.M[t].get(current, 0) - b.M_T[t].get(current, 0)


def _pick_neighbor_community(b: Blockmodel, t: int, current: int, weight: int,
                             rng: np.random.Generator) -> int:
    """s != current with probability (B[t][s] + B[s][t]) / W_t"""
    threshold = rng.random() * weight
    running = 0
    last = None
    for s, count in b.M[t].items():
        if s == current:
            continue
        running += count
        last = s
        if threshold < running:
            return s
    for s, count in b.M_T[t].items():
        if s == current:
            continue
        running += count
        last = s
        if threshold < running:
            return s
    return last


def propose_target(b: Blockmodel, neighbor_counts: Dict[int, int], degree: int,
                   current: int, rng: np.random.Generator) -> Tuple[int, float]:
    """
    Propose a community other than `current`

    Args:
        b: Blockmodel with all slots live (ids 0..C-1)
        neighbor_counts: community -> number of incident edge endpoints in it
            (for a merge: community -> B[c][t] + B[t][c], with the diagonal doubled)
        degree: Σ neighbor_counts; 0 selects the uniform fallback
        current: The source's own community
        rng: Random stream

    Returns:
        (candidate community, exact forward probability)
    """
    C = b.num_communities
    if C < 2:
        raise ValueError("proposals need at least two communities")

    if degree <= 0:
        return _uniform_other(C, current, rng), 1.0 / (C - 1)

    t = _pick_weighted(neighbor_counts, degree, rng)
    d_t = b.degree_total(t)
    if rng.random() < C / (d_t + C):
        candidate = _uniform_other(C, current, rng)
    else:
        weight = _neighbor_weight_excluding(b, t, current)
        if weight <= 0:
            candidate = _uniform_other(C, current, rng)
        else:
            candidate = _pick_neighbor_community(b, t, current, weight, rng)

    return candidate, proposal_probability(BlockmodelView(b), neighbor_counts, degree,
                                           current, candidate)


def proposal_probability(view: BlockmodelView, neighbor_counts: Dict[int, int], degree: int,
                         current: int, candidate: int) -> float:
    """Exact probability that propose_target returns `candidate` from `current`"""
    C = view.num_communities
    uniform = 1.0 / (C - 1)
    if degree <= 0:
        return uniform

    probability = 0.0
    for t, count in neighbor_counts.items():
        d_t = view.degree_total(t)
        random_share = C / (d_t + C)
        weight = d_t - view.cell(t, current) - view.cell(current, t)
        if weight > 0:
            structured = (view.cell(t, candidate) + view.cell(candidate, t)) / weight
        else:
            structured = uniform
        probability += (count / degree) * (random_share * uniform + (1.0 - random_share) * structured)
    return probability


def accept_move(delta_dl: float, p_forward: float, p_backward: float, beta: float,
                rng: np.random.Generator, stats: Optional[SweepStats] = None) -> bool:
    """
    Metropolis-Hastings test: accept iff u < min(1, exp(−β·ΔDL)·p_backward/p_forward)

    A uniform u is always drawn first so the stream position does not depend on the outcome.
    Non-finite ΔDL is rejected and counted on `stats`.
    """
    u = rng.random()
    if not math.isfinite(delta_dl) or p_forward <= 0:
        logger.warning("[MCMC] Rejecting move with non-finite ΔDL=%r (p_forward=%r)",
                       delta_dl, p_forward)
        if stats is not None:
            stats.numeric_warnings += 1
        return False
    if p_backward <= 0:
        return False

    log_ratio = -beta * delta_dl + math.log(p_backward) - math.log(p_forward)
    if log_ratio >= 0:
        return True
    return u < math.exp(log_ratio)
