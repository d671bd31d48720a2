"""
Stochastic block partitioning driver.
Alternates block merge and MCMC phases under a golden-ratio search over the community count.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..data.config import GOLDEN_RATIO
from ..data.graph import Graph
from ..data.sbp_config import SbpConfig
from ..errors import GraphInputError
from .blockmodel import Blockmodel, build, description_length, renumber, singleton
from .phases import BasePhases, SerialPhases
from .records import PartitionResult, PhaseRecord, SweepStats

logger = logging.getLogger(__name__)


@dataclass
class BracketEntry:
    count: int
    dl: float
    snapshot: Blockmodel


class GoldenBracket:
    """
    Up to three snapshots ordered by decreasing community count: the minimum-DL snapshot
    and its nearest evaluated neighbors above and below.
    """

    def __init__(self):
        self.entries: List[BracketEntry] = []

    def insert(self, count: int, dl: float, b: Blockmodel) -> None:
        for i, entry in enumerate(self.entries):
            if entry.count == count:
                if dl < entry.dl:
                    self.entries[i] = BracketEntry(count, dl, b.copy())
                break
        else:
            self.entries.append(BracketEntry(count, dl, b.copy()))
            self.entries.sort(key=lambda e: -e.count)

        best = self._best_index()
        self.entries = self.entries[max(0, best - 1):best + 2]

    def _best_index(self) -> int:
        return min(range(len(self.entries)), key=lambda i: (self.entries[i].dl, self.entries[i].count))

    @property
    def best(self) -> BracketEntry:
        return self.entries[self._best_index()]

    @property
    def established(self) -> bool:
        """The best snapshot has evaluated neighbors on both sides"""
        best = self._best_index()
        return 0 < best < len(self.entries) - 1

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(e.count for e in self.entries)

    def next_step(self, reduction_rate: float) -> Optional[Tuple[Blockmodel, int]]:
        """
        Where to search next

        Returns:
            (copy of the snapshot to start from, target community count), or None when done
        """
        if not self.entries:
            return None
        i = self._best_index()
        best = self.entries[i]
        higher = self.entries[i - 1] if i > 0 else None
        lower = self.entries[i + 1] if i + 1 < len(self.entries) else None

        if lower is None:
            if best.count <= 1:
                return None
            target = min(best.count - 1, max(1, int(math.floor(best.count * reduction_rate))))
            return best.snapshot.copy(), target

        if higher is None:
            if best.count - lower.count <= 1:
                return None
            return self._golden_point(best, lower)

        if higher.count - lower.count <= 2:
            return None
        if higher.count - best.count >= best.count - lower.count:
            return self._golden_point(higher, best)
        return self._golden_point(best, lower)

    @staticmethod
    def _golden_point(upper: BracketEntry, lower: BracketEntry) -> Tuple[Blockmodel, int]:
        span = upper.count - lower.count
        target = lower.count + int(math.floor(span * GOLDEN_RATIO + 0.5))
        target = min(upper.count - 1, max(lower.count + 1, target))
        return upper.snapshot.copy(), target


def _iteration_limit(num_vertices: int) -> int:
    return 8 * (int(math.log2(max(num_vertices, 2))) + 8)


def sbp(g: Graph, cfg: SbpConfig, initial_assignment: Optional[Sequence[int]] = None,
        phases: Optional[BasePhases] = None) -> PartitionResult:
    """
    Run stochastic block partitioning

    Args:
        g: Graph
        cfg: Inference settings
        initial_assignment: Start from this partition instead of singletons
        phases: Phase runner (serial by default; EDiSt passes its distributed runner)

    Returns:
        PartitionResult of the minimum-DL snapshot, renumbered
    """
    if g.num_vertices == 0:
        raise GraphInputError("graph has no vertices")
    if phases is None:
        phases = SerialPhases(cfg)

    started = time.perf_counter()
    trace: List[PhaseRecord] = []
    timings = {'merge_seconds': 0.0, 'mcmc_seconds': 0.0}
    totals = SweepStats()
    phase_index = 0

    if initial_assignment is None:
        b = singleton(g)
    else:
        b = build(g, initial_assignment)
        renumber(b)
        mcmc_started = time.perf_counter()
        outcome = phases.mcmc(b, cfg.early_convergence_threshold, phase_index)
        renumber(b)
        seconds = time.perf_counter() - mcmc_started
        timings['mcmc_seconds'] += seconds
        totals.absorb(outcome.stats)
        trace.append(PhaseRecord(phase_index, 'mcmc', b.num_communities, description_length(b),
                                 outcome.stats.accepted, outcome.sweeps, seconds))

    bracket = GoldenBracket()
    bracket.insert(b.num_communities, description_length(b), b)
    logger.info("[GOLDEN] Start (%s): C=%d DL=%.3f", phases.get_runner_name(),
                b.num_communities, bracket.best.dl)

    limit = _iteration_limit(g.num_vertices)
    while True:
        step = bracket.next_step(cfg.community_reduction_rate)
        if step is None:
            break
        if phase_index >= limit:
            logger.warning("[GOLDEN] Stopping after %d phases with bracket %s", phase_index,
                           bracket.counts)
            break
        b, target = step
        phase_index += 1
        established = bracket.established

        merge_started = time.perf_counter()
        b = phases.block_merge(b, target, phase_index)
        seconds = time.perf_counter() - merge_started
        timings['merge_seconds'] += seconds
        trace.append(PhaseRecord(phase_index, 'merge', b.num_communities, description_length(b),
                                 0, 0, seconds))

        threshold = cfg.convergence_threshold if established else cfg.early_convergence_threshold
        mcmc_started = time.perf_counter()
        outcome = phases.mcmc(b, threshold, phase_index)
        renumber(b)
        seconds = time.perf_counter() - mcmc_started
        timings['mcmc_seconds'] += seconds
        totals.absorb(outcome.stats)

        dl = description_length(b)
        trace.append(PhaseRecord(phase_index, 'mcmc', b.num_communities, dl,
                                 outcome.stats.accepted, outcome.sweeps, seconds))
        bracket.insert(b.num_communities, dl, b)
        logger.info("[GOLDEN] Phase %d: target %d -> C=%d DL=%.3f bracket=%s", phase_index,
                    target, b.num_communities, dl, bracket.counts)

    best = bracket.best
    result_model = best.snapshot
    renumber(result_model)
    timings['total_seconds'] = time.perf_counter() - started
    stats = {
        'phases': phase_index,
        'proposals': totals.proposals,
        'accepted_moves': totals.accepted,
        'numeric_warnings': totals.numeric_warnings,
    }
    logger.info("[GOLDEN] Done: C=%d DL=%.3f after %d phases", best.count, best.dl, phase_index)
    return PartitionResult(list(result_model.assignment), best.dl, result_model.num_communities,
                           trace, timings, stats, blockmodel=result_model)
