"""
Records exchanged between inference phases and ranks.
"""

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple


class MergeProposal(NamedTuple):
    """Best merge found for one community"""
    community: int
    target: int
    delta_dl: float


class MoveRecord(NamedTuple):
    """Accepted vertex move; the origin is read from the synchronized assignment"""
    vertex: int
    destination: int


@dataclass
class SweepStats:
    proposals: int = 0
    accepted: int = 0
    numeric_warnings: int = 0

    def absorb(self, other: 'SweepStats') -> None:
        self.proposals += other.proposals
        self.accepted += other.accepted
        self.numeric_warnings += other.numeric_warnings


@dataclass
class PhaseRecord:
    """One row of the per-phase trace"""
    phase: int
    kind: str
    communities: int
    dl: float
    accepted_moves: int = 0
    sweeps: int = 0
    seconds: float = 0.0

    def to_dict(self) -> Dict:
        return {
            'phase': self.phase,
            'kind': self.kind,
            'communities': self.communities,
            'dl': self.dl,
            'accepted_moves': self.accepted_moves,
            'sweeps': self.sweeps,
            'seconds': self.seconds,
        }


@dataclass
class PartitionResult:
    """Final partition returned by every algorithm (serial, EDiSt, DC-SBP)"""
    assignment: List[int]
    description_length: float
    num_communities: int
    trace: List[PhaseRecord] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    stats: Dict[str, float] = field(default_factory=dict)
    # set by the serial driver only; never shipped between processes
    blockmodel: Optional[object] = field(default=None, repr=False, compare=False)

    def slim(self) -> 'PartitionResult':
        return PartitionResult(self.assignment, self.description_length, self.num_communities,
                               list(self.trace), dict(self.timings), dict(self.stats))


def phase_seconds(trace: List[PhaseRecord]) -> Tuple[float, float]:
    """(merge seconds, MCMC seconds) summed over a trace"""
    merge = sum(r.seconds for r in trace if r.kind == 'merge')
    mcmc = sum(r.seconds for r in trace if r.kind == 'mcmc')
    return merge, mcmc
