"""
Phase runners for the SBP driver.
Provides the interface the golden-ratio search uses to run merge and MCMC phases.
"""

from abc import ABC, abstractmethod

from ..data.sbp_config import SbpConfig
from .block_merge import block_merge_phase
from .blockmodel import Blockmodel
from .mcmc import MCMCResult, mcmc_phase
from .rng import STREAM_FINE_TUNE_MCMC, STREAM_FINE_TUNE_MERGE, STREAM_MCMC, STREAM_MERGE, make_rng


class BasePhases(ABC):
    """Abstract base class for phase runners"""

    def __init__(self, cfg: SbpConfig):
        """
        Initialize runner with inference settings

        Args:
            cfg: Validated inference settings
        """
        self.cfg = cfg

    @abstractmethod
    def block_merge(self, b: Blockmodel, target: int, phase_index: int) -> Blockmodel:
        """
        Merge communities down to `target`

        Args:
            b: Blockmodel with dense ids
            target: Community count to reach
            phase_index: Monotone phase counter

        Returns:
            Renumbered blockmodel
        """
        pass

    @abstractmethod
    def mcmc(self, b: Blockmodel, threshold: float, phase_index: int) -> MCMCResult:
        """Refine the assignment until convergence or the sweep limit"""
        pass

    @abstractmethod
    def get_runner_name(self) -> str:
        """Return the name of this runner"""
        pass


class SerialPhases(BasePhases):
    """Single-process phases; rank keys the random streams so DC-SBP subgraphs differ"""

    def __init__(self, cfg: SbpConfig, rank: int = 0, continuation: bool = False):
        super().__init__(cfg)
        self.rank = rank
        self.continuation = continuation
        self.merge_stream = STREAM_FINE_TUNE_MERGE if continuation else STREAM_MERGE
        self.mcmc_stream = STREAM_FINE_TUNE_MCMC if continuation else STREAM_MCMC

    def block_merge(self, b: Blockmodel, target: int, phase_index: int) -> Blockmodel:
        rng = make_rng(self.cfg.seed, self.merge_stream, rank=self.rank, phase=phase_index)
        return block_merge_phase(b.graph, b, self.cfg, target=target, rng=rng,
                                 phase_index=phase_index)

    def mcmc(self, b: Blockmodel, threshold: float, phase_index: int) -> MCMCResult:
        return mcmc_phase(b.graph, b, self.cfg, threshold=threshold, phase_index=phase_index,
                          rank=self.rank, stream=self.mcmc_stream)

    def get_runner_name(self) -> str:
        return 'serial-continuation' if self.continuation else 'serial'
