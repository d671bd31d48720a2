"""
Base communicator class for distributed SBP runs.
Provides the abstract collective-exchange interface shared by all backends.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List

logger = logging.getLogger(__name__)


class BaseCommunicator(ABC):
    """
    Abstract base class for rank communicators

    Every collective must be entered by all ranks the same number of times and in the
    same order. Waits fail after the collective timeout unless the call is `patient`: a
    patient wait ends only when the partners arrive or the run is torn down, for ranks that
    idle while the root works alone.
    """

    def __init__(self, rank: int, size: int):
        """
        Initialize communicator

        Args:
            rank: This rank's id in [0, size)
            size: Number of ranks N
        """
        if size < 1 or not (0 <= rank < size):
            raise ValueError(f"invalid rank {rank} for world size {size}")
        self.rank = rank
        self.size = size
        self.bytes_sent = 0
        self.collectives = 0

    @property
    def is_root(self) -> bool:
        return self.rank == 0

    @abstractmethod
    def allgather_variable(self, payload: bytes, patient: bool = False) -> List[bytes]:
        """
        Exchange one byte string per rank

        Args:
            payload: This rank's contribution (any length, may be empty)
            patient: Wait for the other ranks without the collective timeout

        Returns:
            Rank-ordered list of all payloads, identical on every rank
        """
        pass

    @abstractmethod
    def send_to_root(self, payload: bytes) -> None:
        """Send a payload to rank 0 (no-op on rank 0)"""
        pass

    @abstractmethod
    def receive_at_root(self, patient: bool = False) -> Dict[int, bytes]:
        """On rank 0, receive one payload from each non-root rank, keyed by rank"""
        pass

    @abstractmethod
    def barrier(self) -> None:
        """Block until every rank arrives"""
        pass

    @abstractmethod
    def get_backend_name(self) -> str:
        """Return the name of this backend"""
        pass

    def broadcast_from_root(self, payload: bytes = b'', patient: bool = False) -> bytes:
        """Rank 0's payload delivered to every rank (other ranks' arguments are ignored)"""
        gathered = self.allgather_variable(payload if self.is_root else b'', patient=patient)
        return gathered[0]

    def close(self) -> None:
        pass

    def log_prefix(self) -> str:
        return f"r{self.rank}/{self.size}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}(rank={self.rank}, size={self.size})"
