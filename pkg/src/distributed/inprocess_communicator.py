"""
In-process communicator: N logical ranks as threads exchanging through a shared rendezvous.
"""

import logging
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional

from ..data.config import get_collective_timeout
from ..errors import CollectiveTimeoutError, ProtocolError
from .base_communicator import BaseCommunicator

logger = logging.getLogger(__name__)

# Seconds between abort checks while a patient receive waits
PATIENT_POLL_SECONDS = 0.05


class InProcessRendezvous:
    """Shared exchange slots, a reusable barrier and per-source queues to rank 0"""

    def __init__(self, size: int, timeout: Optional[float] = None):
        self.size = size
        self.timeout = get_collective_timeout() if timeout is None else timeout
        self._barrier = threading.Barrier(size)
        self._slots: List[Any] = [None] * size
        self._tags: List[Optional[str]] = [None] * size
        self._mailboxes = [queue.Queue() for _ in range(size)]
        self._aborted = False

    def _wait(self, rank: int, tag: str, patient: bool = False) -> None:
        try:
            self._barrier.wait(None if patient else self.timeout)
        except threading.BrokenBarrierError:
            if self._aborted:
                raise CollectiveTimeoutError(f"rank {rank}: rendezvous aborted during {tag}")
            raise CollectiveTimeoutError(
                f"rank {rank}: no collective partner within {self.timeout}s during {tag}")

    def exchange(self, rank: int, tag: str, payload: Any, patient: bool = False) -> List[Any]:
        """Two-phase slot exchange: write, wait, read, wait (so slots are not reused early)"""
        self._slots[rank] = payload
        self._tags[rank] = tag
        self._wait(rank, tag, patient)
        tags = list(self._tags)
        gathered = list(self._slots)
        self._wait(rank, tag, patient)
        if any(t != tag for t in tags):
            raise ProtocolError(f"rank {rank}: collective mismatch {tags}")
        return gathered

    def post(self, source: int, payload: bytes) -> None:
        self._mailboxes[source].put(payload)

    def collect(self, source: int, patient: bool = False) -> bytes:
        if not patient:
            try:
                return self._mailboxes[source].get(timeout=self.timeout)
            except queue.Empty:
                raise CollectiveTimeoutError(f"no message from rank {source} within {self.timeout}s")
        while True:
            try:
                return self._mailboxes[source].get(timeout=PATIENT_POLL_SECONDS)
            except queue.Empty:
                if self._aborted:
                    raise CollectiveTimeoutError(f"rendezvous aborted while waiting for rank {source}")

    def abort(self) -> None:
        self._aborted = True
        self._barrier.abort()


class InProcessCommunicator(BaseCommunicator):
    """One rank's handle on an InProcessRendezvous"""

    def __init__(self, rank: int, rendezvous: InProcessRendezvous):
        super().__init__(rank, rendezvous.size)
        self.rendezvous = rendezvous
        self._sequence = 0

    def _next_tag(self, op: str) -> str:
        self._sequence += 1
        self.collectives += 1
        return f"{op}#{self._sequence}"

    def allgather_variable(self, payload: bytes, patient: bool = False) -> List[bytes]:
        payload = bytes(payload)
        self.bytes_sent += len(payload)
        if self.size == 1:
            self._next_tag('allgather')
            return [payload]
        return self.rendezvous.exchange(self.rank, self._next_tag('allgather'), payload, patient)

    def barrier(self) -> None:
        if self.size == 1:
            self._next_tag('barrier')
            return
        self.rendezvous.exchange(self.rank, self._next_tag('barrier'), None)

    def send_to_root(self, payload: bytes) -> None:
        if self.is_root:
            return
        self.bytes_sent += len(payload)
        self.rendezvous.post(self.rank, bytes(payload))

    def receive_at_root(self, patient: bool = False) -> Dict[int, bytes]:
        if not self.is_root:
            raise ProtocolError(f"rank {self.rank} called receive_at_root")
        return {source: self.rendezvous.collect(source, patient) for source in range(1, self.size)}

    def get_backend_name(self) -> str:
        return 'inprocess'


def _pick_failure(failures: List[BaseException]) -> BaseException:
    """Prefer the root cause over the timeouts it triggered in other ranks"""
    for failure in failures:
        if not isinstance(failure, CollectiveTimeoutError):
            return failure
    return failures[0]


def run_inprocess(size: int, fn: Callable[..., Any], *args: Any,
                  timeout: Optional[float] = None, **kwargs: Any) -> List[Any]:
    """
    Run fn(comm, *args, **kwargs) on `size` logical ranks

    Returns:
        Per-rank return values in rank order

    Raises:
        The first rank failure; the rendezvous is aborted so other ranks do not hang
    """
    if size < 1:
        raise ValueError(f"rank count must be >= 1, got {size}")
    rendezvous = InProcessRendezvous(size, timeout)

    def rank_entry(rank: int) -> Any:
        comm = InProcessCommunicator(rank, rendezvous)
        try:
            return fn(comm, *args, **kwargs)
        except BaseException:
            logger.debug("[COMM] rank %d failed, aborting rendezvous", rank)
            rendezvous.abort()
            raise

    with ThreadPoolExecutor(max_workers=size, thread_name_prefix='rank') as pool:
        futures = [pool.submit(rank_entry, rank) for rank in range(size)]
        failures = [f.exception() for f in futures]

    errors = [e for e in failures if e is not None]
    if errors:
        raise _pick_failure(errors)
    return [f.result() for f in futures]
