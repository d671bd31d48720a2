"""
Multi-process communicator over local TCP sockets.

Frames are an 8-byte little-endian length followed by the body. The first body byte is the
frame kind. Rank 0 hosts the rendezvous: every collective is gathered at rank 0 and the
combined result is sent back to each rank.
"""

import logging
import multiprocessing
import os
import pickle
import queue
import socket
import struct
import time
from collections import deque
from contextlib import contextmanager
from typing import Any, Callable, Deque, Dict, Iterator, List, Optional, Tuple

from ..data.config import (DEFAULT_RENDEZVOUS, ENV_RANK, ENV_RENDEZVOUS, ENV_WORLD_SIZE,
                           get_collective_timeout)
from ..errors import CollectiveTimeoutError, ProtocolError
from .base_communicator import BaseCommunicator

logger = logging.getLogger(__name__)

LENGTH = struct.Struct('<Q')
TAG_LENGTH = struct.Struct('<H')
RANK = struct.Struct('<q')

KIND_HELLO = b'H'
KIND_COLLECTIVE = b'C'
KIND_RESULT = b'R'
KIND_POINT = b'P'
KIND_ERROR = b'E'


def pack_list(items: List[bytes]) -> bytes:
    parts = [LENGTH.pack(len(items))]
    for item in items:
        parts.append(LENGTH.pack(len(item)))
        parts.append(item)
    return b''.join(parts)


def unpack_list(data: bytes) -> List[bytes]:
    view = memoryview(data)
    if len(view) < LENGTH.size:
        raise ProtocolError("truncated list frame")
    (count,), offset = LENGTH.unpack_from(view, 0), LENGTH.size
    items = []
    for _ in range(count):
        if offset + LENGTH.size > len(view):
            raise ProtocolError("truncated list frame")
        (size,) = LENGTH.unpack_from(view, offset)
        offset += LENGTH.size
        if offset + size > len(view):
            raise ProtocolError("truncated list item")
        items.append(bytes(view[offset:offset + size]))
        offset += size
    return items


def parse_address(address: str) -> Tuple[str, int]:
    host, _, port = address.rpartition(':')
    if not host or not port.isdigit():
        raise ValueError(f"rendezvous address must be host:port, got {address!r}")
    return host, int(port)


class SocketCommunicator(BaseCommunicator):
    """Rank handle for the socket backend; rank 0 listens, the others connect"""

    def __init__(self, rank: int, size: int, address: str = DEFAULT_RENDEZVOUS,
                 timeout: Optional[float] = None):
        super().__init__(rank, size)
        self.timeout = get_collective_timeout() if timeout is None else timeout
        self.address = address
        self._sequence = 0
        self._peers: Dict[int, socket.socket] = {}
        self._pending: Dict[int, Deque[bytes]] = {r: deque() for r in range(size)}
        self._root: Optional[socket.socket] = None
        if size > 1:
            if self.is_root:
                self._accept_peers()
            else:
                self._connect_root()

    # -- framing -----------------------------------------------------------------------------

    def _recv_exact(self, sock: socket.socket, count: int) -> bytes:
        chunks = []
        remaining = count
        while remaining:
            try:
                chunk = sock.recv(min(remaining, 1 << 20))
            except socket.timeout:
                raise CollectiveTimeoutError(f"rank {self.rank}: peer silent for {self.timeout}s")
            if not chunk:
                raise ProtocolError(f"rank {self.rank}: connection closed mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b''.join(chunks)

    def _send_frame(self, sock: socket.socket, kind: bytes, body: bytes = b'') -> None:
        frame = kind + body
        try:
            sock.sendall(LENGTH.pack(len(frame)) + frame)
        except socket.timeout:
            raise CollectiveTimeoutError(f"rank {self.rank}: send timed out")
        except OSError as e:
            raise ProtocolError(f"rank {self.rank}: send failed: {e}")

    def _recv_frame(self, sock: socket.socket) -> Tuple[bytes, bytes]:
        (length,) = LENGTH.unpack(self._recv_exact(sock, LENGTH.size))
        if length < 1:
            raise ProtocolError(f"rank {self.rank}: empty frame")
        frame = self._recv_exact(sock, length)
        return frame[:1], frame[1:]

    @contextmanager
    def _patience(self, sock: socket.socket, patient: bool) -> Iterator[None]:
        """Block on `sock` without the collective timeout; a closed peer still ends the wait"""
        if not patient:
            yield
            return
        sock.settimeout(None)
        try:
            yield
        finally:
            sock.settimeout(self.timeout)

    # -- rendezvous --------------------------------------------------------------------------

    def _accept_peers(self) -> None:
        host, port = parse_address(self.address)
        server = socket.create_server((host, port), reuse_port=False)
        server.settimeout(self.timeout)
        try:
            while len(self._peers) < self.size - 1:
                try:
                    conn, _ = server.accept()
                except socket.timeout:
                    raise CollectiveTimeoutError(
                        f"only {len(self._peers) + 1}/{self.size} ranks joined within {self.timeout}s")
                conn.settimeout(self.timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                kind, body = self._recv_frame(conn)
                if kind != KIND_HELLO:
                    raise ProtocolError(f"expected hello frame, got {kind!r}")
                (peer,) = RANK.unpack(body)
                if not (0 < peer < self.size) or peer in self._peers:
                    raise ProtocolError(f"unexpected rank {peer} joined")
                self._peers[peer] = conn
        finally:
            server.close()
        logger.info("[COMM] %s: %d ranks joined at %s", self.log_prefix(), self.size, self.address)

    def _connect_root(self) -> None:
        host, port = parse_address(self.address)
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=self.timeout)
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise CollectiveTimeoutError(f"rank {self.rank}: rendezvous {self.address} unreachable")
                time.sleep(0.05)
        sock.settimeout(self.timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_frame(sock, KIND_HELLO, RANK.pack(self.rank))
        self._root = sock

    # -- collectives -------------------------------------------------------------------------

    def _next_tag(self, op: str) -> str:
        self._sequence += 1
        self.collectives += 1
        return f"{op}#{self._sequence}"

    def _read_collective(self, peer: int, patient: bool = False) -> Tuple[str, bytes]:
        sock = self._peers[peer]
        while True:
            with self._patience(sock, patient):
                kind, body = self._recv_frame(sock)
            if kind == KIND_POINT:
                self._pending[peer].append(body)
                continue
            if kind == KIND_COLLECTIVE:
                (tag_length,) = TAG_LENGTH.unpack_from(body, 0)
                start = TAG_LENGTH.size
                tag = body[start:start + tag_length].decode('ascii')
                return tag, body[start + tag_length:]
            if kind == KIND_ERROR:
                raise ProtocolError(body.decode('utf-8', 'replace'))
            raise ProtocolError(f"unexpected frame {kind!r} from rank {peer}")

    def _fail_all(self, message: str) -> None:
        for sock in self._peers.values():
            try:
                self._send_frame(sock, KIND_ERROR, message.encode('utf-8'))
            except (ProtocolError, CollectiveTimeoutError):
                pass
        raise ProtocolError(message)

    def _collective(self, op: str, payload: bytes, patient: bool = False) -> List[bytes]:
        tag = self._next_tag(op)
        if self.size == 1:
            return [payload]

        if not self.is_root:
            encoded = tag.encode('ascii')
            self._send_frame(self._root, KIND_COLLECTIVE, TAG_LENGTH.pack(len(encoded)) + encoded + payload)
            with self._patience(self._root, patient):
                kind, body = self._recv_frame(self._root)
            if kind == KIND_ERROR:
                raise ProtocolError(body.decode('utf-8', 'replace'))
            if kind != KIND_RESULT:
                raise ProtocolError(f"rank {self.rank}: expected result frame, got {kind!r}")
            return unpack_list(body)

        gathered = [payload]
        for peer in range(1, self.size):
            peer_tag, data = self._read_collective(peer, patient)
            if peer_tag != tag:
                self._fail_all(f"collective mismatch: root in {tag}, rank {peer} in {peer_tag}")
            gathered.append(data)
        packed = pack_list(gathered)
        for peer in range(1, self.size):
            self._send_frame(self._peers[peer], KIND_RESULT, packed)
        return gathered

    def allgather_variable(self, payload: bytes, patient: bool = False) -> List[bytes]:
        payload = bytes(payload)
        self.bytes_sent += len(payload)
        return self._collective('allgather', payload, patient)

    def barrier(self) -> None:
        self._collective('barrier', b'')

    def send_to_root(self, payload: bytes) -> None:
        if self.is_root:
            return
        self.bytes_sent += len(payload)
        self._send_frame(self._root, KIND_POINT, bytes(payload))

    def receive_at_root(self, patient: bool = False) -> Dict[int, bytes]:
        if not self.is_root:
            raise ProtocolError(f"rank {self.rank} called receive_at_root")
        received = {}
        for peer in range(1, self.size):
            if self._pending[peer]:
                received[peer] = self._pending[peer].popleft()
                continue
            with self._patience(self._peers[peer], patient):
                kind, body = self._recv_frame(self._peers[peer])
            if kind != KIND_POINT:
                raise ProtocolError(f"rank {peer} sent {kind!r} while root waited for its message")
            received[peer] = body
        return received

    def get_backend_name(self) -> str:
        return 'multiprocess'

    def close(self) -> None:
        for sock in list(self._peers.values()) + ([self._root] if self._root else []):
            try:
                sock.close()
            except OSError:
                pass
        self._peers.clear()
        self._root = None


def from_env(timeout: Optional[float] = None) -> SocketCommunicator:
    """Communicator for an externally launched rank (SBP_RANK, SBP_WORLD_SIZE, SBP_RENDEZVOUS)"""
    try:
        rank = int(os.environ[ENV_RANK])
        size = int(os.environ[ENV_WORLD_SIZE])
    except KeyError as e:
        raise ValueError(f"environment variable {e.args[0]} is not set")
    address = os.getenv(ENV_RENDEZVOUS, DEFAULT_RENDEZVOUS)
    return SocketCommunicator(rank, size, address, timeout)


def _free_port(host: str) -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


def _process_entry(rank: int, size: int, address: str, timeout: Optional[float],
                   fn: Callable[..., Any], args: tuple, results) -> None:
    comm = None
    try:
        comm = SocketCommunicator(rank, size, address, timeout)
        results.put((rank, True, fn(comm, *args)))
    except Exception as e:
        try:
            pickle.dumps(e)
        except Exception:
            e = ProtocolError(f"rank {rank}: {e!r}")
        results.put((rank, False, e))
    finally:
        if comm is not None:
            comm.close()


def run_multiprocess(size: int, fn: Callable[..., Any], *args: Any,
                     timeout: Optional[float] = None, host: str = '127.0.0.1') -> List[Any]:
    """
    Run fn(comm, *args) in `size` OS processes connected over local sockets

    fn and args must be picklable (module-level function, plain data).

    Returns:
        Per-rank return values in rank order
    """
    if size < 1:
        raise ValueError(f"rank count must be >= 1, got {size}")
    address = f"{host}:{_free_port(host)}"
    context = multiprocessing.get_context('spawn')
    results = context.Queue()
    processes = [context.Process(target=_process_entry,
                                 args=(rank, size, address, timeout, fn, args, results),
                                 name=f"sbp-rank-{rank}")
                 for rank in range(size)]
    for process in processes:
        process.start()

    outcomes: Dict[int, Tuple[bool, Any]] = {}
    while len(outcomes) < size:
        try:
            rank, ok, value = results.get(timeout=0.5)
            outcomes[rank] = (ok, value)
        except queue.Empty:
            if not any(p.is_alive() for p in processes) and results.empty():
                break
    for process in processes:
        process.join()

    missing = [rank for rank in range(size) if rank not in outcomes]
    failures = [outcomes[r][1] for r in sorted(outcomes) if not outcomes[r][0]]
    if failures:
        for failure in failures:
            if not isinstance(failure, CollectiveTimeoutError):
                raise failure
        raise failures[0]
    if missing:
        raise ProtocolError(f"ranks {missing} exited without a result")
    return [outcomes[rank][1] for rank in range(size)]
