#!/usr/bin/env python3
"""
Tests for the communicator contract on both backends and for the wire codecs
"""

import random
import time
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.analysis.records import MergeProposal, MoveRecord
from src.data.graph import Graph
from src.data.sbp_config import SbpConfig
from src.distributed import wire
from src.distributed.inprocess_communicator import run_inprocess
from src.distributed.launcher import run_algorithm
from src.distributed.socket_communicator import (SocketCommunicator, _free_port, pack_list,
                                                 parse_address, run_multiprocess, unpack_list)
from src.errors import CollectiveTimeoutError, ProtocolError


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=16).flatmap(
    lambda n: st.lists(st.lists(st.binary(max_size=64), min_size=3, max_size=3),
                       min_size=n, max_size=n)))
def test_allgather_echoes_bytes_exactly(payloads):
    size = len(payloads)
    jitter = random.Random(size)
    delays = [[jitter.random() * 0.002 for _ in range(3)] for _ in range(size)]

    def rank_main(comm):
        rounds = []
        for i in range(3):
            time.sleep(delays[comm.rank][i])
            rounds.append(comm.allgather_variable(payloads[comm.rank][i]))
            comm.barrier()
        return rounds

    results = run_inprocess(size, rank_main, timeout=10.0)
    for rounds in results:
        for i, gathered in enumerate(rounds):
            assert gathered == [payloads[r][i] for r in range(size)]


def test_many_rounds_do_not_deadlock():
    def rank_main(comm):
        rng = random.Random(comm.rank)
        total = 0
        for i in range(1000):
            if rng.random() < 0.01:
                time.sleep(0.0005)
            gathered = comm.allgather_variable(i.to_bytes(4, 'little') * (comm.rank + 1))
            total += sum(len(g) for g in gathered)
        return total

    results = run_inprocess(4, rank_main, timeout=20.0)
    assert results == [1000 * 4 * (1 + 2 + 3 + 4)] * 4


def test_send_to_root_and_broadcast():
    def rank_main(comm):
        comm.send_to_root(f"rank{comm.rank}".encode())
        received = comm.receive_at_root() if comm.is_root else {}
        echoed = comm.broadcast_from_root(b"root says hi" if comm.is_root else b"ignored")
        return received, echoed

    results = run_inprocess(3, rank_main, timeout=10.0)
    assert results[0][0] == {1: b"rank1", 2: b"rank2"}
    assert all(echoed == b"root says hi" for _, echoed in results)


def test_receive_at_root_only_on_root():
    def rank_main(comm):
        if not comm.is_root:
            comm.receive_at_root()

    with pytest.raises(ProtocolError):
        run_inprocess(2, rank_main, timeout=5.0)


def test_mismatched_collectives_raise():
    def rank_main(comm):
        if comm.is_root:
            comm.barrier()
        else:
            comm.allgather_variable(b"x")

    with pytest.raises(ProtocolError):
        run_inprocess(2, rank_main, timeout=5.0)


def test_missing_partner_times_out():
    def rank_main(comm):
        if comm.is_root:
            comm.allgather_variable(b"alone")

    with pytest.raises(CollectiveTimeoutError):
        run_inprocess(2, rank_main, timeout=0.3)


def test_single_rank_collectives_are_local():
    def rank_main(comm):
        comm.barrier()
        comm.send_to_root(b"ignored")
        return comm.allgather_variable(b"solo"), comm.receive_at_root()

    assert run_inprocess(1, rank_main) == [([b"solo"], {})]


def test_socket_backend_collectives_in_threads():
    size = 3
    address = f"127.0.0.1:{_free_port('127.0.0.1')}"

    def rank_main(rank):
        comm = SocketCommunicator(rank, size, address, timeout=10.0)
        try:
            gathered = comm.allgather_variable(bytes([rank]) * rank)
            comm.send_to_root(f"hello from {rank}".encode())
            comm.barrier()
            received = comm.receive_at_root() if comm.is_root else {}
            echoed = comm.broadcast_from_root(b"done" if comm.is_root else b"")
            return gathered, received, echoed
        finally:
            comm.close()

    with ThreadPoolExecutor(max_workers=size) as pool:
        results = list(pool.map(rank_main, range(size)))

    for gathered, _, echoed in results:
        assert gathered == [b"", b"\x01", b"\x02\x02"]
        assert echoed == b"done"
    assert results[0][1] == {1: b"hello from 1", 2: b"hello from 2"}


def test_patient_broadcast_outlasts_collective_timeout():
    def rank_main(comm, patient):
        if comm.is_root:
            time.sleep(0.6)
        return comm.broadcast_from_root(b"late" if comm.is_root else b"", patient=patient)

    assert run_inprocess(3, rank_main, True, timeout=0.2) == [b"late"] * 3
    with pytest.raises(CollectiveTimeoutError):
        run_inprocess(3, rank_main, False, timeout=0.2)


def test_patient_receive_waits_for_slow_sender():
    def rank_main(comm):
        if comm.rank == 2:
            time.sleep(0.6)
        comm.send_to_root(bytes([comm.rank]))
        return comm.receive_at_root(patient=True) if comm.is_root else {}

    results = run_inprocess(3, rank_main, timeout=0.2)
    assert results[0] == {1: b"\x01", 2: b"\x02"}


def test_failing_rank_ends_patient_waits():
    def root_fails(comm):
        if comm.is_root:
            time.sleep(0.2)
            raise RuntimeError("root gave up")
        comm.broadcast_from_root(patient=True)

    with pytest.raises(RuntimeError, match="root gave up"):
        run_inprocess(4, root_fails, timeout=0.1)

    def sender_fails(comm):
        if comm.rank == 1:
            raise RuntimeError("no partial")
        comm.send_to_root(b"x")
        if comm.is_root:
            comm.receive_at_root(patient=True)

    with pytest.raises(RuntimeError, match="no partial"):
        run_inprocess(3, sender_fails, timeout=0.1)


def test_staggered_barrier_orders_all_arrivals_before_any_release():
    size = 8
    rounds = 5
    stagger = random.Random(8)
    delays = [[stagger.random() * 0.01 for _ in range(size)] for _ in range(rounds)]
    arrivals = [[None] * size for _ in range(rounds)]

    def rank_main(comm):
        seen = []
        for i in range(rounds):
            time.sleep(delays[i][comm.rank])
            arrivals[i][comm.rank] = time.monotonic()
            comm.barrier()
            released = time.monotonic()
            seen.append((all(a is not None for a in arrivals[i]), max(arrivals[i]) <= released))
        return seen

    results = run_inprocess(size, rank_main, timeout=10.0)
    assert all(complete and ordered for seen in results for complete, ordered in seen)


def test_socket_patient_waits_in_threads():
    size = 3
    address = f"127.0.0.1:{_free_port('127.0.0.1')}"

    def rank_main(rank):
        comm = SocketCommunicator(rank, size, address, timeout=1.0)
        try:
            if rank == 2:
                time.sleep(1.5)
            comm.send_to_root(bytes([rank]))
            received = comm.receive_at_root(patient=True) if comm.is_root else {}
            if comm.is_root:
                time.sleep(1.5)
            echoed = comm.broadcast_from_root(b"tuned" if comm.is_root else b"", patient=True)
            return received, echoed
        finally:
            comm.close()

    with ThreadPoolExecutor(max_workers=size) as pool:
        results = list(pool.map(rank_main, range(size)))

    assert results[0][0] == {1: b"\x01", 2: b"\x02"}
    assert [echoed for _, echoed in results] == [b"tuned"] * size


def echo_rank(comm, prefix):
    return comm.allgather_variable(prefix + bytes([comm.rank]))


def test_multiprocess_launcher_returns_rank_results():
    results = run_multiprocess(2, echo_rank, b"p", timeout=30.0)
    assert results == [[b"p\x00", b"p\x01"]] * 2


@pytest.mark.parametrize("algo", ["edist", "dcsbp"])
def test_thread_and_process_backends_agree(algo):
    edges = [(u, w) for u in range(12) for w in range(12) if u != w and (u < 6) == (w < 6)]
    g = Graph.from_edges(12, edges + [(0, 6), (7, 1)])
    cfg = SbpConfig.from_profile('fast', seed=9)
    threads = run_algorithm(g, cfg, algo=algo, ranks=2, backend='inprocess', timeout=30.0)
    processes = run_algorithm(g, cfg, algo=algo, ranks=2, backend='multiprocess', timeout=30.0)
    assert processes.assignment == threads.assignment
    assert processes.description_length == threads.description_length
    assert processes.num_communities == threads.num_communities


def test_pack_list_round_trip_and_truncation():
    items = [b"", b"abc", bytes(range(256))]
    assert unpack_list(pack_list(items)) == items
    with pytest.raises(ProtocolError):
        unpack_list(pack_list(items)[:-1])


def test_parse_address():
    assert parse_address("127.0.0.1:29500") == ("127.0.0.1", 29500)
    with pytest.raises(ValueError):
        parse_address("localhost")


def test_merge_proposals_keep_float_bits():
    proposals = [MergeProposal(3, 1, -0.1 - 0.2), MergeProposal(0, 2, 1e-300)]
    assert wire.decode_merge_proposals(wire.encode_merge_proposals(proposals)) == proposals
    assert wire.decode_merge_proposals(wire.encode_merge_proposals([])) == []


def test_move_records_and_truncated_payload():
    moves = [MoveRecord(5, 2), MoveRecord(9, 0)]
    payload = wire.encode_move_records(moves)
    assert len(payload) == 8 + 2 * 16
    assert wire.decode_move_records(payload) == moves
    with pytest.raises(ProtocolError):
        wire.decode_move_records(payload[:-3])


def test_int_sequences_reject_trailing_bytes():
    payload = wire.encode_int_sequences([1, 2, 3], [], [-4])
    assert wire.decode_int_sequences(payload, 3) == [[1, 2, 3], [], [-4]]
    with pytest.raises(ProtocolError):
        wire.decode_int_sequences(payload + b"\x00", 3)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
