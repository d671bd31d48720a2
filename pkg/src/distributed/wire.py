"""
Fixed-width little-endian encodings for records exchanged between ranks.
Every payload starts with a 64-bit record count.
"""

from typing import List, Sequence, Tuple

import numpy as np

from ..analysis.records import MergeProposal, MoveRecord
from ..errors import ProtocolError

COUNT = np.dtype('<u8')
MERGE_PROPOSAL = np.dtype([('community', '<i8'), ('target', '<i8'), ('delta_dl', '<f8')])
MOVE_RECORD = np.dtype([('vertex', '<i8'), ('destination', '<i8')])
CELL = np.dtype([('row', '<i8'), ('col', '<i8'), ('count', '<i8')])
INT64 = np.dtype('<i8')
FLOAT64 = np.dtype('<f8')


def _encode(records: np.ndarray) -> bytes:
    return np.array([len(records)], dtype=COUNT).tobytes() + records.tobytes()


def _decode(payload: bytes, dtype: np.dtype, offset: int = 0) -> Tuple[np.ndarray, int]:
    if len(payload) < offset + COUNT.itemsize:
        raise ProtocolError("payload shorter than its count prefix")
    count = int(np.frombuffer(payload, dtype=COUNT, count=1, offset=offset)[0])
    start = offset + COUNT.itemsize
    end = start + count * dtype.itemsize
    if len(payload) < end:
        raise ProtocolError(f"payload holds fewer than {count} records of {dtype.itemsize} bytes")
    if count == 0:
        return np.empty(0, dtype=dtype), end
    return np.frombuffer(payload, dtype=dtype, count=count, offset=start), end


def encode_merge_proposals(proposals: Sequence[MergeProposal]) -> bytes:
    records = np.array([tuple(p) for p in proposals], dtype=MERGE_PROPOSAL)
    return _encode(records)


def decode_merge_proposals(payload: bytes) -> List[MergeProposal]:
    records, _ = _decode(payload, MERGE_PROPOSAL)
    return [MergeProposal(int(r['community']), int(r['target']), float(r['delta_dl']))
            for r in records]


def encode_move_records(moves: Sequence[MoveRecord]) -> bytes:
    return _encode(np.array([tuple(m) for m in moves], dtype=MOVE_RECORD))


def decode_move_records(payload: bytes) -> List[MoveRecord]:
    records, _ = _decode(payload, MOVE_RECORD)
    return [MoveRecord(int(r['vertex']), int(r['destination'])) for r in records]


def encode_cells(cells: Sequence[Tuple[int, int, int]]) -> bytes:
    return _encode(np.array(list(cells), dtype=CELL))


def decode_cells(payload: bytes) -> List[Tuple[int, int, int]]:
    records, _ = _decode(payload, CELL)
    return [(int(r['row']), int(r['col']), int(r['count'])) for r in records]


def encode_int_sequences(*sequences: Sequence[int]) -> bytes:
    """Concatenated length-prefixed 64-bit integer sequences"""
    return b''.join(_encode(np.asarray(list(seq), dtype=INT64)) for seq in sequences)


def decode_int_sequences(payload: bytes, expected: int) -> List[List[int]]:
    sequences = []
    offset = 0
    for _ in range(expected):
        values, offset = _decode(payload, INT64, offset)
        sequences.append(values.tolist())
    if offset != len(payload):
        raise ProtocolError(f"{len(payload) - offset} trailing bytes after {expected} sequences")
    return sequences


def encode_floats(values: Sequence[float]) -> bytes:
    return _encode(np.asarray(list(values), dtype=FLOAT64))


def decode_floats(payload: bytes, offset: int = 0) -> Tuple[List[float], int]:
    values, end = _decode(payload, FLOAT64, offset)
    return values.tolist(), end
