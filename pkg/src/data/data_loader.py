"""
Data loading utilities for the SBP engine.
Handles edge lists, Matrix Market files, truth files and partition output.
"""

import io
import logging
import os
import sys
from collections import Counter
from contextlib import contextmanager
from typing import IO, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np
from scipy.io import mmread

from ..errors import GraphFormatError, GraphInputError
from .graph import Graph

logger = logging.getLogger(__name__)

Source = Union[str, os.PathLike, IO[str], Iterable[str]]


@contextmanager
def _open_lines(source: Source) -> Iterator[Iterable[str]]:
    """Yield an iterable of lines from a path, '-' (stdin), an open file or a list of lines"""
    if isinstance(source, (str, os.PathLike)):
        if str(source) == '-':
            yield sys.stdin
            return
        with open(source, 'r', encoding='utf-8') as handle:
            yield handle
    else:
        yield source


def _parse_int(token: str, line_number: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"{what} {token!r} is not an integer", line_number)


def _is_skippable(line: str) -> bool:
    return not line or line.startswith('#') or line.startswith('%')


def load_edge_list(source: Source, base_index: int = 0,
                   num_vertices: Optional[int] = None) -> Graph:
    """
    Load a whitespace-separated edge list

    Args:
        source: Path, '-' for stdin, open text stream or iterable of lines
        base_index: 0 or 1; ids are shifted so the graph is 0-based
        num_vertices: Minimum vertex count (e.g. from a truth file)

    Returns:
        Graph with V = 1 + max id; duplicate lines accumulate multiplicity
    """
    if base_index not in (0, 1):
        raise GraphInputError(f"base_index must be 0 or 1, got {base_index}")

    counts: Counter = Counter()
    max_id = -1
    with _open_lines(source) as lines:
        for line_number, raw in enumerate(lines, start=1):
            line = raw.strip()
            if _is_skippable(line):
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise GraphFormatError(f"expected 'src dst [weight]', got {raw.rstrip()!r}",
                                       line_number)
            source_id = _parse_int(fields[0], line_number, 'source') - base_index
            target_id = _parse_int(fields[1], line_number, 'target') - base_index
            if source_id < 0 or target_id < 0:
                raise GraphInputError(
                    f"line {line_number}: negative vertex id after base {base_index} re-indexing")

            multiplicity = 1
            if len(fields) == 3:
                try:
                    multiplicity = int(round(float(fields[2])))
                except ValueError:
                    raise GraphFormatError(f"weight {fields[2]!r} is not numeric", line_number)
                if multiplicity < 0:
                    raise GraphInputError(f"line {line_number}: negative weight")

            max_id = max(max_id, source_id, target_id)
            if multiplicity:
                counts[(source_id, target_id)] += multiplicity

    total_vertices = max(max_id + 1, num_vertices or 0)
    graph = Graph(total_vertices, counts)
    logger.info("[IO] Loaded edge list: V=%d E=%d", graph.num_vertices, graph.num_edges)
    return graph


def load_matrix_market(path: Union[str, os.PathLike]) -> Graph:
    """Load a Matrix Market coordinate file (1-based, symmetric storage expanded)"""
    try:
        matrix = mmread(str(path))
    except (ValueError, OSError) as e:
        raise GraphFormatError(f"cannot read Matrix Market file {path}: {e}")

    if hasattr(matrix, 'tocoo'):
        coo = matrix.tocoo()
        rows, cols, values = coo.row, coo.col, coo.data
    else:
        rows, cols = np.nonzero(matrix)
        values = matrix[rows, cols]

    num_vertices = max(matrix.shape)
    counts: Counter = Counter()
    for source, target, value in zip(rows.tolist(), cols.tolist(), np.asarray(values).tolist()):
        multiplicity = int(round(abs(value))) if value else 0
        if multiplicity:
            counts[(source, target)] += multiplicity

    graph = Graph(num_vertices, counts)
    logger.info("[IO] Loaded Matrix Market: V=%d E=%d", graph.num_vertices, graph.num_edges)
    return graph


def load_graph(path: Union[str, os.PathLike], base_index: int = 0,
               num_vertices: Optional[int] = None) -> Graph:
    """Dispatch on extension: .mtx -> Matrix Market, anything else -> edge list"""
    if str(path).endswith('.mtx'):
        return load_matrix_market(path)
    return load_edge_list(path, base_index, num_vertices)


def load_truth(source: Source, base_index: int = 0) -> List[int]:
    """Load 'vertex community' lines into a per-vertex label list"""
    labels = {}
    with _open_lines(source) as lines:
        for line_number, raw in enumerate(lines, start=1):
            line = raw.strip()
            if _is_skippable(line):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise GraphFormatError(f"expected 'vertex community', got {raw.rstrip()!r}",
                                       line_number)
            vertex = _parse_int(fields[0], line_number, 'vertex') - base_index
            community = _parse_int(fields[1], line_number, 'community')
            if vertex < 0:
                raise GraphInputError(f"line {line_number}: negative vertex id")
            labels[vertex] = community

    if not labels:
        return []
    size = max(labels) + 1
    missing = [v for v in range(size) if v not in labels]
    if missing:
        raise GraphInputError(f"truth file has no label for vertices {missing[:5]}"
                              f"{'...' if len(missing) > 5 else ''}")
    return [labels[v] for v in range(size)]


def format_edge_list(g: Graph, base_index: int = 0) -> str:
    """Canonical text form: sorted by source then target, multiplicity column only when > 1"""
    buffer = io.StringIO()
    for source, target, multiplicity in g.edges():
        if multiplicity == 1:
            buffer.write(f"{source + base_index}\t{target + base_index}\n")
        else:
            buffer.write(f"{source + base_index}\t{target + base_index}\t{multiplicity}\n")
    return buffer.getvalue()


def write_edge_list(path: Union[str, os.PathLike], g: Graph, base_index: int = 0) -> str:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(format_edge_list(g, base_index))
    return str(path)


def write_partition(path: Union[str, os.PathLike], assignment: Sequence[int],
                    base_index: int = 0) -> str:
    """Write 'vertex<TAB>community' lines, communities renumbered densely by first appearance"""
    dense = {}
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for vertex, community in enumerate(assignment):
            label = dense.setdefault(community, len(dense))
            handle.write(f"{vertex + base_index}\t{label}\n")
    return str(path)
