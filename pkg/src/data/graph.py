"""
Graph representation for the SBP engine.
Directed multigraph with out/in adjacency, round-robin splitting and island accounting.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from ..errors import GraphInputError

Adjacency = Tuple[Tuple[Tuple[int, int], ...], ...]


class Graph:
    """Immutable directed multigraph; neighbor lists hold (vertex, multiplicity) sorted by vertex"""

    __slots__ = ('num_vertices', 'num_edges', 'out_neighbors', 'in_neighbors',
                 'd_out', 'd_in', 'd_total')

    def __init__(self, num_vertices: int, edge_counts: Dict[Tuple[int, int], int]):
        if num_vertices < 0:
            raise GraphInputError(f"num_vertices must be >= 0, got {num_vertices}")

        out_lists: List[List[Tuple[int, int]]] = [[] for _ in range(num_vertices)]
        in_lists: List[List[Tuple[int, int]]] = [[] for _ in range(num_vertices)]
        d_out = [0] * num_vertices
        d_in = [0] * num_vertices
        total = 0

        for (source, target), multiplicity in sorted(edge_counts.items()):
            if multiplicity <= 0:
                continue
            if not (0 <= source < num_vertices and 0 <= target < num_vertices):
                raise GraphInputError(f"edge ({source}, {target}) outside [0, {num_vertices})")
            out_lists[source].append((target, multiplicity))
            in_lists[target].append((source, multiplicity))
            d_out[source] += multiplicity
            d_in[target] += multiplicity
            total += multiplicity

        # sorted() over (source, target) keys leaves in_lists ordered by source as well
        self.num_vertices = num_vertices
        self.num_edges = total
        self.out_neighbors: Adjacency = tuple(tuple(row) for row in out_lists)
        self.in_neighbors: Adjacency = tuple(tuple(row) for row in in_lists)
        self.d_out = tuple(d_out)
        self.d_in = tuple(d_in)
        self.d_total = tuple(o + i for o, i in zip(d_out, d_in))

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[Tuple[int, int]]) -> 'Graph':
        """Build from (source, target) pairs; repeated pairs accumulate multiplicity"""
        return cls(num_vertices, Counter((int(u), int(w)) for u, w in edges))

    def edges(self) -> Iterable[Tuple[int, int, int]]:
        """Yield (source, target, multiplicity) in canonical order"""
        for source, row in enumerate(self.out_neighbors):
            for target, multiplicity in row:
                yield source, target, multiplicity

    def edge_counts(self) -> Dict[Tuple[int, int], int]:
        return {(u, w): m for u, w, m in self.edges()}

    def __getstate__(self):
        return {'num_vertices': self.num_vertices, 'edge_counts': self.edge_counts()}

    def __setstate__(self, state):
        self.__init__(state['num_vertices'], state['edge_counts'])

    def __repr__(self) -> str:
        return f"Graph(V={self.num_vertices}, E={self.num_edges})"


@dataclass(frozen=True)
class Subgraph:
    """Induced subgraph owned by one rank; vertex_map[local] = global id"""
    owner_rank: int
    vertex_map: Tuple[int, ...]
    graph: Graph

    def island_count(self) -> int:
        """Vertices with no edge inside this subgraph"""
        return sum(1 for degree in self.graph.d_total if degree == 0)


def induced_subgraph(g: Graph, vertices: Sequence[int], owner_rank: int = 0) -> Subgraph:
    """
    Subgraph induced by a vertex set

    Args:
        g: Global graph
        vertices: Global vertex ids (any order, no duplicates)
        owner_rank: Rank that owns the result

    Returns:
        Subgraph with dense local ids preserving global order
    """
    vertex_map = tuple(sorted(vertices))
    local_of = {v: i for i, v in enumerate(vertex_map)}
    if len(local_of) != len(vertex_map):
        raise GraphInputError("vertex set contains duplicates")

    counts = {}
    for local_source, source in enumerate(vertex_map):
        for target, multiplicity in g.out_neighbors[source]:
            local_target = local_of.get(target)
            if local_target is not None:
                counts[(local_source, local_target)] = multiplicity
    return Subgraph(owner_rank, vertex_map, Graph(len(vertex_map), counts))


def _check_split(g: Graph, num_ranks: int) -> None:
    if num_ranks < 1:
        raise GraphInputError(f"rank count must be >= 1, got {num_ranks}")
    if num_ranks > g.num_vertices:
        raise GraphInputError(
            f"cannot split {g.num_vertices} vertices over {num_ranks} ranks (empty ranks)")


def round_robin_split(g: Graph, num_ranks: int) -> List[Subgraph]:
    """Vertex v goes to rank v mod N; each rank keeps the edges induced by its vertices"""
    _check_split(g, num_ranks)
    return [round_robin_part(g, num_ranks, rank) for rank in range(num_ranks)]


def round_robin_part(g: Graph, num_ranks: int, rank: int) -> Subgraph:
    """The subgraph rank `rank` receives from round_robin_split (a single rank keeps g itself)"""
    _check_split(g, num_ranks)
    if num_ranks == 1:
        return Subgraph(0, tuple(range(g.num_vertices)), g)
    return induced_subgraph(g, range(rank, g.num_vertices, num_ranks), owner_rank=rank)


def island_fraction(subgraphs: Sequence[Subgraph]) -> float:
    """Share of all vertices that have zero degree inside their own subgraph"""
    total = sum(sub.graph.num_vertices for sub in subgraphs)
    if total == 0:
        return 0.0
    return sum(sub.island_count() for sub in subgraphs) / total
