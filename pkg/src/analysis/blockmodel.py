"""
Degree-corrected blockmodel state and description-length objective.
Sparse rows (community -> count maps) with a stored transpose, community degrees,
vertex assignment, and incremental ΔDL for vertex moves and community merges.
"""

import hashlib
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..data.graph import Graph
from ..errors import GraphInputError, InvalidOperationError

Cell = Tuple[int, int]


def xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def h(x: float) -> float:
    """(1+x)·ln(1+x) − x·ln(x), with h(0) = 0"""
    if x <= 0:
        return 0.0
    return (1.0 + x) * math.log1p(x) - x * math.log(x)


def model_term(num_communities: int, num_vertices: int, num_edges: int) -> float:
    """E·h(C²/E) + V·ln(C); the first part is 0 when E = 0"""
    if num_communities < 1:
        raise InvalidOperationError(f"community count must be >= 1, got {num_communities}")
    edge_part = num_edges * h(num_communities ** 2 / num_edges) if num_edges > 0 else 0.0
    return edge_part + num_vertices * math.log(num_communities)


def null_description_length(num_vertices: int, num_edges: int) -> float:
    """DL of the single-community model: E·h(1/E) + E·ln(E)"""
    if num_edges <= 0:
        return 0.0
    return num_edges * h(1.0 / num_edges) + num_edges * math.log(num_edges)


class VertexContext:
    """A vertex's neighbor communities; self-loops kept apart so they move with the vertex"""

    __slots__ = ('vertex', 'out_counts', 'in_counts', 'self_loops', 'k_out', 'k_in')

    def __init__(self, vertex: int, out_counts: Dict[int, int], in_counts: Dict[int, int],
                 self_loops: int, k_out: int, k_in: int):
        self.vertex = vertex
        self.out_counts = out_counts
        self.in_counts = in_counts
        self.self_loops = self_loops
        self.k_out = k_out
        self.k_in = k_in

    @property
    def degree(self) -> int:
        return self.k_out + self.k_in

    def neighbor_counts(self, own_community: int) -> Dict[int, int]:
        """Community of the far endpoint of each incident edge (self-loops count twice)"""
        counts = dict(self.out_counts)
        for community, count in self.in_counts.items():
            counts[community] = counts.get(community, 0) + count
        if self.self_loops:
            counts[own_community] = counts.get(own_community, 0) + 2 * self.self_loops
        return counts


class DeltaEntries:
    """Sparse signed changes to B and to community degrees under a candidate operation"""

    __slots__ = ('cells', 'out_degrees', 'in_degrees')

    def __init__(self):
        self.cells: Dict[Cell, int] = {}
        self.out_degrees: Dict[int, int] = {}
        self.in_degrees: Dict[int, int] = {}

    def add(self, row: int, col: int, change: int) -> None:
        if change:
            key = (row, col)
            self.cells[key] = self.cells.get(key, 0) + change

    def shift_degrees(self, source: int, destination: int, k_out: int, k_in: int) -> None:
        if k_out:
            self.out_degrees[source] = self.out_degrees.get(source, 0) - k_out
            self.out_degrees[destination] = self.out_degrees.get(destination, 0) + k_out
        if k_in:
            self.in_degrees[source] = self.in_degrees.get(source, 0) - k_in
            self.in_degrees[destination] = self.in_degrees.get(destination, 0) + k_in

    def __iter__(self):
        return iter(self.cells.items())


class Blockmodel:
    """
    Edge counts between communities.

    M[i] maps j -> B[i][j] and M_T[j] maps i -> B[i][j]; zero cells are never stored.
    Merged communities stay as dead slots whose forward pointer names the survivor
    until renumber() compacts the ids.
    """

    def __init__(self, graph: Graph, num_slots: int):
        self.graph = graph
        self.num_slots = num_slots
        self.M: List[Dict[int, int]] = [{} for _ in range(num_slots)]
        self.M_T: List[Dict[int, int]] = [{} for _ in range(num_slots)]
        self.d_out = [0] * num_slots
        self.d_in = [0] * num_slots
        self.sizes = [0] * num_slots
        self.alive = [True] * num_slots
        self.forward = list(range(num_slots))
        self.assignment: List[int] = [0] * graph.num_vertices
        self._live = num_slots

    @property
    def num_communities(self) -> int:
        """Live (not merged away) communities"""
        return self._live

    @property
    def is_compact(self) -> bool:
        return self._live == self.num_slots

    def cell(self, row: int, col: int) -> int:
        return self.M[row].get(col, 0)

    def degree_total(self, community: int) -> int:
        return self.d_out[community] + self.d_in[community]

    def find(self, community: int) -> int:
        """Follow merge forwarding to the surviving community, compressing the path"""
        root = community
        while self.forward[root] != root:
            root = self.forward[root]
        while self.forward[community] != root:
            self.forward[community], community = root, self.forward[community]
        return root

    def community_of(self, vertex: int) -> int:
        return self.find(self.assignment[vertex])

    def rebuild(self) -> 'Blockmodel':
        """Recompute counts, degrees and sizes from the current assignment (slots kept)"""
        g = self.graph
        self.M = [{} for _ in range(self.num_slots)]
        self.M_T = [{} for _ in range(self.num_slots)]
        self.d_out = [0] * self.num_slots
        self.d_in = [0] * self.num_slots
        self.sizes = [0] * self.num_slots
        self.alive = [True] * self.num_slots
        self.forward = list(range(self.num_slots))
        self._live = self.num_slots

        assignment = self.assignment
        for community in assignment:
            self.sizes[community] += 1
        for source, row in enumerate(g.out_neighbors):
            i = assignment[source]
            out_row = self.M[i]
            for target, multiplicity in row:
                j = assignment[target]
                out_row[j] = out_row.get(j, 0) + multiplicity
                col = self.M_T[j]
                col[i] = col.get(i, 0) + multiplicity
                self.d_out[i] += multiplicity
                self.d_in[j] += multiplicity
        return self

    def copy(self) -> 'Blockmodel':
        other = Blockmodel.__new__(Blockmodel)
        other.graph = self.graph
        other.num_slots = self.num_slots
        other.M = [dict(row) for row in self.M]
        other.M_T = [dict(col) for col in self.M_T]
        other.d_out = list(self.d_out)
        other.d_in = list(self.d_in)
        other.sizes = list(self.sizes)
        other.alive = list(self.alive)
        other.forward = list(self.forward)
        other.assignment = list(self.assignment)
        other._live = self._live
        return other

    def cells(self) -> List[Tuple[int, int, int]]:
        """Sorted (i, j, count) triples of all nonzero cells"""
        return sorted((i, j, count) for i, row in enumerate(self.M) for j, count in row.items())

    def __repr__(self) -> str:
        return (f"Blockmodel(C={self._live}, slots={self.num_slots}, "
                f"V={self.graph.num_vertices}, E={self.graph.num_edges})")


def build(g: Graph, assignment: Sequence[int], num_communities: Optional[int] = None) -> Blockmodel:
    """
    Create the blockmodel of a graph under an assignment

    Args:
        g: Graph
        assignment: Community id per vertex, values in [0, C)
        num_communities: C; defaults to 1 + max(assignment)

    Returns:
        Blockmodel with B[i][j] = number of edges from community i to community j
    """
    if len(assignment) != g.num_vertices:
        raise GraphInputError(
            f"assignment has {len(assignment)} entries for {g.num_vertices} vertices")
    labels = [int(a) for a in assignment]
    if num_communities is None:
        num_communities = (max(labels) + 1) if labels else 1
    if labels and (min(labels) < 0 or max(labels) >= num_communities):
        raise GraphInputError(f"assignment values must lie in [0, {num_communities})")

    b = Blockmodel(g, max(num_communities, 1))
    b.assignment = labels
    return b.rebuild()


def singleton(g: Graph) -> Blockmodel:
    """Every vertex in its own community"""
    return build(g, range(g.num_vertices))


def log_likelihood(b: Blockmodel) -> float:
    """Σ B_ij·ln(B_ij / (d_out_i·d_in_j)), summed exactly rounded so replicas agree bit-for-bit"""
    terms = [xlogx(count) for row in b.M for count in row.values()]
    terms.extend(-xlogx(d) for d in b.d_out if d)
    terms.extend(-xlogx(d) for d in b.d_in if d)
    return math.fsum(terms)


def description_length(b: Blockmodel, num_vertices: Optional[int] = None,
                       num_edges: Optional[int] = None) -> float:
    """E·h(C²/E) + V·ln(C) − log_likelihood"""
    V = b.graph.num_vertices if num_vertices is None else num_vertices
    E = b.graph.num_edges if num_edges is None else num_edges
    return model_term(b.num_communities, V, E) - log_likelihood(b)


def delta_log_likelihood(b: Blockmodel, delta: DeltaEntries) -> float:
    """Change in log-likelihood if the entries were applied"""
    change = 0.0
    M = b.M
    for (row, col), diff in delta.cells.items():
        old = M[row].get(col, 0)
        change += xlogx(old + diff) - xlogx(old)
    for community, diff in delta.out_degrees.items():
        old = b.d_out[community]
        change -= xlogx(old + diff) - xlogx(old)
    for community, diff in delta.in_degrees.items():
        old = b.d_in[community]
        change -= xlogx(old + diff) - xlogx(old)
    return change


def vertex_context(b: Blockmodel, vertex: int) -> VertexContext:
    """Neighbor communities of a vertex under the current assignment"""
    g = b.graph
    assignment = b.assignment
    out_counts: Dict[int, int] = {}
    in_counts: Dict[int, int] = {}
    self_loops = 0
    for target, multiplicity in g.out_neighbors[vertex]:
        if target == vertex:
            self_loops += multiplicity
        else:
            community = assignment[target]
            out_counts[community] = out_counts.get(community, 0) + multiplicity
    for source, multiplicity in g.in_neighbors[vertex]:
        if source != vertex:
            community = assignment[source]
            in_counts[community] = in_counts.get(community, 0) + multiplicity
    return VertexContext(vertex, out_counts, in_counts, self_loops,
                         g.d_out[vertex], g.d_in[vertex])


def move_entries(context: VertexContext, from_c: int, to_c: int) -> DeltaEntries:
    delta = DeltaEntries()
    for community, count in context.out_counts.items():
        delta.add(from_c, community, -count)
        delta.add(to_c, community, count)
    for community, count in context.in_counts.items():
        delta.add(community, from_c, -count)
        delta.add(community, to_c, count)
    if context.self_loops:
        delta.add(from_c, from_c, -context.self_loops)
        delta.add(to_c, to_c, context.self_loops)
    delta.shift_degrees(from_c, to_c, context.k_out, context.k_in)
    return delta


def merge_entries(b: Blockmodel, community: int, target: int) -> DeltaEntries:
    """Row and column of `community` folded into `target`"""
    delta = DeltaEntries()
    for col, count in b.M[community].items():
        delta.add(community, col, -count)
        delta.add(target, target if col == community else col, count)
    for row, count in b.M_T[community].items():
        if row == community:
            continue
        delta.add(row, community, -count)
        delta.add(row, target, count)
    delta.shift_degrees(community, target, b.d_out[community], b.d_in[community])
    return delta


def _check_merge(b: Blockmodel, community: int, target: int) -> None:
    if community == target:
        raise InvalidOperationError(f"cannot merge community {community} into itself")
    for c in (community, target):
        if not (0 <= c < b.num_slots):
            raise InvalidOperationError(f"community {c} out of range [0, {b.num_slots})")
        if not b.alive[c]:
            raise InvalidOperationError(f"community {c} was already merged away")


def delta_dl_merge(b: Blockmodel, community: int, target: int) -> float:
    """DL(after merging community into target) − DL(before); b is not modified"""
    _check_merge(b, community, target)
    V, E, C = b.graph.num_vertices, b.graph.num_edges, b.num_communities
    model_change = model_term(C - 1, V, E) - model_term(C, V, E)
    return model_change - delta_log_likelihood(b, merge_entries(b, community, target))


def move_delta(b: Blockmodel, vertex: int, from_c: int, to_c: int,
               context: Optional[VertexContext] = None) -> Tuple[float, DeltaEntries]:
    """ΔDL of moving a vertex together with the entries that realize it"""
    if context is None:
        context = vertex_context(b, vertex)
    delta = move_entries(context, from_c, to_c)
    return -delta_log_likelihood(b, delta), delta


def delta_dl_move(b: Blockmodel, vertex: int, from_c: int, to_c: int,
                  context: Optional[VertexContext] = None) -> float:
    """DL(after moving vertex from from_c to to_c) − DL(before); C is unchanged"""
    if b.assignment[vertex] != from_c:
        raise InvalidOperationError(
            f"vertex {vertex} is in community {b.assignment[vertex]}, not {from_c}")
    if from_c == to_c:
        raise InvalidOperationError("source and destination community are the same")
    return move_delta(b, vertex, from_c, to_c, context)[0]


def apply_entries(b: Blockmodel, delta: DeltaEntries) -> None:
    M, M_T = b.M, b.M_T
    for (row, col), diff in delta.cells.items():
        value = M[row].get(col, 0) + diff
        if value:
            M[row][col] = value
            M_T[col][row] = value
        else:
            M[row].pop(col, None)
            M_T[col].pop(row, None)
    for community, diff in delta.out_degrees.items():
        b.d_out[community] += diff
    for community, diff in delta.in_degrees.items():
        b.d_in[community] += diff


def apply_merge(b: Blockmodel, community: int, target: int) -> Blockmodel:
    """Fold community into target; community becomes a dead slot forwarding to target"""
    _check_merge(b, community, target)
    apply_entries(b, merge_entries(b, community, target))
    b.sizes[target] += b.sizes[community]
    b.sizes[community] = 0
    b.alive[community] = False
    b.forward[community] = target
    b._live -= 1
    return b


def apply_move(b: Blockmodel, vertex: int, to_c: int,
               context: Optional[VertexContext] = None,
               delta: Optional[DeltaEntries] = None) -> Blockmodel:
    """Move a vertex to another community, updating B, its transpose and degrees"""
    from_c = b.assignment[vertex]
    if from_c == to_c:
        return b
    if not b.alive[to_c]:
        raise InvalidOperationError(f"community {to_c} was merged away")
    if delta is None:
        if context is None:
            context = vertex_context(b, vertex)
        delta = move_entries(context, from_c, to_c)
    apply_entries(b, delta)
    b.assignment[vertex] = to_c
    b.sizes[from_c] -= 1
    b.sizes[to_c] += 1
    return b


def renumber(b: Blockmodel) -> Dict[int, int]:
    """
    Relabel live, non-empty communities 0..C'-1 preserving their order

    Assignments are resolved through the merge-forwarding chain first.

    Returns:
        Mapping from old community id to new id
    """
    assignment = [b.find(a) for a in b.assignment]
    keep = [c for c in range(b.num_slots) if b.alive[c] and b.sizes[c] > 0]
    mapping = {old: new for new, old in enumerate(keep)}

    b.M = [{mapping[j]: count for j, count in b.M[old].items()} for old in keep]
    b.M_T = [{mapping[i]: count for i, count in b.M_T[old].items()} for old in keep]
    b.d_out = [b.d_out[old] for old in keep]
    b.d_in = [b.d_in[old] for old in keep]
    b.sizes = [b.sizes[old] for old in keep]
    b.assignment = [mapping[a] for a in assignment]

    b.num_slots = max(len(keep), 1)
    if not keep:
        # graph without vertices: keep one empty community
        b.M, b.M_T, b.d_out, b.d_in, b.sizes = [{}], [{}], [0], [0], [0]
    b.alive = [True] * b.num_slots
    b.forward = list(range(b.num_slots))
    b._live = b.num_slots
    return mapping


def checksum(b: Blockmodel) -> str:
    """64-bit digest over sorted (i, j, count) triples"""
    triples = np.asarray(b.cells(), dtype='<i8').reshape(-1, 3)
    return hashlib.blake2b(triples.tobytes(), digest_size=8).hexdigest()


def first_difference(cells_a: Iterable[Tuple[int, int, int]],
                     cells_b: Iterable[Tuple[int, int, int]]) -> Optional[Tuple[int, int, int, int]]:
    """First cell (i, j, count_a, count_b) where two sorted triple lists disagree"""
    a = {(i, j): c for i, j, c in cells_a}
    b = {(i, j): c for i, j, c in cells_b}
    for key in sorted(set(a) | set(b)):
        if a.get(key, 0) != b.get(key, 0):
            return key[0], key[1], a.get(key, 0), b.get(key, 0)
    return None
