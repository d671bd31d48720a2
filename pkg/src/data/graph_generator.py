"""
Seeded DCSBM graph generator with planted ground truth.
Covers the truncation / degree-duplication / community-count parameter grid and
scaled-down desk presets.
"""

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..analysis.rng import STREAM_GENERATOR, make_rng
from ..errors import GraphInputError
from .config import (DEFAULT_DIRICHLET_ALPHA, DEFAULT_INTRA_RATIO, DEFAULT_POWERLAW_EXPONENT,
                     DEFAULT_SEED, DESK_SCALE_DIVISOR, TRUNCATED_MAX_DEGREE, TRUNCATED_MIN_DEGREE,
                     UNTRUNCATED_MAX_DEGREE_FRACTION)
from .data_loader import write_edge_list, write_partition
from .graph import Graph
from .sbp_config import parse_params_text

logger = logging.getLogger(__name__)

EXPONENT_SEARCH_RANGE = (-8.0, 4.0)


class GeneratorParams(BaseModel):
    """Validated generator parameters"""

    model_config = ConfigDict(frozen=True)

    num_vertices: int = Field(..., ge=2)
    num_communities: int = Field(..., ge=1)
    truncate_min: bool = True
    truncate_max: bool = True
    duplicate_degree_sequence: bool = True
    powerlaw_exponent: float = DEFAULT_POWERLAW_EXPONENT
    d_min: Optional[int] = Field(None, ge=1)
    d_max: Optional[int] = Field(None, ge=1)
    max_degree_fraction: float = Field(UNTRUNCATED_MAX_DEGREE_FRACTION, gt=0.0, le=1.0)
    intra_ratio: float = Field(DEFAULT_INTRA_RATIO, gt=0.0)
    dirichlet_alpha: float = Field(DEFAULT_DIRICHLET_ALPHA, gt=0.0)
    target_edges: Optional[int] = Field(None, ge=0)
    seed: int = Field(DEFAULT_SEED, ge=0)
    name: str = 'custom'

    @model_validator(mode='after')
    def _check_sizes(self) -> 'GeneratorParams':
        if self.num_communities >= self.num_vertices:
            raise ValueError(f"need V > C, got V={self.num_vertices} C={self.num_communities}")
        low, high = self.degree_bounds
        if high < low:
            raise ValueError(f"degree bounds are inverted: [{low}, {high}]")
        return self

    @property
    def degree_bounds(self) -> Tuple[int, int]:
        """[low, high] of the drawn degree values"""
        low = self.d_min if self.d_min is not None else (
            TRUNCATED_MIN_DEGREE if self.truncate_min else 1)
        if self.d_max is not None:
            high = self.d_max
        elif self.truncate_max:
            high = TRUNCATED_MAX_DEGREE
        else:
            high = max(2, int(self.num_vertices * self.max_degree_fraction))
        return low, high

    def with_overrides(self, **overrides) -> 'GeneratorParams':
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return GeneratorParams(**values)


@dataclass(frozen=True)
class PresetRow:
    truncate_min: bool
    truncate_max: bool
    duplicate: bool
    num_communities: int
    num_vertices: int
    num_edges: int
    intra_ratio: float = DEFAULT_INTRA_RATIO
    dirichlet_alpha: float = DEFAULT_DIRICHLET_ALPHA
    description: str = ''


def _grid_row(flags: str, communities: int, vertices: int, edges: int) -> PresetRow:
    truncate_min, truncate_max, duplicate = (flag == 'T' for flag in flags)
    return PresetRow(truncate_min, truncate_max, duplicate, communities, vertices, edges,
                     description='parameter grid')


# (truncate min, truncate max, duplicated sequence) x communities, with recorded V and E
PRESETS: Dict[str, PresetRow] = {
    'TTT33': _grid_row('TTT', 33, 22599, 899283),
    'TTT150': _grid_row('TTT', 150, 22599, 826861),
    'TTF33': _grid_row('TTF', 33, 22599, 452232),
    'TTF150': _grid_row('TTF', 150, 22599, 421317),
    'TFT33': _grid_row('TFT', 33, 22599, 1059970),
    'TFT150': _grid_row('TFT', 150, 22599, 912644),
    'TFF33': _grid_row('TFF', 33, 22599, 540410),
    'TFF150': _grid_row('TFF', 150, 22598, 471071),
    'FTT33': _grid_row('FTT', 33, 21896, 79683),
    'FTT150': _grid_row('FTT', 150, 22036, 78226),
    'FTF33': _grid_row('FTF', 33, 19220, 39719),
    'FTF150': _grid_row('FTF', 150, 19221, 38408),
    'FFT33': _grid_row('FFT', 33, 22157, 83939),
    'FFT150': _grid_row('FFT', 150, 21958, 81298),
    'FFF33': _grid_row('FFF', 33, 19516, 41378),
    'FFF150': _grid_row('FFF', 150, 19358, 40835),
    # scaling study
    '1M': PresetRow(True, True, True, 1075, 1051218, 11056834, description='scaling study'),
    '2M': PresetRow(True, True, True, 1521, 2103554, 23987218, description='scaling study'),
    '4M': PresetRow(True, True, True, 2151, 4221264, 53175026, description='scaling study'),
    # Graph-Challenge-style: low overlap and size variation vs. high
    'easy': PresetRow(True, True, True, 32, 20000, 473914, intra_ratio=6.0, dirichlet_alpha=50.0,
                      description='low overlap, low size variation'),
    'hard': PresetRow(True, True, True, 32, 20000, 473329,
                      description='high overlap, high size variation'),
}

TINY_PREFIX = 'tiny-'


def list_presets() -> List[str]:
    """All preset names, full scale first, then the desk-scale variants"""
    return list(PRESETS) + [TINY_PREFIX + name for name in PRESETS]


def powerlaw_pmf(low: int, high: int, exponent: float) -> np.ndarray:
    """P(k) ∝ k^exponent on the integers [low, high]"""
    ks = np.arange(low, high + 1, dtype=float)
    log_weights = exponent * np.log(ks)
    weights = np.exp(log_weights - log_weights.max())
    return weights / weights.sum()


def expected_out_degree(low: int, high: int, exponent: float, duplicate: bool) -> float:
    ks = np.arange(low, high + 1, dtype=float)
    mean = float(np.dot(ks, powerlaw_pmf(low, high, exponent)))
    return mean if duplicate else mean / 2.0


def calibrate_exponent(low: int, high: int, target_mean_out: float, duplicate: bool,
                       iterations: int = 60) -> float:
    """
    Exponent whose expected out-degree matches `target_mean_out` (bisection)

    The expected degree grows with the exponent; targets outside the reachable range clamp
    to the end of the search interval.
    """
    lo, hi = EXPONENT_SEARCH_RANGE
    if expected_out_degree(low, high, lo, duplicate) >= target_mean_out:
        return lo
    if expected_out_degree(low, high, hi, duplicate) <= target_mean_out:
        return hi
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        if expected_out_degree(low, high, mid, duplicate) < target_mean_out:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def preset(name: str, seed: Optional[int] = None) -> GeneratorParams:
    """
    Parameters of a named preset

    Args:
        name: A name from list_presets(); 'tiny-' variants divide V and E by 10
        seed: Generator seed (defaults to DEFAULT_SEED)

    Returns:
        GeneratorParams with the exponent calibrated to the recorded edge count
    """
    base = name[len(TINY_PREFIX):] if name.startswith(TINY_PREFIX) else name
    row = PRESETS.get(base)
    if row is None:
        raise GraphInputError(f"unknown preset {name!r}; run the 'presets' command for the list")

    num_vertices, num_edges = row.num_vertices, row.num_edges
    if base != name:
        num_vertices = int(round(num_vertices / DESK_SCALE_DIVISOR))
        num_edges = int(round(num_edges / DESK_SCALE_DIVISOR))

    params = GeneratorParams(
        name=name,
        num_vertices=num_vertices,
        num_communities=row.num_communities,
        truncate_min=row.truncate_min,
        truncate_max=row.truncate_max,
        duplicate_degree_sequence=row.duplicate,
        intra_ratio=row.intra_ratio,
        dirichlet_alpha=row.dirichlet_alpha,
        target_edges=num_edges,
        seed=DEFAULT_SEED if seed is None else seed,
    )
    low, high = params.degree_bounds
    exponent = calibrate_exponent(low, high, num_edges / num_vertices,
                                  row.duplicate)
    return params.with_overrides(powerlaw_exponent=exponent)


def preset_table() -> pd.DataFrame:
    """One row per full-scale preset (the tiny- variants divide V and E by 10)"""
    rows = []
    for name, row in PRESETS.items():
        rows.append({
            'preset': name,
            'truncate_min': row.truncate_min,
            'truncate_max': row.truncate_max,
            'duplicate': row.duplicate,
            'C': row.num_communities,
            'V': row.num_vertices,
            'E': row.num_edges,
            'intra_ratio': row.intra_ratio,
            'dirichlet_alpha': row.dirichlet_alpha,
            'description': row.description,
        })
    return pd.DataFrame(rows)


def community_sizes(num_vertices: int, num_communities: int, alpha: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Dirichlet(alpha) proportions scaled to V, largest remainders rounded up, each size >= 1"""
    shares = rng.dirichlet(np.full(num_communities, alpha))
    spare = num_vertices - num_communities
    raw = shares * spare
    sizes = np.floor(raw).astype(np.int64)
    remainder = spare - int(sizes.sum())
    if remainder > 0:
        order = np.argsort(-(raw - sizes), kind='stable')
        sizes[order[:remainder]] += 1
    return sizes + 1


def _shift_stubs(source: np.ndarray, sink: np.ndarray, count: int,
                 rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Move `count` stub units, drawn without replacement from `source`, over to `sink`"""
    owners = np.repeat(np.arange(len(source)), source)
    picked = owners[rng.choice(len(owners), size=count, replace=False)]
    moved = np.bincount(picked, minlength=len(source))
    return source - moved, sink + moved


def _draw_degrees(params: GeneratorParams, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-vertex (out, in) degrees with Σ out == Σ in

    A split sequence divides each drawn total uniformly, then moves single stubs between
    the two sides until they balance; an odd grand total first raises one vertex by one.
    """
    low, high = params.degree_bounds
    ks = rng.choice(np.arange(low, high + 1), size=params.num_vertices,
                    p=powerlaw_pmf(low, high, params.powerlaw_exponent))
    if params.duplicate_degree_sequence:
        return ks.copy(), ks.copy()

    if ks.sum() % 2:
        room = np.nonzero(ks < high)[0]
        ks[rng.choice(room if len(room) else np.arange(len(ks)))] += 1
    out_degrees = rng.integers(0, ks + 1)
    in_degrees = ks - out_degrees
    excess = int(out_degrees.sum()) - int(ks.sum()) // 2
    if excess > 0:
        out_degrees, in_degrees = _shift_stubs(out_degrees, in_degrees, excess, rng)
    elif excess < 0:
        in_degrees, out_degrees = _shift_stubs(in_degrees, out_degrees, -excess, rng)
    return out_degrees, in_degrees


def _target_communities(truth: np.ndarray, sources: np.ndarray, sizes: np.ndarray,
                        intra_ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Own community with probability r/(r+1), else another one in proportion to size"""
    own = truth[sources]
    num_communities = len(sizes)
    if num_communities == 1:
        return own.copy()
    targets = own.copy()
    inter = rng.random(len(sources)) >= intra_ratio / (intra_ratio + 1.0)
    weights = sizes / sizes.sum()
    pending = np.nonzero(inter)[0]
    while len(pending):
        draws = rng.choice(num_communities, size=len(pending), p=weights)
        accepted = draws != own[pending]
        targets[pending[accepted]] = draws[accepted]
        pending = pending[~accepted]
    return targets


def _group_bounds(labels: np.ndarray, num_groups: int) -> Tuple[np.ndarray, np.ndarray]:
    """(stable order of positions by label, start offset of each label in that order)"""
    order = np.argsort(labels, kind='stable')
    return order, np.searchsorted(labels[order], np.arange(num_groups + 1))


def _rebalance_slots(target_communities: np.ndarray, source_communities: np.ndarray,
                     stub_totals: np.ndarray,
                     rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """
    Redirect edge slots so each community receives exactly as many as its in-stubs

    A community with surplus slots gives them up inter-community ones first; the freed
    slots go to communities with a deficit in shuffled order. Needs Σ slots == Σ stubs.

    Returns:
        (target community per slot, number of slots redirected)
    """
    C = len(stub_totals)
    balance = np.bincount(target_communities, minlength=C) - stub_totals
    if not balance.any():
        return target_communities, 0

    order, bounds = _group_bounds(target_communities, C)
    freed = []
    for c in np.nonzero(balance > 0)[0]:
        slots = order[bounds[c]:bounds[c + 1]]
        intra = source_communities[slots] == c
        candidates = np.concatenate([rng.permutation(slots[~intra]), rng.permutation(slots[intra])])
        freed.append(candidates[:balance[c]])
    freed = np.concatenate(freed)
    receivers = np.repeat(np.arange(C), np.maximum(-balance, 0))
    rng.shuffle(receivers)

    targets = target_communities.copy()
    targets[freed] = receivers
    return targets, len(freed)


def generate(params: GeneratorParams) -> Tuple[Graph, List[int]]:
    """
    Generate a directed multigraph with planted communities

    Every vertex ends with exactly its drawn in- and out-degree.

    Args:
        params: Generator parameters (seeded)

    Returns:
        (graph, truth assignment); vertices of community c are contiguous
    """
    rng = make_rng(params.seed, STREAM_GENERATOR)
    V, C = params.num_vertices, params.num_communities

    sizes = community_sizes(V, C, params.dirichlet_alpha, rng)
    truth = np.repeat(np.arange(C), sizes)
    out_degrees, in_degrees = _draw_degrees(params, rng)

    sources = np.repeat(np.arange(V), out_degrees)
    target_communities = _target_communities(truth, sources, sizes, params.intra_ratio, rng)
    stub_totals = np.bincount(truth, weights=in_degrees, minlength=C).astype(np.int64)
    target_communities, redirected = _rebalance_slots(target_communities, truth[sources],
                                                      stub_totals, rng)

    starts = np.concatenate([[0], np.cumsum(sizes)])
    order, bounds = _group_bounds(target_communities, C)
    targets = np.empty(len(sources), dtype=np.int64)
    for c in range(C):
        members = np.arange(starts[c], starts[c + 1])
        stubs = np.repeat(members, in_degrees[members])
        rng.shuffle(stubs)
        targets[order[bounds[c]:bounds[c + 1]]] = stubs

    pairs, counts = np.unique(sources * V + targets, return_counts=True)
    edge_counts = {(int(p // V), int(p % V)): int(m) for p, m in zip(pairs, counts)}
    graph = Graph(V, edge_counts)
    logger.info("[GEN] %s: V=%d C=%d E=%d (%d slots redirected to balance communities)",
                params.name, V, C, graph.num_edges, redirected)
    return graph, truth.tolist()


def realized_stats(g: Graph, truth: List[int]) -> Dict[str, float]:
    """Measured properties of a generated graph"""
    intra = sum(m for u, w, m in g.edges() if truth[u] == truth[w])
    sizes = pd.Series(truth).value_counts()
    degrees = g.d_total
    return {
        'edges': g.num_edges,
        'intra_fraction': intra / g.num_edges if g.num_edges else 0.0,
        'min_total_degree': min(degrees) if degrees else 0,
        'max_total_degree': max(degrees) if degrees else 0,
        'min_community_size': int(sizes.min()),
        'max_community_size': int(sizes.max()),
    }


def format_manifest(params: GeneratorParams, stats: Dict[str, float]) -> str:
    """key=value lines: parameters sorted by key, then realized_* statistics"""
    lines = [f"{key}={value}" for key, value in sorted(params.model_dump().items())]
    lines += [f"realized_{key}={value}" for key, value in stats.items()]
    return '\n'.join(lines) + '\n'


def write_generated(out_dir: str, params: GeneratorParams, g: Graph,
                    truth: List[int]) -> Dict[str, str]:
    """
    Write edges.tsv, truth.tsv and manifest.txt into out_dir

    Returns:
        Mapping of file role to path
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        'edges': os.path.join(out_dir, 'edges.tsv'),
        'truth': os.path.join(out_dir, 'truth.tsv'),
        'manifest': os.path.join(out_dir, 'manifest.txt'),
    }
    write_edge_list(paths['edges'], g)
    write_partition(paths['truth'], truth)
    with open(paths['manifest'], 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(format_manifest(params, realized_stats(g, truth)))
    logger.info("[GEN] Wrote %s", ', '.join(paths.values()))
    return paths


def expected_edges(params: GeneratorParams) -> float:
    low, high = params.degree_bounds
    return params.num_vertices * expected_out_degree(low, high, params.powerlaw_exponent,
                                                     params.duplicate_degree_sequence)


def load_params(path: str, base: Optional[GeneratorParams] = None) -> GeneratorParams:
    """
    Read key=value generator parameters from a file

    A 'preset' key selects the starting point; the remaining keys override it. Without a
    preset key or base, the file must name num_vertices and num_communities.
    """
    with open(path, 'r', encoding='utf-8') as handle:
        values: Dict[str, str] = parse_params_text(handle.read(), source=str(path))

    # manifests carry realized statistics and unset optionals; both are skipped
    values = {k: v for k, v in values.items() if not k.startswith('realized_') and v != 'None'}
    preset_name = values.pop('preset', None)
    if preset_name is not None:
        base = preset(preset_name)
    if base is None:
        return GeneratorParams(**values)
    return base.with_overrides(**values)
