"""
Benchmark sweep over presets, algorithms, rank counts and seeds.
Failures are recorded as rows with an error status; the sweep always runs to the end.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..data.graph import Graph
from ..data.graph_generator import generate, preset
from ..data.sbp_config import SbpConfig
from ..distributed.launcher import run_algorithm
from ..presentation.formatters import bench_frame
from .metrics import nmi, normalized_dl, spearman

logger = logging.getLogger(__name__)

STATUS_OK = 'ok'


def bench_cells(presets: Sequence[str], algos: Sequence[str], ranks_list: Sequence[int],
                seeds: Sequence[int]) -> List[Tuple[str, str, int, int]]:
    """
    Cross product of sweep parameters, ordered by preset, seed, algo and ranks

    The serial algorithm only appears with one rank.
    """
    cells = []
    for preset_name in presets:
        for seed in seeds:
            for algo in algos:
                for ranks in ranks_list:
                    if algo == 'serial' and ranks != 1:
                        continue
                    cells.append((preset_name, algo, ranks, seed))
    return cells


def _error_row(preset_name: str, algo: str, ranks: int, seed: int, error: Exception) -> Dict:
    return {
        'preset': preset_name, 'algo': algo, 'ranks': ranks, 'seed': seed,
        'nmi': math.nan, 'dl_norm': math.nan, 'island_fraction': math.nan,
        'seconds': math.nan, 'final_C': -1, 'status': f"error:{type(error).__name__}",
    }


def run_bench(presets: Sequence[str], algos: Sequence[str], ranks_list: Sequence[int],
              seeds: Sequence[int], cfg: SbpConfig, backend: str = 'inprocess',
              progress: Optional[Callable[[Dict], None]] = None) -> pd.DataFrame:
    """
    Run every benchmark cell and collect one row per cell

    Args:
        presets: Generator preset names
        algos: Algorithms ('serial', 'dcsbp', 'edist')
        ranks_list: Rank counts N
        seeds: Seeds; each seeds both the generator and the inference run
        cfg: Inference settings (the seed field is replaced per cell)
        backend: Communicator backend for distributed cells
        progress: Optional callback receiving each finished row

    Returns:
        DataFrame with the benchmark CSV columns
    """
    graphs: Dict[Tuple[str, int], Tuple[Graph, List[int]]] = {}
    rows = []
    for preset_name, algo, ranks, seed in bench_cells(presets, algos, ranks_list, seeds):
        try:
            key = (preset_name, seed)
            if key not in graphs:
                graphs[key] = generate(preset(preset_name, seed=seed))
            g, truth = graphs[key]

            result = run_algorithm(g, cfg.with_overrides(seed=seed), algo=algo, ranks=ranks,
                                   backend=backend)
            row = {
                'preset': preset_name, 'algo': algo, 'ranks': ranks, 'seed': seed,
                'nmi': nmi(truth, result.assignment),
                'dl_norm': normalized_dl(result.description_length, g.num_vertices, g.num_edges),
                'island_fraction': float(result.stats.get('island_fraction', 0.0)),
                'seconds': result.timings['wall_seconds'],
                'final_C': result.num_communities,
                'status': STATUS_OK,
            }
        except Exception as e:
            logger.warning("[BENCH] %s %s N=%d seed=%d failed: %s", preset_name, algo, ranks,
                           seed, e)
            row = _error_row(preset_name, algo, ranks, seed, e)

        rows.append(row)
        if progress is not None:
            progress(row)
    return bench_frame(rows)


def island_correlation(frame: pd.DataFrame, algo: str = 'dcsbp') -> float:
    """Spearman correlation between island fraction and NMI over the successful rows of one algorithm"""
    rows = frame[(frame['algo'] == algo) & (frame['status'] == STATUS_OK)]
    return spearman(rows['island_fraction'].tolist(), rows['nmi'].tolist())


def seed_list(count: int, base_seed: int) -> List[int]:
    return [base_seed + i for i in range(count)]


def parse_list(text: str, cast=str) -> List:
    """Comma separated values, empty items dropped"""
    return [cast(item.strip()) for item in text.split(',') if item.strip()]


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Median NMI and DL_norm per (preset, algo, ranks) over successful rows"""
    ok = frame[frame['status'] == STATUS_OK]
    if ok.empty:
        return pd.DataFrame(columns=['preset', 'algo', 'ranks', 'nmi', 'dl_norm'])
    return (ok.groupby(['preset', 'algo', 'ranks'], sort=False)[['nmi', 'dl_norm']]
            .median().reset_index())
