"""
Formatting utilities for run summaries, per-phase traces and benchmark tables.
Handles duration formatting and CSV serialization.
"""

import math
import shlex
from typing import Iterable, List, Optional, Sequence

import pandas as pd

from ..analysis.records import PartitionResult, PhaseRecord, phase_seconds
from ..data.config import BENCH_COLUMNS, TRACE_COLUMNS


def format_duration(seconds: float) -> str:
    """Format a number of seconds as a short human readable string"""
    if seconds < 60:
        return f"{seconds:.2f}s"
    total_seconds = int(seconds)
    hours = total_seconds // 3600
    minutes = (total_seconds % 3600) // 60
    if hours > 0:
        return f"{hours}h {minutes}m"
    else:
        return f"{minutes}m {total_seconds % 60}s"


def _format_metric(value: Optional[float], digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return 'n/a'
    return f"{value:.{digits}f}"


def format_summary_line(algo: str, ranks: int, result: PartitionResult, dl_norm: Optional[float],
                        nmi: Optional[float], seed: int, argv: Sequence[str]) -> str:
    """
    One-line run summary

    The line embeds the seed and the full command line so a run can be repeated from it.
    """
    seconds = result.timings.get('wall_seconds', result.timings.get('total_seconds', 0.0))
    merge_seconds, mcmc_seconds = phase_seconds(result.trace)
    fields = [
        f"algo={algo}",
        f"N={ranks}",
        f"C={result.num_communities}",
        f"DL={result.description_length:.3f}",
        f"DL_norm={_format_metric(dl_norm)}",
        f"NMI={_format_metric(nmi)}",
        f"seconds={seconds:.3f}",
        f"merge_seconds={merge_seconds:.3f}",
        f"mcmc_seconds={mcmc_seconds:.3f}",
        f"seed={seed}",
        f"cmd={shlex.join(argv)}",
    ]
    return ' '.join(fields)


def trace_to_frame(trace: Iterable[PhaseRecord]) -> pd.DataFrame:
    """Per-phase trace as a DataFrame with the TRACE_COLUMNS schema"""
    return pd.DataFrame([record.to_dict() for record in trace], columns=TRACE_COLUMNS)


def write_trace_csv(path: str, trace: Iterable[PhaseRecord]) -> str:
    trace_to_frame(trace).to_csv(path, index=False, lineterminator='\n')
    return path


def bench_frame(rows: List[dict]) -> pd.DataFrame:
    """Benchmark rows in BENCH_COLUMNS order (missing values left empty)"""
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def write_bench_csv(path: str, frame: pd.DataFrame) -> str:
    frame.to_csv(path, index=False, float_format='%.6f', lineterminator='\n')
    return path


def format_preset_table(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False)
