"""
Partition quality metrics.
Handles NMI against ground truth, normalized description length and rank correlation.
"""

import math
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import GraphInputError
from .blockmodel import null_description_length


def contingency_table(a: Sequence[int], b: Sequence[int]) -> pd.DataFrame:
    """Counts of vertices per (label in a, label in b)"""
    if len(a) != len(b):
        raise GraphInputError(f"partitions differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise GraphInputError("partitions must not be empty")
    return pd.crosstab(pd.Series(list(a), name='a'), pd.Series(list(b), name='b'))


def _entropy(counts: np.ndarray, total: int) -> float:
    p = counts[counts > 0] / total
    return -math.fsum((p * np.log(p)).tolist())


def nmi(a: Sequence[int], b: Sequence[int]) -> float:
    """
    Normalized mutual information, 2·I(A;B) / (H(A) + H(B)), natural logarithm

    Args:
        a: Labels per vertex
        b: Labels per vertex (same length)

    Returns:
        Value in [0, 1]; 1 when both entropies are 0, 0 when exactly one is
    """
    table = contingency_table(a, b).to_numpy(dtype=float)
    total = table.sum()
    row_counts = table.sum(axis=1)
    col_counts = table.sum(axis=0)

    h_a = _entropy(row_counts, total)
    h_b = _entropy(col_counts, total)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0

    rows, cols = np.nonzero(table)
    joint = table[rows, cols]
    # exactly rounded sums keep nmi(a, b) == nmi(b, a) bit-for-bit
    terms = joint / total * np.log(joint * total / (row_counts[rows] * col_counts[cols]))
    mutual = math.fsum(terms.tolist())
    return min(1.0, max(0.0, 2.0 * mutual / (h_a + h_b)))


def normalized_dl(dl: float, num_vertices: int, num_edges: int) -> float:
    """DL divided by the single-community description length"""
    if num_edges < 1:
        raise GraphInputError("normalized DL is undefined for a graph without edges")
    return dl / null_description_length(num_vertices, num_edges)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; NaN when fewer than two points or a constant input"""
    if len(x) != len(y):
        raise GraphInputError(f"series differ in length: {len(x)} vs {len(y)}")
    if len(x) < 2:
        return math.nan
    value = pd.Series(list(x), dtype=float).corr(pd.Series(list(y), dtype=float),
                                                 method='spearman')
    return float(value)
