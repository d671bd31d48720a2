#!/usr/bin/env python3
"""
Tests for partition quality metrics: NMI, normalized description length and rank correlation
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.analysis.blockmodel import build, description_length, singleton
from src.analysis.metrics import contingency_table, nmi, normalized_dl, spearman
from src.data.graph import Graph
from src.errors import GraphInputError

labelings = st.integers(min_value=1, max_value=40).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 5), min_size=n, max_size=n),
                        st.lists(st.integers(0, 5), min_size=n, max_size=n)))


def test_identical_partitions_up_to_relabeling():
    assert nmi([0, 0, 1, 1, 2], [7, 7, 3, 3, 9]) == 1.0


def test_constant_against_balanced_is_zero():
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    assert nmi([4, 4, 4], [1, 1, 1]) == 1.0


def test_small_case_matches_hand_computation():
    # joint counts: (0,0)=1, (0,1)=1, (1,1)=2
    h_a = math.log(2)
    h_b = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    mutual = (0.25 * math.log(0.25 / (0.5 * 0.25))
              + 0.25 * math.log(0.25 / (0.5 * 0.75))
              + 0.5 * math.log(0.5 / (0.5 * 0.75)))
    assert nmi([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(2 * mutual / (h_a + h_b))


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_nmi_is_symmetric_and_bounded(pair):
    a, b = pair
    assert nmi(a, b) == nmi(b, a)
    assert 0.0 <= nmi(a, b) <= 1.0


@settings(max_examples=100, deadline=None)
@given(labelings)
def test_nmi_ignores_label_names(pair):
    a, b = pair
    relabeled = [10 * label + 3 for label in a]
    assert nmi(relabeled, b) == pytest.approx(nmi(a, b), abs=1e-12)


def test_nmi_rejects_mismatched_lengths():
    with pytest.raises(GraphInputError):
        nmi([0, 1], [0])
    with pytest.raises(GraphInputError):
        nmi([], [])


def test_contingency_table_counts():
    table = contingency_table([0, 0, 1], [1, 1, 1])
    assert table.loc[0, 1] == 2
    assert table.loc[1, 1] == 1


def test_single_community_normalizes_to_one():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)])
    dl = description_length(build(g, [0] * 5))
    assert normalized_dl(dl, g.num_vertices, g.num_edges) == pytest.approx(1.0)


def test_normalized_dl_orders_like_dl():
    g = Graph.from_edges(4, [(0, 1), (1, 0), (2, 3), (3, 2)])
    paired = description_length(build(g, [0, 0, 1, 1]))
    split = description_length(singleton(g))
    assert (normalized_dl(paired, 4, 4) < normalized_dl(split, 4, 4)) == (paired < split)


def test_normalized_dl_needs_edges():
    with pytest.raises(GraphInputError):
        normalized_dl(1.0, 3, 0)


def test_spearman():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3], [5, 9, 7]) == pytest.approx(0.5)
    assert math.isnan(spearman([1.0], [2.0]))
    assert math.isnan(spearman([1, 2, 3], [1, 1, 1]))
    with pytest.raises(GraphInputError):
        spearman([1, 2], [1])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
