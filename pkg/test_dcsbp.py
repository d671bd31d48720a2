#!/usr/bin/env python3
"""
Tests for divide-and-conquer SBP: partial-result codec, pairwise combination,
the combine tree and the full run
"""

import itertools
import time

import numpy as np
import pytest

import src.distributed.dcsbp as dcsbp_module
from src.analysis.metrics import nmi
from src.analysis.sbp import sbp
from src.data.graph import Graph, round_robin_split
from src.data.sbp_config import SbpConfig
from src.distributed.dcsbp import (PartialResult, assemble, combine_pair, combine_partials,
                                   dcsbp_run, decode_partial, encode_partial)
from src.distributed.inprocess_communicator import run_inprocess
from src.errors import GraphInputError


def planted_pair(block_size=10, p=0.6, seed=0):
    rng = np.random.default_rng(seed)
    edges = []
    for block in range(2):
        members = range(block * block_size, (block + 1) * block_size)
        edges.extend((u, w) for u, w in itertools.permutations(members, 2) if rng.random() < p)
    edges.append((0, block_size))
    truth = [0] * block_size + [1] * block_size
    return Graph.from_edges(2 * block_size, edges), truth


def fast_config(**overrides):
    return SbpConfig.from_profile('fast', **overrides)


def test_partial_codec_round_trip():
    partial = PartialResult(3, (1, 5, 9), [0, 1, 0], 2, 1)
    assert decode_partial(encode_partial(partial)) == partial


def test_partial_requires_matching_lengths():
    with pytest.raises(GraphInputError):
        PartialResult(0, (0, 1), [0], 1)


def test_single_communities_merge_into_one():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    pa = PartialResult(0, (0, 2), [0, 0], 1)
    pb = PartialResult(1, (1, 3), [0, 0], 1)
    combined = combine_pair(pa, pb, g)
    assert combined.num_communities == 1
    assert combined.vertex_map == (0, 1, 2, 3)
    assert combined.assignment == [0, 0, 0, 0]


def test_combine_matches_structural_twins():
    g, truth = planted_pair()
    # each half holds one planted block per rank, labelled in opposite orders
    pa = PartialResult(0, tuple(range(0, 20, 2)), [truth[v] for v in range(0, 20, 2)], 2)
    pb = PartialResult(1, tuple(range(1, 20, 2)), [1 - truth[v] for v in range(1, 20, 2)], 2)
    combined = combine_pair(pa, pb, g)
    assert combined.num_communities == pa.num_communities
    labels = dict(zip(combined.vertex_map, combined.assignment))
    assert nmi(truth, [labels[v] for v in range(20)]) == 1.0


def test_combine_is_deterministic_and_keeps_first_count():
    g, _ = planted_pair(block_size=8)
    pa = PartialResult(0, tuple(range(0, 16, 2)), [0, 1, 2, 0, 1, 2, 0, 1], 3)
    pb = PartialResult(1, tuple(range(1, 16, 2)), [0, 1, 0, 1, 0, 1, 0, 1], 2)
    first = combine_pair(pa, pb, g)
    assert first == combine_pair(pa, pb, g)
    assert first.num_communities == 3


def test_combine_rejects_overlap():
    g, _ = planted_pair(block_size=4)
    pa = PartialResult(0, (0, 1), [0, 0], 1)
    pb = PartialResult(1, (1, 2), [0, 0], 1)
    with pytest.raises(GraphInputError):
        combine_pair(pa, pb, g)


@pytest.mark.parametrize("count, expected", [(1, 0), (4, 0), (5, 1), (8, 4), (13, 9)])
def test_combine_tree_size(count, expected):
    g = Graph.from_edges(count * 2, [(v, (v + 1) % (count * 2)) for v in range(count * 2)])
    parts = round_robin_split(g, count)
    partials = [PartialResult(p.owner_rank, p.vertex_map, [0] * len(p.vertex_map), 1)
                for p in parts]
    remaining, combines = combine_partials(partials, g, 4)
    assert combines == expected
    assert len(remaining) == min(count, 4)
    assert sorted(v for p in remaining for v in p.vertex_map) == list(range(count * 2))


def test_assemble_uses_disjoint_label_ranges():
    partials = [PartialResult(0, (0, 2), [0, 1], 2), PartialResult(1, (1, 3), [0, 0], 1)]
    assert assemble(4, partials) == [0, 2, 1, 2]
    with pytest.raises(GraphInputError):
        assemble(5, partials)


@pytest.mark.parametrize("seed", [0, 4])
def test_single_rank_equals_serial(seed):
    g, _ = planted_pair(seed=seed)
    cfg = fast_config(seed=seed)
    serial = sbp(g, cfg)
    (result,) = run_inprocess(1, lambda comm: dcsbp_run(g, cfg, comm))
    assert result.assignment == serial.assignment
    assert result.description_length == serial.description_length
    assert result.stats['combines'] == 0
    assert result.stats['island_fraction'] == 0.0


def test_multi_rank_run_agrees_on_all_ranks():
    g, truth = planted_pair(block_size=12, seed=3)
    cfg = fast_config(seed=2)
    results = run_inprocess(3, lambda comm: dcsbp_run(g, cfg, comm), timeout=60.0)
    first = results[0]
    for result in results[1:]:
        assert result.assignment == first.assignment
        assert result.description_length == first.description_length
        assert result.num_communities == first.num_communities
    assert len(first.assignment) == g.num_vertices
    assert 0.0 <= first.stats['island_fraction'] <= 1.0
    assert first.stats['combines'] == 0
    assert any(r.kind == 'mcmc' and r.phase == 0 for r in first.trace)


def test_islands_on_alternating_cycle():
    g = Graph.from_edges(8, [(v, (v + 1) % 8) for v in range(8)])
    results = run_inprocess(2, lambda comm: dcsbp_run(g, fast_config(seed=1), comm), timeout=60.0)
    assert results[0].stats['island_fraction'] == 1.0


def test_slow_root_work_does_not_time_out_waiting_ranks(monkeypatch):
    real_combine = dcsbp_module.combine_partials

    def slow_combine(*args, **kwargs):
        time.sleep(0.6)
        return real_combine(*args, **kwargs)

    monkeypatch.setattr(dcsbp_module, 'combine_partials', slow_combine)
    g, _ = planted_pair(block_size=12, seed=3)
    cfg = fast_config(seed=2)
    results = run_inprocess(3, lambda comm: dcsbp_run(g, cfg, comm), timeout=0.2)
    assert all(r.assignment == results[0].assignment for r in results)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
