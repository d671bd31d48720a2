#!/usr/bin/env python3
"""
Tests for proposals, Metropolis-Hastings acceptance, the merge and MCMC phases,
the golden-ratio bracket and the full SBP driver
"""

import itertools
from collections import Counter

import numpy as np
import pytest

from src.analysis.block_merge import apply_best_merges, block_merge_phase
from src.analysis.blockmodel import build, description_length, singleton
from src.analysis.mcmc import hybrid_sweep, mcmc_phase, split_by_degree
from src.analysis.metrics import nmi
from src.analysis.proposals import (BlockmodelView, accept_move, proposal_probability,
                                    propose_target)
from src.analysis.records import MergeProposal, SweepStats
from src.analysis.rng import STREAM_MCMC, make_rng
from src.analysis.sbp import GoldenBracket, sbp
from src.data.graph import Graph
from src.data.sbp_config import SbpConfig
from src.errors import GraphInputError, InvalidOperationError


def planted_pair(block_size=25, seed=0):
    """Two dense directed blocks with a few cross edges"""
    rng = np.random.default_rng(seed)
    edges = []
    for block in range(2):
        members = range(block * block_size, (block + 1) * block_size)
        edges.extend((u, w) for u, w in itertools.permutations(members, 2) if rng.random() < 0.6)
    for _ in range(5):
        edges.append((int(rng.integers(block_size)), int(rng.integers(block_size, 2 * block_size))))
    truth = [0] * block_size + [1] * block_size
    return Graph.from_edges(2 * block_size, edges), truth


def fast_config(**overrides):
    return SbpConfig.from_profile('fast', **overrides)


def test_acceptance_rate_for_log_two():
    rng = make_rng(7, STREAM_MCMC)
    trials = 100_000
    accepted = sum(accept_move(np.log(2.0), 0.25, 0.25, 1.0, rng) for _ in range(trials))
    assert abs(accepted / trials - 0.5) < 0.01


def test_improving_moves_always_accepted():
    rng = make_rng(1, STREAM_MCMC)
    assert all(accept_move(-1.0, 0.3, 0.3, 3.0, rng) for _ in range(1000))


def test_non_finite_delta_rejected_and_counted():
    rng = make_rng(1, STREAM_MCMC)
    stats = SweepStats()
    assert accept_move(float('nan'), 0.5, 0.5, 1.0, rng, stats) is False
    assert accept_move(float('inf'), 0.5, 0.5, 1.0, rng, stats) is False
    assert stats.numeric_warnings == 2


def test_proposal_probabilities_sum_to_one():
    g, truth = planted_pair(block_size=6)
    assignment = [v % 4 for v in range(g.num_vertices)]
    b = build(g, assignment)
    view = BlockmodelView(b)
    for vertex in (0, 5, 7):
        current = b.assignment[vertex]
        neighbors = Counter()
        for target, m in g.out_neighbors[vertex]:
            neighbors[b.assignment[target]] += m
        for source, m in g.in_neighbors[vertex]:
            neighbors[b.assignment[source]] += m
        degree = g.d_total[vertex]
        total = sum(proposal_probability(view, dict(neighbors), degree, current, c)
                    for c in range(b.num_communities) if c != current)
        assert total == pytest.approx(1.0)


def test_proposal_frequencies_match_probabilities():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (0, 3), (5, 1), (2, 2)])
    b = build(g, [0, 0, 1, 2, 2, 3])
    counts = {0: 1, 1: 2, 2: 1}
    degree = 4
    rng = make_rng(3, STREAM_MCMC)
    draws = Counter()
    trials = 20_000
    for _ in range(trials):
        candidate, p_forward = propose_target(b, counts, degree, 0, rng)
        assert candidate != 0
        draws[candidate] += 1
    for candidate in (1, 2, 3):
        expected = proposal_probability(BlockmodelView(b), counts, degree, 0, candidate)
        assert draws[candidate] / trials == pytest.approx(expected, abs=0.015)


def test_zero_degree_source_proposes_uniformly():
    b = build(Graph.from_edges(4, [(0, 1)]), [0, 1, 2, 3])
    candidate, probability = propose_target(b, {}, 0, 3, make_rng(0, STREAM_MCMC))
    assert candidate in (0, 1, 2)
    assert probability == pytest.approx(1 / 3)


def test_single_community_cannot_propose():
    b = build(Graph.from_edges(2, [(0, 1)]), [0, 0])
    with pytest.raises(ValueError):
        propose_target(b, {0: 1}, 1, 0, make_rng(0, STREAM_MCMC))


def test_best_merges_skip_already_joined_pairs():
    b = singleton(Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)]))
    proposals = [MergeProposal(0, 1, -3.0), MergeProposal(1, 0, -2.0), MergeProposal(2, 3, -1.0)]
    applied = apply_best_merges(b, proposals, 1)
    assert applied == 2
    assert b.num_communities == 2


def test_block_merge_phase_reduces_towards_target():
    g, _ = planted_pair(block_size=10)
    b = singleton(g)
    block_merge_phase(g, b, fast_config(seed=5), target=10)
    assert 10 <= b.num_communities < 20
    assert b.is_compact
    assert sorted(set(b.assignment)) == list(range(b.num_communities))


def test_block_merge_phase_rejects_bad_targets():
    g, _ = planted_pair(block_size=4)
    b = singleton(g)
    with pytest.raises(InvalidOperationError):
        block_merge_phase(g, b, fast_config(), target=8)
    with pytest.raises(InvalidOperationError):
        block_merge_phase(g, b, fast_config(), target=0)


def test_mcmc_threshold_one_runs_single_sweep():
    g, _ = planted_pair(block_size=8)
    b = build(g, [v % 3 for v in range(g.num_vertices)])
    result = mcmc_phase(g, b, fast_config(), threshold=1.0)
    assert result.sweeps == 1
    assert len(result.dl_trace) == 1


def test_mcmc_does_not_leave_planted_partition():
    g, truth = planted_pair()
    b = build(g, truth)
    result = mcmc_phase(g, b, fast_config(seed=2, beta=3.0))
    assert nmi(truth, b.assignment) == 1.0
    assert result.stats.accepted <= 2


def test_hybrid_sweep_is_deterministic_with_workers():
    g, _ = planted_pair(block_size=12)
    cfg = fast_config(seed=11, workers=4, hybrid_high_degree_fraction=0.1)
    start = [v % 5 for v in range(g.num_vertices)]

    outcomes = []
    for _ in range(2):
        b = build(g, start)
        moves = hybrid_sweep(g, b, cfg, cfg.workers, sweep_index=0)
        outcomes.append((list(b.assignment), moves))
        assert b.cells() == build(g, b.assignment, b.num_slots).cells()
    assert outcomes[0] == outcomes[1]


def test_single_worker_matches_sequential_profile():
    g, _ = planted_pair(block_size=10)
    start = [v % 4 for v in range(g.num_vertices)]
    one_worker = build(g, start)
    sequential = build(g, start)
    hybrid_sweep(g, one_worker, fast_config(seed=4, workers=1), 1)
    hybrid_sweep(g, sequential, fast_config(seed=4, workers=3, hybrid_high_degree_fraction=1.0), 3)
    assert one_worker.assignment == sequential.assignment


def test_split_by_degree_takes_top_fraction():
    g = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (1, 2), (4, 4)])
    high, low = split_by_degree(g, range(5), 0.4)
    assert high == [0, 1] or high == [0, 2]
    assert sorted(high + low) == [0, 1, 2, 3, 4]


def test_golden_bracket_steps():
    b = singleton(Graph.from_edges(2, [(0, 1)]))
    bracket = GoldenBracket()
    bracket.insert(50, 100.0, b)
    assert bracket.next_step(0.5)[1] == 25
    bracket.insert(25, 80.0, b)
    assert bracket.next_step(0.5)[1] == 12
    bracket.insert(12, 90.0, b)
    assert bracket.established
    assert bracket.counts == (50, 25, 12)
    assert bracket.next_step(0.5)[1] == 40
    bracket.insert(40, 85.0, b)
    assert bracket.counts == (40, 25, 12)


def test_golden_bracket_stops_on_narrow_bracket():
    b = singleton(Graph.from_edges(2, [(0, 1)]))
    bracket = GoldenBracket()
    bracket.insert(4, 10.0, b)
    bracket.insert(3, 5.0, b)
    bracket.insert(2, 8.0, b)
    assert bracket.next_step(0.5) is None


def test_golden_bracket_keeps_lower_dl_on_equal_counts():
    b = singleton(Graph.from_edges(2, [(0, 1)]))
    bracket = GoldenBracket()
    bracket.insert(10, 50.0, b)
    bracket.insert(10, 40.0, b)
    bracket.insert(10, 60.0, b)
    assert bracket.best.dl == 40.0
    assert bracket.counts == (10,)


def test_sbp_recovers_planted_pair():
    g, truth = planted_pair()
    counts = []
    for seed in range(3):
        result = sbp(g, fast_config(seed=seed))
        counts.append(result.num_communities)
        assert result.description_length <= description_length(singleton(g))
        assert result.description_length == pytest.approx(
            description_length(build(g, result.assignment)))
        assert len(result.trace) >= 2
    assert 1 <= sorted(counts)[1] <= 3


def test_sbp_is_deterministic():
    g, _ = planted_pair(block_size=12)
    first = sbp(g, fast_config(seed=9))
    second = sbp(g, fast_config(seed=9))
    assert first.assignment == second.assignment
    assert first.description_length == second.description_length


def test_sbp_continuation_starts_with_mcmc():
    g, truth = planted_pair(block_size=10)
    result = sbp(g, fast_config(seed=1), initial_assignment=truth)
    assert result.trace[0].kind == 'mcmc'
    assert result.trace[0].phase == 0
    assert result.stats['phases'] >= 1


def test_sbp_rejects_empty_graph():
    with pytest.raises(GraphInputError):
        sbp(Graph(0, {}), fast_config())


def test_config_validation():
    with pytest.raises(ValueError):
        SbpConfig(convergence_threshold=0.0)
    with pytest.raises(ValueError):
        SbpConfig.from_profile('missing')
    cfg = SbpConfig.from_profile('sequential', seed=3)
    assert cfg.hybrid_high_degree_fraction == 1.0
    assert cfg.seed == 3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
