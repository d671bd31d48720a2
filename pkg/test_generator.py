#!/usr/bin/env python3
"""
Tests for the DCSBM generator: presets, determinism, the stub-assignment law,
degree truncation and the written artifacts
"""

import numpy as np
import pytest

from src.analysis.rng import STREAM_GENERATOR, make_rng
from src.data.config import TRUNCATED_MAX_DEGREE
from src.data.data_loader import load_graph, load_truth
from src.data.graph_generator import (PRESETS, GeneratorParams, calibrate_exponent,
                                      community_sizes, expected_edges, expected_out_degree,
                                      generate, list_presets, load_params, preset, preset_table,
                                      realized_stats, write_generated)
from src.errors import GraphInputError


def small_params(**overrides):
    values = dict(num_vertices=600, num_communities=6, seed=1)
    values.update(overrides)
    return GeneratorParams(**values)


def test_grid_presets_follow_table():
    ttt = preset("TTT33")
    assert (ttt.truncate_min, ttt.truncate_max, ttt.duplicate_degree_sequence) == (True, True, True)
    assert (ttt.num_communities, ttt.num_vertices, ttt.target_edges) == (33, 22599, 899283)
    fff = preset("FFF150")
    assert (fff.truncate_min, fff.truncate_max, fff.duplicate_degree_sequence) == (False, False, False)
    assert fff.num_communities == 150


def test_tiny_presets_divide_by_ten():
    tiny = preset("tiny-FFF150")
    assert tiny.num_vertices == 1936
    assert tiny.num_communities == 150
    assert tiny.target_edges == 4084
    assert "tiny-easy" in list_presets()


def test_unknown_preset_is_rejected():
    with pytest.raises(GraphInputError):
        preset("TTT34")


def test_preset_table_lists_every_preset():
    table = preset_table()
    assert list(table['preset']) == list(PRESETS)
    assert table.loc[table['preset'] == 'TTF150', 'E'].item() == 421317


@pytest.mark.parametrize("name", list(PRESETS))
def test_calibrated_exponent_matches_recorded_edges(name):
    params = preset(name)
    assert expected_edges(params) == pytest.approx(params.target_edges, rel=0.01)


def test_calibration_clamps_unreachable_targets():
    assert calibrate_exponent(10, 100, 1.0, True) == -8.0
    assert calibrate_exponent(10, 100, 500.0, True) == 4.0
    exponent = calibrate_exponent(1, 50, 6.0, False)
    assert expected_out_degree(1, 50, exponent, False) == pytest.approx(6.0, rel=1e-6)


def test_full_scale_edge_count_within_twenty_percent():
    params = preset("FFF33", seed=4)
    g, truth = generate(params)
    assert abs(g.num_edges - params.target_edges) < 0.2 * params.target_edges
    assert g.num_vertices == params.num_vertices
    assert len(truth) == params.num_vertices


def test_generation_is_deterministic():
    first, truth_a = generate(small_params())
    second, truth_b = generate(small_params())
    assert first.edge_counts() == second.edge_counts()
    assert truth_a == truth_b
    third, _ = generate(small_params(seed=2))
    assert third.edge_counts() != first.edge_counts()


def test_single_community_is_all_intra():
    g, truth = generate(small_params(num_vertices=80, num_communities=1))
    assert set(truth) == {0}
    assert realized_stats(g, truth)['intra_fraction'] == 1.0


def test_intra_fraction_follows_ratio():
    intra = total = 0
    for seed in range(10):
        g, truth = generate(small_params(seed=seed, intra_ratio=2.0))
        intra += sum(m for u, w, m in g.edges() if truth[u] == truth[w])
        total += g.num_edges
    assert intra / total == pytest.approx(2 / 3, abs=0.05)


def test_truncated_duplicated_degrees_reach_twenty():
    g, truth = generate(small_params(num_vertices=1000, num_communities=5))
    assert min(g.d_total) >= 20
    assert max(g.d_out) <= 100


def test_truncated_split_degrees_reach_ten():
    g, truth = generate(small_params(num_vertices=1000, num_communities=5,
                                     duplicate_degree_sequence=False))
    assert min(g.d_total) >= 10
    assert max(g.d_total) <= TRUNCATED_MAX_DEGREE


def test_untruncated_minimum_is_one():
    params = small_params(truncate_min=False, truncate_max=False)
    assert params.degree_bounds == (1, 30)


def test_community_sizes_cover_all_vertices():
    sizes = community_sizes(1000, 33, 2.0, make_rng(5, STREAM_GENERATOR))
    assert sizes.sum() == 1000
    assert sizes.min() >= 1
    flat = community_sizes(1000, 10, 1000.0, make_rng(5, STREAM_GENERATOR))
    assert flat.max() / flat.min() < sizes.max() / sizes.min()


def test_truth_blocks_are_contiguous():
    _, truth = generate(small_params())
    assert truth == sorted(truth)
    assert len(set(truth)) == 6


def test_params_validation():
    with pytest.raises(ValueError):
        GeneratorParams(num_vertices=5, num_communities=5)
    with pytest.raises(ValueError):
        GeneratorParams(num_vertices=50, num_communities=2, intra_ratio=0.0)
    with pytest.raises(ValueError):
        GeneratorParams(num_vertices=50, num_communities=2, d_min=0)


def test_written_artifacts_round_trip(tmp_path):
    params = small_params().with_overrides(intra_ratio=4.0)
    g, truth = generate(params)
    paths = write_generated(str(tmp_path / "run"), params, g, truth)
    assert load_graph(paths['edges']).edge_counts() == g.edge_counts()
    assert load_truth(paths['truth']) == truth
    manifest = open(paths['manifest']).read().splitlines()
    assert "intra_ratio=4.0" in manifest
    assert any(line.startswith("realized_intra_fraction=") for line in manifest)

    again = write_generated(str(tmp_path / "again"), params, *generate(params))
    for role in paths:
        assert open(paths[role], 'rb').read() == open(again[role], 'rb').read()


def test_params_file_overrides_preset(tmp_path):
    path = tmp_path / "params.txt"
    path.write_text("# sweep override\npreset=tiny-TTT33\nintra_ratio=4\nseed=9\n")
    params = load_params(str(path))
    assert params.intra_ratio == 4.0
    assert params.seed == 9
    assert params.num_vertices == 2260
    assert params.num_communities == 33


def test_manifest_can_be_read_back(tmp_path):
    params = small_params(intra_ratio=3.0)
    g, truth = generate(params)
    paths = write_generated(str(tmp_path), params, g, truth)
    assert load_params(paths['manifest']) == params


def test_powerlaw_degrees_are_heavy_tailed():
    g, _ = generate(small_params(num_vertices=2000, num_communities=4))
    degrees = np.asarray(g.d_out)
    assert np.median(degrees) < degrees.mean()


def test_duplicated_degrees_are_realized_exactly():
    g, _ = generate(small_params())
    assert g.d_out == g.d_in
    low, high = small_params().degree_bounds
    assert low <= min(g.d_out) and max(g.d_out) <= high


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_sparse_split_preset_keeps_every_vertex_connected(seed):
    params = preset("tiny-FFF150", seed=seed)
    g, truth = generate(params)
    low, high = params.degree_bounds
    assert min(g.d_total) >= low == 1
    assert max(g.d_total) <= high
    assert sum(g.d_total) == 2 * g.num_edges
    assert abs(g.num_edges - params.target_edges) < 0.2 * params.target_edges
    assert len(set(truth)) == 150


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
