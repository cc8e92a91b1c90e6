import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import specwalk as sw
from specwalk.bench import (BenchReport, gaussian_seed_priors, run_benchmark,
                            sample_region_seeds)
from specwalk.errors import DimsMismatch


def lmap(vals, dims=None):
    vals = np.asarray(vals)
    return sw.LabelMap(dims or (vals.size, 1), vals)


def test_dice_trivial_cases():
    a = lmap([0, 1, 1, 0])
    assert sw.dice(a, a, 2)[1] == 1.0
    b = lmap([1, 0, 0, 1])
    per, mean = sw.dice(a, b, 2)
    assert per.tolist() == [0.0, 0.0] and mean == 0.0
    # A_1={0,1}, B_1={1,2} -> 2*1/4
    a = lmap([1, 1, 0, 0])
    b = lmap([0, 1, 1, 0])
    per, _ = sw.dice(a, b, 2)
    assert per[1] == 0.5


def test_dice_empty_empty_convention():
    a = lmap([0, 0])
    per, _ = sw.dice(a, a, 2)
    assert per[1] == 1.0


def test_mean_overlap_cases():
    a = lmap([0, 1, 1, 0])
    assert sw.mean_overlap(a, a, 2) == 1.0
    a = lmap([1, 1, 0, 0])
    b = lmap([0, 1, 1, 0])
    assert sw.mean_overlap(a, b, 2) == 0.5
    bg = lmap([0, 0, 0])
    assert sw.mean_overlap(bg, bg, 3) == 1.0


def test_metric_dims_mismatch():
    with pytest.raises(DimsMismatch):
        sw.dice(lmap([0, 1]), lmap([0, 1, 1, 0], (2, 2)), 2)


@given(st.lists(st.integers(0, 2), min_size=4, max_size=12),
       st.lists(st.integers(0, 2), min_size=4, max_size=12))
@settings(max_examples=50, deadline=None)
def test_metrics_symmetric(a_vals, b_vals):
    size = min(len(a_vals), len(b_vals))
    a, b = lmap(a_vals[:size]), lmap(b_vals[:size])
    assert sw.dice(a, b, 3)[1] == pytest.approx(sw.dice(b, a, 3)[1])
    assert sw.mean_overlap(a, b, 3) == pytest.approx(sw.mean_overlap(b, a, 3))
    if a_vals[:size] == b_vals[:size]:
        assert sw.mean_overlap(a, b, 3) == 1.0


def test_phantom_determinism():
    p1 = sw.make_phantom("blobs2d", (12, 12), rng_seed=5, noise_sigma=0.05)
    p2 = sw.make_phantom("blobs2d", (12, 12), rng_seed=5, noise_sigma=0.05)
    assert np.array_equal(p1.image.intensities, p2.image.intensities)
    assert np.array_equal(p1.labels.labels, p2.labels.labels)


def test_phantom_level_sets_without_noise():
    ph = sw.make_phantom("blobs2d", (16, 16), rng_seed=2, noise_sigma=0.0,
                         num_regions=3)
    levels = np.unique(ph.image.intensities)
    assert levels.size == 3
    rebuilt = np.searchsorted(levels, ph.image.intensities)
    assert np.array_equal(rebuilt, ph.labels.labels)


def test_cells_phantom_two_classes():
    ph = sw.make_phantom("cells2d", (32, 32), rng_seed=3, noise_sigma=0.02)
    assert set(np.unique(ph.labels.labels)) == {0, 1}
    # disjoint circles: multiple connected components of label 1
    from scipy import ndimage
    grid = ph.labels.labels.reshape((32, 32), order="F")
    _, count = ndimage.label(grid)
    assert count >= 2


def test_shifted_pair_ground_truth():
    ph = sw.make_phantom("shifted_pair", (12, 12), rng_seed=4, shift=(2, 1))
    assert ph.moving is not None and ph.field is not None
    assert np.allclose(ph.field.vectors, [2.0, 1.0])
    base = ph.image.intensities.reshape((12, 12), order="F")
    moved = ph.moving.intensities.reshape((12, 12), order="F")
    # away from edges and noise, moving(x) equals fixed(x - shift)
    assert np.allclose(moved[4:, 3:][:6, :6], base[2:8, 2:8], atol=0.2)


def test_gaussian_seed_priors_shape():
    ph = sw.make_phantom("blobs2d", (12, 12), rng_seed=6, noise_sigma=0.02,
                         num_regions=2)
    seeds = sample_region_seeds(ph.labels.labels, 2, 5,
                                np.random.default_rng(0))
    priors = gaussian_seed_priors(ph.image.intensities, seeds, 2)
    assert priors.shape == (144, 2)
    assert np.abs(priors.sum(axis=1) - 1.0).max() < 1e-9
    # seeds' own regions should be favored at the seed voxels
    favored = priors[seeds.seed_indices, seeds.seed_labels]
    assert (favored > 0.5).mean() > 0.8


def suite_config(**over):
    cfg = {
        "task": "segment",
        "master_seed": 7,
        "record_times": False,
        "phantoms": [{"kind": "blobs2d", "dims": [12, 12], "rng_seed": 1,
                      "noise_sigma": 0.05, "num_regions": 2}],
        "methods": ["basic", "fast", "adaptive"],
        "m_values": [16, 32],
        "pack_m": 32,
        "betas": [15.0],
        "gamma": 0.0,
        "seeds_per_region": 4,
        "repetitions": 2,
    }
    cfg.update(over)
    return cfg


def test_benchmark_basic_only_gap_zero():
    report = run_benchmark(suite_config(methods=["basic"]))
    assert all(row.method == "basic" for row in report.rows)
    assert all(row.frobenius_gap == 0.0 for row in report.rows)
    assert all(row.dsc is not None for row in report.rows)


def test_benchmark_sweep_and_determinism():
    cfg = suite_config()
    r1 = run_benchmark(cfg)
    r2 = run_benchmark(cfg)
    assert r1.to_csv() == r2.to_csv()
    fast_rows = [r for r in r1.rows if r.method == "fast"]
    assert {r.m_use for r in fast_rows} == {16, 32}
    adaptive_rows = [r for r in r1.rows if r.method == "adaptive"]
    assert all(r.m_use is not None for r in adaptive_rows)


def test_benchmark_csv_round_trip():
    report = run_benchmark(suite_config())
    text = report.to_csv()
    back = BenchReport.from_csv(text)
    assert back.to_csv() == text


def test_benchmark_register_task():
    cfg = {
        "task": "register",
        "record_times": False,
        "phantoms": [{"kind": "shifted_pair", "dims": [12, 12], "rng_seed": 2,
                      "noise_sigma": 0.02, "shift": [1, 0]}],
        "methods": ["basic", "fast"],
        "pack_m": 32,
        "grid_extents": [3, 3],
        "patch_radius": 1,
        "gamma": 1.0,
        "betas": [50.0],
    }
    report = run_benchmark(cfg)
    assert len(report.rows) == 2
    assert all(row.mo is not None for row in report.rows)
    basic = [r for r in report.rows if r.method == "basic"][0]
    assert basic.frobenius_gap == 0.0
