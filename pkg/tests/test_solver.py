import numpy as np
import pytest

import specwalk as sw
from specwalk.errors import InvalidParam, SingularSystem
from specwalk.graphs import LaplacianMode

from conftest import region_seeds
from oracles import dense_rw_solve


def test_path3_symmetry(path3_laps):
    lap_u, lap_n = path3_laps
    seeds = sw.SeedPartition(3, [0, 2], [0, 1])
    for lap, mode in ((lap_u, LaplacianMode.UNNORMALIZED),
                      (lap_n, LaplacianMode.NORMALIZED)):
        prob = sw.LabelProblem(num_labels=2, seeds=seeds, gamma=0.0,
                               laplacian_mode=mode)
        u = sw.solve_basic(lap, prob, dims=(3, 1))
        assert np.allclose(u.values, [[1, 0], [0.5, 0.5], [0, 1]], atol=1e-9)


def test_prior_dominated_limit(small_phantom):
    ph = small_phantom
    n = ph.image.n_voxels
    rng = np.random.default_rng(2)
    priors = rng.random((n, 3))
    priors /= priors.sum(axis=1, keepdims=True)
    lap = sw.laplacian(sw.build_graph(ph.image, 15.0),
                       LaplacianMode.NORMALIZED)
    prob = sw.LabelProblem(num_labels=3, seeds=sw.SeedPartition(n, [], []),
                           priors=priors, gamma=1e6)
    u = sw.solve_basic(lap, prob, dims=ph.image.dims)
    assert np.abs(u.values - priors).max() <= 1e-3


def test_matches_dense_oracle_8x8():
    ph = sw.make_phantom("blobs2d", (8, 8), rng_seed=9, noise_sigma=0.05,
                         num_regions=2)
    lap = sw.laplacian(sw.build_graph(ph.image, 15.0),
                       LaplacianMode.NORMALIZED)
    seeds = region_seeds(ph, 1, seed=1)
    prob = sw.LabelProblem(num_labels=2, seeds=seeds, gamma=0.0)
    u = sw.solve_basic(lap, prob, dims=ph.image.dims, tol=1e-10)
    assert np.abs(u.values - dense_rw_solve(lap, prob)).max() < 1e-6


def test_rows_sum_to_one_and_bounded(small_phantom, small_pack):
    ph = small_phantom
    _, lap = small_pack
    seeds = region_seeds(ph, 4, seed=3)
    prob = sw.LabelProblem(num_labels=2, seeds=seeds, gamma=0.0)
    u = sw.solve_basic(lap, prob, dims=ph.image.dims)
    assert np.abs(u.values.sum(axis=1) - 1.0).max() < 1e-6
    assert u.values.min() >= -1e-6 and u.values.max() <= 1 + 1e-6


def test_energy_minimality(small_phantom, small_pack):
    """Perturbing any non-seeded row away from the solution raises energy."""
    ph = small_phantom
    _, lap = small_pack
    seeds = region_seeds(ph, 3, seed=5)
    gamma = 0.4
    n = ph.image.n_voxels
    rng = np.random.default_rng(8)
    priors = rng.random((n, 2))
    priors /= priors.sum(axis=1, keepdims=True)
    prob = sw.LabelProblem(num_labels=2, seeds=seeds, priors=priors,
                           gamma=gamma)
    u = sw.solve_basic(lap, prob, dims=ph.image.dims, tol=1e-12)

    d_sqrt = lap.d_sqrt

    def energy(u_vals):
        u_hat = u_vals * d_sqrt[:, None]
        p_hat = priors * d_sqrt[:, None]
        total = 0.0
        for k in range(2):
            total += u_hat[:, k] @ (lap.matrix @ u_hat[:, k])
            total += gamma * np.sum((u_hat[:, k] - p_hat[:, k]) ** 2)
        return total

    base = energy(u.values)
    nonseed = seeds.nonseed_indices()
    for trial in range(5):
        bumped = u.values.copy()
        row = nonseed[rng.integers(nonseed.size)]
        bumped[row] += rng.standard_normal(2) * 0.05
        assert energy(bumped) > base - 1e-12


def test_gamma_zero_without_seeds_rejected():
    with pytest.raises(SingularSystem):
        sw.LabelProblem(num_labels=2, seeds=sw.SeedPartition(4, [], []),
                        gamma=0.0)


def test_gamma_without_priors_rejected():
    seeds = sw.SeedPartition(4, [0], [0])
    with pytest.raises(InvalidParam):
        sw.LabelProblem(num_labels=2, seeds=seeds, gamma=1.0)


def test_modes_agree_on_symmetric_toy(path3_laps):
    lap_u, lap_n = path3_laps
    seeds = sw.SeedPartition(3, [0, 2], [0, 1])
    u_u = sw.solve_basic(lap_u, sw.LabelProblem(
        num_labels=2, seeds=seeds, gamma=0.0,
        laplacian_mode=LaplacianMode.UNNORMALIZED), dims=(3, 1))
    u_n = sw.solve_basic(lap_n, sw.LabelProblem(
        num_labels=2, seeds=seeds, gamma=0.0,
        laplacian_mode=LaplacianMode.NORMALIZED), dims=(3, 1))
    assert np.abs(u_u.values - u_n.values).max() < 1e-9
