import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import specwalk as sw
from specwalk.graphs import LaplacianMode


@pytest.fixture(scope="session")
def path3():
    """3-voxel path graph with unit weights (uniform 3x1 image)."""
    image = sw.Image((3, 1), [0.0, 0.0, 0.0])
    graph = sw.build_graph(image, beta=1.0)
    return image, graph


@pytest.fixture(scope="session")
def path3_laps(path3):
    _, graph = path3
    return (sw.laplacian(graph, LaplacianMode.UNNORMALIZED),
            sw.laplacian(graph, LaplacianMode.NORMALIZED))


@pytest.fixture(scope="session")
def small_phantom():
    """16x16 two-region phantom in the well-connected regime."""
    return sw.make_phantom("blobs2d", (16, 16), rng_seed=3,
                           noise_sigma=0.05, num_regions=2)


@pytest.fixture(scope="session")
def small_pack(small_phantom):
    ph = small_phantom
    pack = sw.precompute(ph.image, 15.0, m=64)
    lap = sw.laplacian(sw.build_graph(ph.image, 15.0),
                       LaplacianMode.NORMALIZED)
    return pack, lap


def region_seeds(phantom, per_region, seed=0):
    k = phantom.labels.num_labels()
    return sw.sample_region_seeds(phantom.labels.labels, k, per_region,
                                  np.random.default_rng(seed))
