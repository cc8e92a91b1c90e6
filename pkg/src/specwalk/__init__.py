"""Fast random walker segmentation and registration with spectral packs."""

from .adaptive import AdaptivePolicy, norm_bound, prior_residual, seed_fit, select_m
from .aggregation import (Aggregation, CoarseBasis, CoarsenVariant, CoarsePack,
                          aggregate_priors, aggregate_weights,
                          build_aggregation, coarsen_basis, delta_weights,
                          propagate, save_aggregation)
from .bench import BenchRecord, BenchReport, run_benchmark, sample_region_seeds
from .errors import (ChecksumMismatch, DegenerateGraph, DimsMismatch,
                     EmptyBasis, FormatError, ImageMismatch, InsufficientBasis,
                     InvalidParam, IoError, NotConverged, SingularSmallSystem,
                     SingularSystem, SpecwalkError, ZeroVector)
from .fastrw import (PackSet, SpectralPack, load_pack, precompute, save_pack,
                     solve_fast, xxh64)
from .graphs import (Laplacian, LaplacianMode, SeedPartition,
                     WeightedLatticeGraph, build_graph, laplacian,
                     laplacian_from_weights, partition_blocks)
from .images import (Image, LabelMap, ProbabilityField, SENTINEL_UNLABELED,
                     hard_labels, load_image, load_labels, load_probabilities,
                     save_image, save_labels, save_probabilities)
from .linalg import EigenBasis, cg_solve, gram_schmidt, smallest_eigs
from .metrics import dice, mean_overlap
from .phantoms import Phantom, interior_mask, make_phantom
from .refresh import RefreshedPack, ncut_value, refresh, refresh_from_set
from .registration import (DisplacementField, DisplacementGrid,
                           expected_displacement, register, similarity_priors,
                           warp_labels)
from .solver import LabelProblem, solve_basic

__version__ = "0.1.0"
