"""Accuracy-vs-runtime benchmark harness over deterministic phantoms.

A suite config (JSON) lists phantoms, methods, m sweeps, betas, seed counts
and repetition counts; every cell runs with seeds derived from the master
seed so reports are reproducible, and all methods within a repetition reuse
the same seed set. Reports serialize to CSV with a fixed header.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, fields

import numpy as np

from .adaptive import AdaptivePolicy, select_m
from .errors import InvalidParam
from .fastrw import precompute, solve_fast
from .graphs import LaplacianMode, SeedPartition, build_graph, laplacian
from .images import hard_labels
from .metrics import dice, mean_overlap
from .phantoms import Phantom, make_phantom
from .registration import (CoarsenVariant, DisplacementGrid, register,
                           warp_labels)
from .solver import LabelProblem, solve_basic

CSV_HEADER = ["method", "phantom", "kind", "rep", "beta", "gamma", "m_use",
              "n_super", "precompute_s", "online_s", "dsc", "mo",
              "frobenius_gap"]


@dataclass
class BenchRecord:
    method: str
    phantom: int
    kind: str
    rep: int
    beta: float
    gamma: float
    m_use: int | None = None
    n_super: int | None = None
    precompute_s: float = 0.0
    online_s: float = 0.0
    dsc: float | None = None
    mo: float | None = None
    frobenius_gap: float | None = None


@dataclass
class BenchReport:
    rows: list[BenchRecord]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(["" if getattr(row, name) is None
                             else str(getattr(row, name))
                             for name in CSV_HEADER])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise InvalidParam("unexpected benchmark CSV header")
        types = {f.name: f.type for f in fields(BenchRecord)}
        rows = []
        for values in reader:
            kwargs = {}
            for name, value in zip(CSV_HEADER, values):
                if value == "":
                    kwargs[name] = None
                elif types[name] in ("int", "int | None"):
                    kwargs[name] = int(value)
                elif types[name] in ("float", "float | None"):
                    kwargs[name] = float(value)
                else:
                    kwargs[name] = value
            rows.append(BenchRecord(**kwargs))
        return cls(rows)


def sample_region_seeds(labels: np.ndarray, num_labels: int, per_region: int,
                        rng: np.random.Generator) -> SeedPartition:
    """Uniform seeds inside each ground-truth region."""
    chosen, chosen_labels = [], []
    for k in range(num_labels):
        region = np.flatnonzero(labels == k)
        if region.size == 0:
            continue
        take = min(per_region, region.size)
        picks = rng.choice(region, size=take, replace=False)
        chosen.append(picks)
        chosen_labels.append(np.full(take, k))
    return SeedPartition(labels.size,
                         np.concatenate(chosen), np.concatenate(chosen_labels))


def gaussian_seed_priors(intensities: np.ndarray, seeds: SeedPartition,
                         num_labels: int, min_sigma: float = 0.01) -> np.ndarray:
    """Per-voxel label priors from Gaussians fit to the seed intensities.

    Labels without seeds fall back to a flat likelihood.
    """
    n = intensities.size
    like = np.full((n, num_labels), 1.0 / num_labels)
    for k in range(num_labels):
        vals = intensities[seeds.seed_indices[seeds.seed_labels == k]]
        if vals.size == 0:
            continue
        mu = float(vals.mean())
        sigma = max(float(vals.std()), min_sigma)
        like[:, k] = np.exp(-0.5 * ((intensities - mu) / sigma) ** 2) / sigma
    like += 1e-12
    return like / like.sum(axis=1, keepdims=True)


def _segment_cells(cfg: dict, phantom_idx: int, phantom: Phantom,
                   record_times: bool) -> list[BenchRecord]:
    rows: list[BenchRecord] = []
    k = phantom.labels.num_labels()
    gamma = float(cfg.get("gamma", 0.0))
    methods = cfg.get("methods", ["basic", "fast", "adaptive"])
    m_values = cfg.get("m_values", [])
    pack_m = int(cfg.get("pack_m", max(m_values) if m_values else 64))
    reps = int(cfg.get("repetitions", 1))
    per_region = int(cfg.get("seeds_per_region", 10))
    epsilon = float(cfg.get("epsilon", 0.1))
    master = int(cfg.get("master_seed", 0))

    for beta in cfg.get("betas", [50.0]):
        lap = laplacian(build_graph(phantom.image, beta),
                        LaplacianMode.NORMALIZED)
        t0 = time.perf_counter()
        pack = precompute(phantom.image, beta, pack_m)
        pre_s = time.perf_counter() - t0 if record_times else 0.0
        for rep in range(reps):
            rng = np.random.default_rng((master, phantom_idx, rep))
            seeds = sample_region_seeds(phantom.labels.labels, k,
                                        per_region, rng)
            prob = LabelProblem(num_labels=k, seeds=seeds, gamma=gamma,
                                priors=None if gamma == 0 else _uniform(
                                    phantom.image.n_voxels, k),
                                laplacian_mode=LaplacianMode.NORMALIZED)

            t0 = time.perf_counter()
            u_basic = solve_basic(lap, prob, dims=phantom.image.dims)
            basic_s = time.perf_counter() - t0 if record_times else 0.0

            def run(method: str, m_use: int | None) -> BenchRecord:
                row = BenchRecord(method=method, phantom=phantom_idx,
                                  kind=phantom.generator, rep=rep,
                                  beta=float(beta), gamma=gamma,
                                  precompute_s=0.0 if method == "basic" else pre_s)
                if method == "basic":
                    u = u_basic
                    row.online_s = basic_s
                else:
                    chosen = m_use
                    t1 = time.perf_counter()
                    if method == "adaptive":
                        chosen, _ = select_m(pack, prob,
                                             AdaptivePolicy(epsilon=epsilon))
                    u = solve_fast(pack, lap, prob, m_use=chosen)
                    row.online_s = (time.perf_counter() - t1
                                    if record_times else 0.0)
                    row.m_use = chosen
                row.frobenius_gap = float(
                    np.linalg.norm(u.values - u_basic.values))
                _, row.dsc = dice(hard_labels(u), phantom.labels, k)
                return row

            for method in methods:
                if method == "fast":
                    for m_use in (m_values or [pack.m]):
                        rows.append(run("fast", min(m_use, pack.m)))
                else:
                    rows.append(run(method, None))
    return rows


def _register_cells(cfg: dict, phantom_idx: int, phantom: Phantom,
                    record_times: bool) -> list[BenchRecord]:
    rows: list[BenchRecord] = []
    if phantom.moving is None:
        raise InvalidParam("register task needs shifted_pair phantoms")
    grid = DisplacementGrid(tuple(cfg.get("grid_extents",
                                          [7] * len(phantom.image.dims))))
    gamma = float(cfg.get("gamma", 1.0))
    patch_radius = int(cfg.get("patch_radius", 2))
    methods = cfg.get("methods", ["basic", "fast"])
    pack_m = int(cfg.get("pack_m", 64))
    beta = float(cfg.get("betas", [50.0])[0])
    aggregate = cfg.get("aggregate")          # [similarity_tol, radius]
    k = phantom.labels.num_labels()

    pack = None
    pre_s = 0.0
    if any(m != "basic" for m in methods):
        t0 = time.perf_counter()
        pack = precompute(phantom.image, beta, pack_m)
        pre_s = time.perf_counter() - t0 if record_times else 0.0

    u_ref = None
    for method in methods:
        kwargs = {}
        use_pack = None if method == "basic" else pack
        if method.startswith("aggregate"):
            kwargs["aggregate"] = tuple(aggregate or (0.2, 4))
            kwargs["coarsen_variant"] = (CoarsenVariant.DELTA
                                         if method.endswith("delta")
                                         else CoarsenVariant.NAIVE)
        if method == "adaptive":
            kwargs["adaptive"] = True
        t0 = time.perf_counter()
        u, fieldv, rep_info = register(phantom.image, phantom.moving,
                                       pack=use_pack, grid=grid, gamma=gamma,
                                       patch_radius=patch_radius, beta=beta,
                                       **kwargs)
        online = time.perf_counter() - t0 if record_times else 0.0
        if method == "basic":
            u_ref = u
        warped = warp_labels(phantom.moving_labels, fieldv)
        row = BenchRecord(method=method, phantom=phantom_idx,
                          kind=phantom.generator, rep=0, beta=beta,
                          gamma=gamma, m_use=rep_info.m_use,
                          n_super=rep_info.n_super,
                          precompute_s=0.0 if method == "basic" else pre_s,
                          online_s=online,
                          mo=mean_overlap(warped, phantom.labels, k))
        if u_ref is not None:
            row.frobenius_gap = float(np.linalg.norm(u.values - u_ref.values))
        rows.append(row)
    return rows


def _uniform(n: int, k: int) -> np.ndarray:
    return np.full((n, k), 1.0 / k)


def run_benchmark(cfg: dict) -> BenchReport:
    """Execute the suite described by ``cfg`` and collect one row per cell."""
    record_times = bool(cfg.get("record_times", True))
    task = cfg.get("task", "segment")
    rows: list[BenchRecord] = []
    for idx, spec in enumerate(cfg.get("phantoms", [])):
        phantom = make_phantom(
            spec.get("kind", "blobs2d"), spec["dims"],
            rng_seed=int(spec.get("rng_seed", idx)),
            noise_sigma=float(spec.get("noise_sigma", 0.02)),
            num_regions=int(spec.get("num_regions", 3)),
            shift=spec.get("shift"))
        if task == "segment":
            rows.extend(_segment_cells(cfg, idx, phantom, record_times))
        elif task == "register":
            rows.extend(_register_cells(cfg, idx, phantom, record_times))
        else:
            raise InvalidParam(f"unknown task {task!r}")
    return BenchReport(rows)


def load_suite(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
