"""Command-line front end: a thin layer over the library.

Subcommands: precompute, segment, register, bench, serve. Exit codes:
1 usage, 2 I/O or file-format problems, 3 numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from .adaptive import AdaptivePolicy, select_m
from .bench import load_suite, run_benchmark
from .fastrw import PackSet, load_pack, precompute, save_pack, solve_fast
from .graphs import LaplacianMode, SeedPartition, build_graph, laplacian
from .images import (hard_labels, load_image, load_labels, save_labels,
                     save_probabilities, write_rawj)
from .refresh import refresh_from_set
from .registration import DisplacementGrid, register, warp_labels
from .solver import LabelProblem, solve_basic

USAGE_EXIT = 1
IO_EXIT = 2
NUMERIC_EXIT = 3

_IO_ERRORS = (errors.IoError, errors.FormatError, errors.ImageMismatch,
              FileNotFoundError, OSError)
_NUMERIC_ERRORS = (errors.NotConverged, errors.SingularSystem,
                   errors.SingularSmallSystem, errors.InsufficientBasis,
                   errors.EmptyBasis, errors.DegenerateGraph)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def build_parser() -> _Parser:
    parser = _Parser(prog="specwalk",
                     description="Fast random walker segmentation/registration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="build spectral packs offline")
    p.add_argument("image")
    p.add_argument("--beta", type=float, action="append", required=True,
                   help="edge-weight sharpness; repeatable for a pack set")
    p.add_argument("--m", type=int, default=160)
    p.add_argument("--eig-tol", type=float, default=1e-6)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("segment", help="seeded segmentation")
    p.add_argument("image")
    p.add_argument("packs", nargs="+", help="one or more .rwpk files")
    p.add_argument("seeds", help="JSON list of {index, label}")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--beta-online", type=float, default=None,
                   help="rebuild edge weights at this beta and refresh values")
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--m-use", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out-prefix", default="segment")

    p = sub.add_parser("register", help="pairwise displacement-label registration")
    p.add_argument("fixed")
    p.add_argument("moving")
    p.add_argument("--pack", default=None, help=".rwpk built from the fixed image")
    p.add_argument("--grid-extent", type=int, nargs="+", default=[7, 7])
    p.add_argument("--grid-step", type=int, default=1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--patch-radius", type=int, default=2)
    p.add_argument("--beta", type=float, default=50.0)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--m-use", type=int, default=None)
    p.add_argument("--aggregate", type=float, nargs=2, default=None,
                   metavar=("TOL", "RADIUS"))
    p.add_argument("--naive-coarsening", action="store_true")
    p.add_argument("--moving-labels", default=None,
                   help="label map to warp with the recovered field")
    p.add_argument("--out-prefix", default="register")

    p = sub.add_parser("bench", help="run a benchmark suite config")
    p.add_argument("suite", help="suite JSON")
    p.add_argument("--out", default="bench.csv")

    p = sub.add_parser("serve", help="start the interactive HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--frontend-dir", default=None)
    return parser


def _load_seeds_file(path, n_vertices: int) -> SeedPartition:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise errors.IoError(f"no such seeds file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise errors.FormatError(f"bad seeds JSON {path}: {exc}") from exc
    indices = [int(s["index"]) for s in raw]
    labels = [int(s["label"]) for s in raw]
    return SeedPartition(n_vertices, indices, labels)


def _cmd_precompute(args) -> int:
    image = load_image(args.image)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.image).parent
    stem = Path(args.image).stem
    for beta in args.beta:
        pack = precompute(image, beta, args.m, eig_tol=args.eig_tol)
        out = out_dir / f"{stem}_beta{beta:g}.rwpk"
        save_pack(pack, out)
        print(out)
    return 0


def _require_pack_files(paths):
    for path in paths:
        if not Path(path).exists():
            raise errors.IoError(f"no such pack file: {path}")


def _cmd_segment(args) -> int:
    image = load_image(args.image)
    _require_pack_files(args.packs)
    packs = PackSet(tuple(sorted((load_pack(p) for p in args.packs),
                                 key=lambda p: p.beta)))
    for pack in packs.packs:
        if pack.provenance.image_hash != image.content_hash():
            raise errors.ImageMismatch("pack was not built from this image")
    seeds = _load_seeds_file(args.seeds, image.n_voxels)
    prob = LabelProblem(num_labels=seeds.num_labels, seeds=seeds,
                        gamma=args.gamma,
                        priors=None if args.gamma == 0 else np.full(
                            (image.n_voxels, seeds.num_labels),
                            1.0 / seeds.num_labels))
    refreshed = False
    if args.beta_online is not None:
        pack = refresh_from_set(packs, image, args.beta_online)
        lap = pack.laplacian
        refreshed = True
        base_beta = pack.base.beta
    else:
        pack = packs.packs[0]
        lap = laplacian(build_graph(image, pack.beta), LaplacianMode.NORMALIZED)
        base_beta = pack.beta
    if args.adaptive:
        m_use, _ = select_m(pack, prob, AdaptivePolicy(epsilon=args.epsilon))
    else:
        m_use = args.m_use if args.m_use is not None else pack.m
    field = solve_fast(pack, lap, prob, m_use=m_use)
    labels_path = save_labels(hard_labels(field), args.out_prefix + "_labels")
    probs_path = save_probabilities(field, args.out_prefix + "_probs")
    report = {"m_use": m_use, "refreshed": refreshed, "base_beta": base_beta,
              "num_labels": prob.K, "labels": str(labels_path),
              "probabilities": str(probs_path)}
    print(json.dumps(report))
    return 0


def _cmd_register(args) -> int:
    from .aggregation import CoarsenVariant

    fixed = load_image(args.fixed)
    moving = load_image(args.moving)
    pack = None
    if args.pack is not None:
        _require_pack_files([args.pack])
        pack = load_pack(args.pack)
    grid = DisplacementGrid(tuple(args.grid_extent), step=args.grid_step)
    aggregate = tuple(args.aggregate) if args.aggregate else None
    if aggregate:
        aggregate = (aggregate[0], int(aggregate[1]))
    variant = (CoarsenVariant.NAIVE if args.naive_coarsening
               else CoarsenVariant.DELTA)
    u, fieldv, rep = register(
        fixed, moving, pack=pack, grid=grid, gamma=args.gamma,
        patch_radius=args.patch_radius, adaptive=args.adaptive,
        aggregate=aggregate, m_use=args.m_use, coarsen_variant=variant,
        beta=args.beta)
    field_path = write_rawj(args.out_prefix + "_field",
                            fieldv.vectors.astype("<f4"), fieldv.dims, "f32",
                            channels=len(fieldv.dims))
    report = {"method": rep.method, "m_use": rep.m_use, "n_super": rep.n_super,
              "priors_s": rep.priors_s, "solve_s": rep.solve_s,
              "aggregate_s": rep.aggregate_s, "field": str(field_path)}
    if args.moving_labels:
        warped = warp_labels(load_labels(args.moving_labels), fieldv)
        report["warped_labels"] = str(
            save_labels(warped, args.out_prefix + "_warped"))
    print(json.dumps(report))
    return 0


def _cmd_bench(args) -> int:
    report = run_benchmark(load_suite(args.suite))
    Path(args.out).write_text(report.to_csv())
    print(args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(frontend_dir=args.frontend_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "precompute": _cmd_precompute,
    "segment": _cmd_segment,
    "register": _cmd_register,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except errors.SpecwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
