"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 no surface located,
4 cell cap exceeded.  Thread count precedence: --threads flag, then the
EXACTMESH_THREADS environment variable, then 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .baseline import chamfer, fscore, iou, marching_cubes
from .marching import MarchConfig, march
from .meshes import topology_check, triangulate, weld
from .meshio import MeshIOError, read_obj, write_obj, write_ply
from .network import (
    NetworkFormatError,
    load_network,
    region_count_lower_bound,
    save_network,
    subnetworks,
)
from .seeding import SeedingError, validate_scheme
from .shapes import make_shape
from .simplify import simplify_qecd
from .training import TrainConfig, fit_direct

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NO_SURFACE = 3
EXIT_CAP = 4

SCHEME_ALIASES = {"sgd": "sgd", "st": "sphere_trace", "sphere_trace": "sphere_trace",
                  "dich": "dichotomy", "dichotomy": "dichotomy"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


class UsageError(ValueError):
    pass


def _parse_bbox(text: str):
    vals = [float(t) for t in text.split(",")]
    if len(vals) != 6:
        raise UsageError("bbox needs 6 comma-separated numbers: x0,y0,z0,x1,y1,z1")
    lo, hi = vals[:3], vals[3:]
    if any(a >= b for a, b in zip(lo, hi)):
        raise UsageError("bbox lower corner must be strictly below upper corner")
    return tuple(lo), tuple(hi)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("EXACTMESH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"EXACTMESH_THREADS must be an integer, got {env!r}")
    return 1


def _load_net(path):
    try:
        return load_network(path)
    except FileNotFoundError as exc:
        raise MeshIOError(str(exc)) from exc


def cmd_mesh(args) -> int:
    net = _load_net(args.net)
    scheme = SCHEME_ALIASES[args.trigger]
    validate_scheme(net, scheme)  # occupancy + gradient schemes fail before work starts
    config = MarchConfig(
        bbox=_parse_bbox(args.bbox), seeds=args.seeds, scheme=scheme,
        threads=_threads(args), mode=args.mode, max_cells=args.max_cells,
        rng_seed=args.rng_seed)
    result = march(net, config)
    mesh = result.welded_mesh()
    if args.simplify is not None:
        tri = simplify_qecd(triangulate(mesh), args.simplify)
        write_obj(args.out, tri) if args.out.endswith(".obj") else write_ply(args.out, tri)
    else:
        if args.out.endswith(".ply"):
            write_ply(args.out, triangulate(mesh))
        else:
            write_obj(args.out, mesh)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(result.report.to_json() + "\n")
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_faces} faces "
          f"({result.report.seconds:.2f}s, {result.report.cells_visited} cells)")
    return EXIT_CAP if result.report.capped else 0


def cmd_compare(args) -> int:
    net = _load_net(args.net)
    if args.shape is None:
        raise UsageError("--shape is required (the ground truth to compare against)")
    shape = make_shape(args.shape)
    bbox = _parse_bbox(args.bbox)
    rows = []
    t0 = time.perf_counter()
    result = march(net, MarchConfig(bbox=bbox, seeds=args.seeds,
                                    scheme=SCHEME_ALIASES[args.trigger],
                                    threads=_threads(args), rng_seed=args.rng_seed))
    am_mesh = result.welded_mesh()
    am_tri = triangulate(am_mesh)
    rows.append({
        "method": "am", "resolution": None,
        "cd": chamfer(am_tri, shape, n_samples=args.samples, rng_seed=args.rng_seed),
        "fscore": fscore(am_tri, shape, n_samples=args.samples, rng_seed=args.rng_seed),
        "iou": iou(am_tri, shape, resolution=args.iou_resolution, bbox=bbox),
        "tri_faces": am_tri.n_faces,
        "seconds": time.perf_counter() - t0,
    })
    for res in args.resolutions:
        t0 = time.perf_counter()
        tri = marching_cubes(net, res, bbox)
        seconds = time.perf_counter() - t0
        rows.append({
            "method": "mc", "resolution": res,
            "cd": chamfer(tri, shape, n_samples=args.samples, rng_seed=args.rng_seed),
            "fscore": fscore(tri, shape, n_samples=args.samples, rng_seed=args.rng_seed),
            "iou": iou(tri, shape, resolution=args.iou_resolution, bbox=bbox),
            "tri_faces": tri.n_faces,
            "seconds": seconds,
        })
    text = json.dumps(rows, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_fit(args) -> int:
    shape = make_shape(args.shape)
    widths = tuple(int(t) for t in args.widths.split(","))
    if not widths or any(w < 1 for w in widths):
        raise UsageError(f"bad --widths {args.widths!r}: need positive integers")
    cfg = TrainConfig(widths=widths, mode=args.mode, epochs=args.epochs,
                      batch=args.batch, lr=args.lr, rng_seed=args.rng_seed)
    net, log = fit_direct(shape, cfg)
    save_network(net, args.out)
    if args.log:
        with open(args.log, "w") as fh:
            json.dump({"losses": log.losses, "eval_losses": log.eval_losses,
                       "alphas": log.alphas}, fh)
            fh.write("\n")
    final = log.eval_losses[-1] if log.eval_losses else float("nan")
    print(f"wrote {args.out} (eval L1 {final:.5f})")
    return 0


def cmd_simplify(args) -> int:
    mesh = read_obj(args.input)
    tri = triangulate(weld(mesh, 1e-7))
    out = simplify_qecd(tri, args.ratio)
    if args.out.endswith(".ply"):
        write_ply(args.out, out)
    else:
        write_obj(args.out, out)
    print(f"wrote {args.out}: {out.n_faces} faces (from {tri.n_faces})")
    return 0


def cmd_census(args) -> int:
    net = _load_net(args.net)
    config = MarchConfig(bbox=_parse_bbox(args.bbox), seeds=args.seeds,
                         scheme=SCHEME_ALIASES[args.trigger], threads=_threads(args),
                         max_cells=args.max_cells, rng_seed=args.rng_seed)
    result = march(net, config)
    n_hidden = net.n_hidden
    doc = {
        "cells_visited": result.report.cells_visited,
        "faces_emitted": result.report.faces_emitted,
        "state_space_cap": 2 ** n_hidden,
        "capped": result.report.capped,
    }
    widths_all = [sub.hidden_widths for sub in subnetworks(net)]
    if len(widths_all) == 1 and all(w >= 3 for w in widths_all[0]):
        doc["region_count_lower_bound"] = region_count_lower_bound(widths_all[0], 3)
    print(json.dumps(doc))
    if result.report.capped:
        print("warning: max_cells cap hit; counts are partial", file=sys.stderr)
        return EXIT_CAP
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="exactmesh",
                description="Exact meshing of ReLU implicit surface networks")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: EXACTMESH_THREADS or 1)")
        sp.add_argument("--rng-seed", type=int, default=0, dest="rng_seed")
        sp.add_argument("--bbox", default="-1.2,-1.2,-1.2,1.2,1.2,1.2",
                        help="working box x0,y0,z0,x1,y1,z1")

    mesh_p = sub.add_parser("mesh", help="extract the exact zero-set mesh")
    mesh_p.add_argument("--net", required=True, help="interchange-format network file")
    mesh_p.add_argument("--out", required=True, help="output mesh (.obj or .ply)")
    mesh_p.add_argument("--trigger", choices=sorted(SCHEME_ALIASES), default="dich")
    mesh_p.add_argument("--seeds", type=int, default=64)
    mesh_p.add_argument("--mode", choices=("pivot", "naive"), default="pivot")
    mesh_p.add_argument("--simplify", type=float, default=None, metavar="RATIO")
    mesh_p.add_argument("--report", default=None, help="write the run report JSON here")
    mesh_p.add_argument("--max-cells", type=int, default=10_000_000, dest="max_cells")
    common(mesh_p)
    mesh_p.set_defaults(func=cmd_mesh)

    cmp_p = sub.add_parser("compare", help="exact marching vs marching cubes metrics")
    cmp_p.add_argument("--net", required=True)
    cmp_p.add_argument("--shape", required=True,
                       help="ground truth, e.g. sphere:0.5 or box:0.4,0.3,0.5")
    cmp_p.add_argument("--resolutions", type=lambda s: [int(t) for t in s.split(",")],
                       default=[64, 128, 256, 512])
    cmp_p.add_argument("--samples", type=int, default=100_000)
    cmp_p.add_argument("--iou-resolution", type=int, default=64, dest="iou_resolution")
    cmp_p.add_argument("--trigger", choices=sorted(SCHEME_ALIASES), default="dich")
    cmp_p.add_argument("--seeds", type=int, default=64)
    cmp_p.add_argument("--out", default=None)
    common(cmp_p)
    cmp_p.set_defaults(func=cmd_compare)

    fit_p = sub.add_parser("fit", help="train a network on an analytic shape's field")
    fit_p.add_argument("--shape", required=True)
    fit_p.add_argument("--widths", default="16,16,16,16")
    fit_p.add_argument("--mode", choices=("regression", "eikonal"), default="regression")
    fit_p.add_argument("--epochs", type=int, default=2000)
    fit_p.add_argument("--batch", type=int, default=1024)
    fit_p.add_argument("--lr", type=float, default=2e-2)
    fit_p.add_argument("--out", required=True)
    fit_p.add_argument("--log", default=None)
    fit_p.add_argument("--rng-seed", type=int, default=0, dest="rng_seed")
    fit_p.set_defaults(func=cmd_fit)

    simp_p = sub.add_parser("simplify", help="quadric edge collapse decimation")
    simp_p.add_argument("--in", dest="input", required=True)
    simp_p.add_argument("--ratio", type=float, required=True)
    simp_p.add_argument("--out", required=True)
    simp_p.set_defaults(func=cmd_simplify)

    cen_p = sub.add_parser("census", help="visited cells vs theoretical bounds")
    cen_p.add_argument("--net", required=True)
    cen_p.add_argument("--trigger", choices=sorted(SCHEME_ALIASES), default="dich")
    cen_p.add_argument("--seeds", type=int, default=64)
    cen_p.add_argument("--max-cells", type=int, default=10_000_000, dest="max_cells")
    common(cen_p)
    cen_p.set_defaults(func=cmd_census)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SeedingError, NetworkFormatError, ValueError) as exc:
        msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        if "no surface" in msg:
            return EXIT_NO_SURFACE
        return EXIT_USAGE
    except (MeshIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
