"""March across linear regions via activation flips, collecting one analytic
face per region that the zero set crosses.

A shared visited set of canonical states deduplicates work; every polygon edge
generated by a neuron or branch plane enqueues the state(s) on the far side.
Edges lying on several coincident planes enqueue every flip combination: the
spurious combinations die as empty slabs, the true neighbor survives, and the
mesh keeps no holes.
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cells import (
    DEFAULT_BBOX,
    PLANE_BBOX,
    PLANE_BRANCH,
    PLANE_NEURON,
    TOL_CELL,
    TOL_WELD,
    AnalyticCell,
    FacePolygon,
    PlaneRef,
    build_cell,
    extract_face_naive,
    extract_face_pivot_checked,
    point_in_cell,
)
from .meshes import PolygonMesh, weld
from .network import (
    AnyNetwork,
    EnsembleSpec,
    RegionMaps,
    StateVector,
    affine_maps,
    check_unique_planes,
    forward_many,
    state_at,
)
from .seeding import sample_seeds

log = logging.getLogger(__name__)


@dataclass
class MarchConfig:
    bbox: tuple = DEFAULT_BBOX
    seeds: int = 64
    scheme: str = "dichotomy"
    threads: int = 1
    mode: str = "pivot"                  # face extraction: pivot | naive
    max_cells: int = 10_000_000
    rng_seed: int = 0
    tol_cell: float = TOL_CELL
    tol_weld: float = TOL_WELD
    seed_points: np.ndarray | None = None   # bypass the trigger schemes
    unique_planes_limit: int = 3000          # skip the O(n^2) diagnostic above this
    probe_delta: float = 1e-7                # step across edges when probing neighbors

    def __post_init__(self):
        if self.max_cells < 1:
            raise ValueError("max_cells must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.mode not in ("pivot", "naive"):
            raise ValueError("mode must be 'pivot' or 'naive'")


@dataclass
class MarchReport:
    cells_visited: int = 0
    faces_emitted: int = 0
    empty_faces: int = 0
    open_edges: int = 0
    seconds: float = 0.0
    unique_plane_violations: int | None = None
    pivot_fallbacks: int = 0
    seeds_used: int = 0
    capped: bool = False
    threads: int = 1

    def to_json(self) -> str:
        return json.dumps({
            "cells_visited": self.cells_visited,
            "faces_emitted": self.faces_emitted,
            "empty_faces": self.empty_faces,
            "open_edges": self.open_edges,
            "seconds": self.seconds,
            "unique_plane_violations": self.unique_plane_violations,
            "pivot_fallbacks": self.pivot_fallbacks,
            "seeds_used": self.seeds_used,
            "capped": self.capped,
            "threads": self.threads,
        })


@dataclass
class MarchResult:
    polygons: list[FacePolygon]
    report: MarchReport

    def polygon_soup(self) -> PolygonMesh:
        """One loop per analytic face; vertices not yet shared between faces."""
        verts = []
        faces = []
        planes = []
        offset = 0
        for poly in self.polygons:
            verts.append(poly.vertices)
            faces.append(np.arange(offset, offset + poly.n_vertices, dtype=np.int64))
            planes.append(poly.plane)
            offset += poly.n_vertices
        if not verts:
            return PolygonMesh(np.empty((0, 3)), [], [])
        return PolygonMesh(np.concatenate(verts, axis=0), faces, planes)

    def welded_mesh(self, tol: float = TOL_WELD) -> PolygonMesh:
        return weld(self.polygon_soup(), tol)

    def face_multiset(self, decimals: int = 10):
        """Order-independent fingerprint for determinism comparisons."""
        out = []
        for poly in self.polygons:
            vs = frozenset(map(tuple, np.round(poly.vertices, decimals)))
            out.append((poly.state.key, poly.state.branch, vs))
        out.sort(key=lambda t: (t[0], -1 if t[1] is None else t[1], sorted(t[2])))
        return out


def neighbor_state(s: StateVector, ref: PlaneRef) -> StateVector:
    """State across one boundary plane: flip that neuron's bit or switch branch.

    Applying the same neuron transition twice returns the original state.  Box
    planes have no neighbor and are rejected.
    """
    if ref.kind == PLANE_NEURON:
        return s.flip(ref.index)
    if ref.kind == PLANE_BRANCH:
        if s.branch is None:
            raise ValueError("branch switch on a non-ensemble state")
        return s.with_branch(ref.index)
    raise ValueError(f"no neighbor beyond the bounding box (ref {ref})")


def _transition_states(s: StateVector, refs: tuple[PlaneRef, ...]) -> list[StateVector]:
    """All neighbor states for an edge lying on possibly coincident planes.

    For k coincident neuron planes every non-empty flip subset is produced
    (combined with each branch target present); single flips across a truly
    coincident pair land in empty slab regions and cost one wasted visit each,
    while the joint flip is the real neighbor.
    """
    neuron_bits = [r.index for r in refs if r.kind == PLANE_NEURON]
    branch_targets = [r.index for r in refs if r.kind == PLANE_BRANCH]
    if len(neuron_bits) > 3:
        log.warning("edge on %d coincident planes; enqueueing singles and the full flip",
                    len(neuron_bits))
        subsets = [(b,) for b in neuron_bits] + [tuple(neuron_bits)]
        subsets.append(())
    else:
        subsets = []
        for k in range(len(neuron_bits) + 1):
            subsets.extend(itertools.combinations(neuron_bits, k))
    out = []
    for subset in subsets:
        for target in [None] + branch_targets:
            if not subset and target is None:
                continue
            t = s
            for b in subset:
                t = t.flip(b)
            if target is not None:
                t = t.with_branch(target)
            out.append(t)
    return out


def _hint_ref_for_neighbor(s: StateVector, refs, neighbor: StateVector):
    """Boundary plane of the neighbor cell that was crossed, as seen from it."""
    for r in refs:
        if r.kind == PLANE_NEURON:
            return r
    for r in refs:
        if r.kind == PLANE_BRANCH and neighbor.branch == r.index:
            return PlaneRef(PLANE_BRANCH, s.branch)
    return None


def _refine_seed_state(net: AnyNetwork, x: np.ndarray, bbox, tol_cell: float):
    """Project the seed onto its region's face plane until the state is stable."""
    s = state_at(net, x)
    for _ in range(3):
        maps = affine_maps(net, s)
        n = maps.face_normal
        nn = float(n @ n)
        if nn <= 0.0:
            return maps.state, maps
        x_proj = x - (n @ x + maps.face_offset) / nn * n
        s_new = state_at(net, x_proj)
        if s_new == maps.state:
            return maps.state, maps
        x = x_proj
        s = s_new
    maps = affine_maps(net, s)
    return maps.state, maps


class _Marcher:
    def __init__(self, net: AnyNetwork, config: MarchConfig):
        self.net = net
        self.config = config
        self.seen: set[StateVector] = set()
        self.results: dict[StateVector, FacePolygon | None] = {}
        self.queue: deque = deque()
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.outstanding = 0
        self.capped = False
        self.fallbacks = 0
        self.probe_delta = config.probe_delta

    def _enqueue(self, state: StateVector, maps: RegionMaps, hint):
        with self.lock:
            if state in self.seen:
                return
            if len(self.seen) >= self.config.max_cells:
                self.capped = True
                return
            self.seen.add(state)
            self.queue.append((state, maps, hint))
            self.outstanding += 1
            self.cond.notify()

    def _process(self, state: StateVector, maps: RegionMaps, hint):
        cfg = self.config
        cell = build_cell(self.net, state, bbox=cfg.bbox, maps=maps)
        poly = None
        if cfg.mode == "pivot" and hint is not None:
            ref, point = hint
            poly, fell_back = extract_face_pivot_checked(
                cell, ref, point, tol_cell=cfg.tol_cell, tol_weld=cfg.tol_weld)
            if fell_back:
                with self.lock:
                    self.fallbacks += 1
        else:
            poly = extract_face_naive(cell, tol_cell=cfg.tol_cell, tol_weld=cfg.tol_weld)
        self.results[state] = poly
        if poly is None:
            return
        mids = poly.edge_midpoints()
        for i, refs in enumerate(poly.edge_transitions):
            crossable = tuple(r for r in refs if r.kind != PLANE_BBOX)
            if not crossable:
                continue
            candidates = _transition_states(state, crossable)
            # Geometric probe: read the state just across the crossing plane.
            # Bit flips alone cannot reactivate neurons whose functionals were
            # constant on this side, so the probe is what finds those regions.
            row = cell.ref_row(crossable[0])
            if row is not None:
                probe = mids[i] + self.probe_delta * cell.normals[row]
                candidates.append(state_at(self.net, probe))
            for nb in candidates:
                with self.lock:
                    if nb in self.seen:
                        continue
                nb_maps = affine_maps(self.net, nb)
                canon = nb_maps.state
                if canon == state:
                    continue
                href = _hint_ref_for_neighbor(state, crossable, canon)
                hint_nb = (href, mids[i]) if href is not None else None
                self._enqueue(canon, nb_maps, hint_nb)

    def _worker(self):
        while True:
            with self.cond:
                while not self.queue and self.outstanding > 0:
                    self.cond.wait()
                if not self.queue and self.outstanding == 0:
                    return
                state, maps, hint = self.queue.popleft()
            try:
                self._process(state, maps, hint)
            except Exception:
                log.exception("marching worker failed on state %s", state)
            finally:
                with self.cond:
                    self.outstanding -= 1
                    if self.outstanding == 0:
                        self.cond.notify_all()
                    elif self.queue:
                        self.cond.notify()

    def run_serial(self):
        while self.queue:
            state, maps, hint = self.queue.popleft()
            self.outstanding -= 1
            self._process(state, maps, hint)

    def run_threaded(self, n_threads: int):
        workers = [threading.Thread(target=self._worker, daemon=True)
                   for _ in range(n_threads)]
        for w in workers:
            w.start()
        for w in workers:
            w.join()


def march(net: AnyNetwork, config: MarchConfig | None = None) -> MarchResult:
    """Extract every analytic face reachable from the seed points.

    Returns the face polygons plus a report; the welded mesh is obtained via
    MarchResult.welded_mesh().  Raises if no seed can be found; hitting the
    max_cells cap returns the partial mesh with report.capped set.
    """
    config = config or MarchConfig()
    t0 = time.perf_counter()
    if config.seed_points is not None:
        seeds = np.asarray(config.seed_points, dtype=np.float64).reshape(-1, 3)
    else:
        seeds = sample_seeds(net, config.seeds, config.bbox, scheme=config.scheme,
                             rng_seed=config.rng_seed)

    marcher = _Marcher(net, config)
    for x in seeds:
        s, maps = _refine_seed_state(net, x, config.bbox, config.tol_cell)
        marcher._enqueue(s, maps, None)

    if config.threads == 1:
        marcher.run_serial()
    else:
        marcher.run_threaded(config.threads)

    polygons = [p for _, p in sorted(marcher.results.items(),
                                     key=lambda kv: (kv[0].key,
                                                     -1 if kv[0].branch is None else kv[0].branch))
                if p is not None]
    report = MarchReport(
        cells_visited=len(marcher.results),
        faces_emitted=len(polygons),
        empty_faces=sum(1 for p in marcher.results.values() if p is None),
        open_edges=sum(sum(1 for refs in p.edge_transitions
                           if any(r.kind == PLANE_BBOX for r in refs))
                       for p in polygons),
        seconds=time.perf_counter() - t0,
        pivot_fallbacks=marcher.fallbacks,
        seeds_used=len(seeds),
        capped=marcher.capped,
        threads=config.threads,
    )
    if len(polygons) <= config.unique_planes_limit:
        pairs = check_unique_planes([(p.state, p.plane) for p in polygons], tol=1e-9)
        report.unique_plane_violations = len(pairs)
    if report.capped:
        log.warning("max_cells=%d reached; mesh is partial", config.max_cells)
    return MarchResult(polygons, report)


def vertex_residuals(net: AnyNetwork, mesh_or_result) -> np.ndarray:
    """|F| at every mesh vertex; the exactness claim is max residual <= 1e-6."""
    if isinstance(mesh_or_result, MarchResult):
        verts = mesh_or_result.polygon_soup().vertices
    else:
        verts = mesh_or_result.vertices
    if len(verts) == 0:
        return np.empty(0)
    return np.abs(forward_many(net, verts))
