"""Analytic cells and faces: the convex polyhedron of one linear region and the
polygon its face plane cuts out of it.

A cell is the system of oriented half-spaces (1-2s)(a . x + b) <= 0 over all
hidden neurons, plus branch-dominance planes for max-pool ensembles, plus the
six planes of the working box.  The face polygon is enumerated either naively
(all plane pairs) or by pivoting around the polygon edge by edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .network import (
    AffinePlane,
    AnyNetwork,
    RegionMaps,
    StateVector,
    affine_maps,
    DEGENERATE_NORMAL_TOL,
)

log = logging.getLogger(__name__)

# Default tolerances; double precision with unit-scale geometry leaves plenty
# of headroom below these.
TOL_DET = 1e-12        # 3x3 solve singularity on unit-normalized rows
TOL_CELL = 1e-9        # half-space membership slack
TOL_ONPLANE = 1e-9     # point-on-plane slack
TOL_WELD = 1e-7        # vertex dedup radius

DEFAULT_BBOX = ((-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))

PLANE_NEURON = 0
PLANE_BRANCH = 1
PLANE_BBOX = 2


@dataclass(frozen=True)
class PlaneRef:
    """Identity of a cell boundary plane: a hidden neuron (global bit index),
    a branch-dominance plane (target subnetwork index), or one box face (0..5)."""

    kind: int
    index: int

    def __repr__(self) -> str:
        tag = {PLANE_NEURON: "neuron", PLANE_BRANCH: "branch", PLANE_BBOX: "bbox"}[self.kind]
        return f"{tag}:{self.index}"


@dataclass(frozen=True)
class AnalyticCell:
    """One linear region as oriented inequalities normals @ x + offsets <= 0.

    Rows are unit-normalized so constraint values are signed distances.  The
    face plane is kept both raw (the exact affine functional equal to F on the
    region) and unit-normalized for geometric predicates.  Degenerate neuron
    rows (masked to zero) are dropped from the constraint system but their bit
    indices are recorded.
    """

    state: StateVector
    normals: np.ndarray            # (K, 3) unit rows
    offsets: np.ndarray            # (K,)
    refs: tuple[PlaneRef, ...]     # K entries
    face_plane: AffinePlane        # raw functional
    face_unit_normal: np.ndarray
    face_unit_offset: float
    bbox: tuple[tuple[float, float, float], tuple[float, float, float]]
    dropped_bits: tuple[int, ...]
    maps: RegionMaps

    @property
    def n_planes(self) -> int:
        return self.normals.shape[0]

    def ref_row(self, ref: PlaneRef) -> int | None:
        try:
            return self.refs.index(ref)
        except ValueError:
            return None


@dataclass(frozen=True)
class FacePolygon:
    """Ordered vertex loop of one analytic face.

    Vertices run counter-clockwise seen from the side the face normal (the
    direction of increasing F) points to.  edge_transitions[i] holds the cell
    boundary planes generating the edge vertices[i] -> vertices[i+1]; more
    than one entry means the edge lies on coincident planes.
    """

    state: StateVector
    vertices: np.ndarray                       # (V, 3)
    plane: AffinePlane                         # raw face functional
    edge_transitions: tuple[tuple[PlaneRef, ...], ...]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def touches_bbox(self) -> bool:
        return any(r.kind == PLANE_BBOX for refs in self.edge_transitions for r in refs)

    def edge_midpoints(self) -> np.ndarray:
        v = self.vertices
        return 0.5 * (v + np.roll(v, -1, axis=0))


def bbox_planes(bbox) -> tuple[np.ndarray, np.ndarray]:
    """Six oriented half-spaces of the axis-aligned box, inside <= 0."""
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bbox)
    normals = np.zeros((6, 3))
    offsets = np.zeros(6)
    for k in range(3):
        normals[2 * k, k] = 1.0
        offsets[2 * k] = -hi[k]          # x_k - hi <= 0
        normals[2 * k + 1, k] = -1.0
        offsets[2 * k + 1] = lo[k]       # lo - x_k <= 0
    return normals, offsets


def build_cell(net: AnyNetwork, s: StateVector, bbox=DEFAULT_BBOX,
               maps: RegionMaps | None = None) -> AnalyticCell:
    """Assemble the oriented constraint system of the region labelled by s.

    The returned cell carries the canonical state (constant neurons forced to
    the sign of their constant), which is the key marching deduplicates on.
    """
    if maps is None:
        maps = affine_maps(net, s)
    s = maps.state
    bits = s.bits().astype(np.float64)
    orient = 1.0 - 2.0 * bits                           # active neuron -> flip sign
    raw_n = maps.neuron_normals * orient[:, None]
    raw_d = maps.neuron_offsets * orient

    row_norms = np.linalg.norm(maps.neuron_normals, axis=1)
    keep = row_norms > DEGENERATE_NORMAL_TOL
    dropped = tuple(int(i) for i in np.nonzero(~keep)[0])

    normals = [raw_n[keep] / row_norms[keep, None]]
    offsets = [raw_d[keep] / row_norms[keep]]
    refs: list[PlaneRef] = [PlaneRef(PLANE_NEURON, int(i)) for i in np.nonzero(keep)[0]]

    if maps.branch_normals.shape[0]:
        bnorm = np.linalg.norm(maps.branch_normals, axis=1)
        bkeep = bnorm > DEGENERATE_NORMAL_TOL
        normals.append(maps.branch_normals[bkeep] / bnorm[bkeep, None])
        offsets.append(maps.branch_offsets[bkeep] / bnorm[bkeep])
        refs.extend(PlaneRef(PLANE_BRANCH, int(maps.branch_targets[i]))
                    for i in np.nonzero(bkeep)[0])

    box_n, box_d = bbox_planes(bbox)
    normals.append(box_n)
    offsets.append(box_d)
    refs.extend(PlaneRef(PLANE_BBOX, k) for k in range(6))

    face = AffinePlane(maps.face_normal, float(maps.face_offset))
    fn = float(np.linalg.norm(maps.face_normal))
    if fn > DEGENERATE_NORMAL_TOL:
        fu, fo = maps.face_normal / fn, float(maps.face_offset) / fn
    else:
        fu, fo = np.zeros(3), 0.0

    return AnalyticCell(
        state=s,
        normals=np.concatenate(normals, axis=0),
        offsets=np.concatenate(offsets),
        refs=tuple(refs),
        face_plane=face,
        face_unit_normal=fu,
        face_unit_offset=fo,
        bbox=(tuple(bbox[0]), tuple(bbox[1])),
        dropped_bits=dropped,
        maps=maps,
    )


def point_in_cell(cell: AnalyticCell, x, tol: float = TOL_CELL) -> bool:
    """True iff every oriented constraint value at x is <= tol."""
    x = np.asarray(x, dtype=np.float64)
    vals = cell.normals @ x + cell.offsets
    return bool(np.all(vals <= tol))


def points_in_cell(cell: AnalyticCell, pts: np.ndarray, tol: float = TOL_CELL) -> np.ndarray:
    vals = pts @ cell.normals.T + cell.offsets
    return (vals <= tol).all(axis=1)


def solve_three_planes(p1: AffinePlane, p2: AffinePlane, p3: AffinePlane,
                       tol_det: float = TOL_DET):
    """Intersection point of three planes, or None when (near-)parallel.

    The determinant test is taken on unit-normalized rows so the threshold is
    scale-free; callers skip singular triples.
    """
    rows = np.array([p1.normal, p2.normal, p3.normal])
    rhs = -np.array([p1.offset, p2.offset, p3.offset])
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms <= DEGENERATE_NORMAL_TOL):
        return None
    scaled = rows / norms[:, None]
    if abs(np.linalg.det(scaled)) < tol_det:
        return None
    return np.linalg.solve(rows, rhs)


# ---------------------------------------------------------------------------
# face extraction


def _face_rows(cell: AnalyticCell):
    if np.linalg.norm(cell.face_unit_normal) <= DEGENERATE_NORMAL_TOL:
        return None
    return cell.face_unit_normal, cell.face_unit_offset


def _solve_pairs(cell: AnalyticCell, pairs_i: np.ndarray, pairs_j: np.ndarray,
                 tol_det: float = TOL_DET):
    """Batched 3x3 solves for plane pairs against the face plane.

    Pair order is canonicalized (i < j) so the same vertex solves to bitwise
    identical coordinates no matter which walk discovers it.
    """
    fr = _face_rows(cell)
    if fr is None:
        return np.empty((0, 3)), np.empty(0, dtype=np.int64)
    fu, fo = fr
    swap = pairs_i > pairs_j
    pi = np.where(swap, pairs_j, pairs_i)
    pj = np.where(swap, pairs_i, pairs_j)
    P = pi.shape[0]
    mats = np.empty((P, 3, 3))
    mats[:, 0] = cell.normals[pi]
    mats[:, 1] = cell.normals[pj]
    mats[:, 2] = fu
    rhs = np.empty((P, 3, 1))
    rhs[:, 0, 0] = -cell.offsets[pi]
    rhs[:, 1, 0] = -cell.offsets[pj]
    rhs[:, 2, 0] = -fo
    dets = np.abs(np.linalg.det(mats))
    ok = dets >= tol_det
    sol = np.full((P, 3), np.nan)
    if ok.any():
        sol[ok] = np.linalg.solve(mats[ok], rhs[ok])[:, :, 0]
    return sol, np.nonzero(ok)[0]


def _incident_planes(cell: AnalyticCell, v: np.ndarray, tol: float = TOL_ONPLANE) -> set[int]:
    vals = np.abs(cell.normals @ v + cell.offsets)
    return set(int(i) for i in np.nonzero(vals <= tol)[0])


def _dedup_vertices(verts: list[np.ndarray], plane_sets: list[set[int]],
                    tol_weld: float) -> tuple[list[np.ndarray], list[set[int]]]:
    """Merge vertices within tol_weld; representative is the lexicographic
    minimum of each cluster so the result is independent of discovery order."""
    uniq: list[list[np.ndarray]] = []
    sets: list[set[int]] = []
    for v, ps in zip(verts, plane_sets):
        for k, members in enumerate(uniq):
            if np.linalg.norm(members[0] - v) <= tol_weld:
                members.append(v)
                sets[k] |= ps
                break
        else:
            uniq.append([v])
            sets.append(set(ps))
    reps = []
    for members in uniq:
        arr = np.array(members)
        order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0]))
        reps.append(arr[order[0]])
    return reps, sets


def _orient_loop(verts: np.ndarray, face_unit_normal: np.ndarray):
    """Sort key basis: angles of vertices around the centroid in the face plane."""
    n = face_unit_normal
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, a)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    centroid = verts.mean(axis=0)
    rel = verts - centroid
    return np.arctan2(rel @ v, rel @ u)


def _canonical_rotation(verts: np.ndarray) -> int:
    order = np.lexsort((verts[:, 2], verts[:, 1], verts[:, 0]))
    return int(order[0])


def _loop_area(verts: np.ndarray, face_unit_normal: np.ndarray) -> float:
    total = np.zeros(3)
    for i in range(verts.shape[0]):
        total += np.cross(verts[i], verts[(i + 1) % verts.shape[0]])
    return float(0.5 * total @ face_unit_normal)


def _assemble_polygon(cell: AnalyticCell, reps: list[np.ndarray], sets: list[set[int]],
                      tol_onplane: float) -> FacePolygon | None:
    if len(reps) < 3:
        return None
    verts = np.array(reps)
    angles = _orient_loop(verts, cell.face_unit_normal)
    order = np.argsort(angles, kind="stable")
    verts = verts[order]
    sets = [sets[i] for i in order]
    if _loop_area(verts, cell.face_unit_normal) < 0.0:
        verts = verts[::-1]
        sets = sets[::-1]
    start = _canonical_rotation(verts)
    verts = np.roll(verts, -start, axis=0)
    sets = sets[start:] + sets[:start]

    transitions: list[tuple[PlaneRef, ...]] = []
    nv = verts.shape[0]
    for i in range(nv):
        shared = sets[i] & sets[(i + 1) % nv]
        mid = 0.5 * (verts[i] + verts[(i + 1) % nv])
        vals = np.abs(cell.normals @ mid + cell.offsets)
        on_mid = set(int(k) for k in np.nonzero(vals <= tol_onplane)[0])
        rows = shared & on_mid if shared & on_mid else (shared or on_mid)
        if not rows:
            rows = {int(np.argmin(vals))}
        transitions.append(tuple(sorted((cell.refs[r] for r in rows),
                                        key=lambda r: (r.kind, r.index))))
    return FacePolygon(cell.state, verts, cell.face_plane, tuple(transitions))


def extract_face_naive(cell: AnalyticCell, tol_cell: float = TOL_CELL,
                       tol_weld: float = TOL_WELD,
                       tol_onplane: float = TOL_ONPLANE) -> FacePolygon | None:
    """All-pairs vertex enumeration; None when the face misses the cell."""
    if _face_rows(cell) is None:
        return None
    K = cell.n_planes
    if K < 2:
        return None
    ii, jj = np.triu_indices(K, 1)
    sols, ok_idx = _solve_pairs(cell, ii, jj)
    cand = sols[ok_idx]
    if cand.shape[0] == 0:
        return None
    inside = points_in_cell(cell, cand, tol=tol_cell)
    verts = []
    plane_sets = []
    for row, keep in zip(ok_idx, inside):
        if not keep:
            continue
        v = sols[row]
        verts.append(v)
        plane_sets.append({int(ii[row]), int(jj[row])} | _incident_planes(cell, v, tol_onplane))
    if len(verts) < 3:
        return None
    reps, sets = _dedup_vertices(verts, plane_sets, tol_weld)
    return _assemble_polygon(cell, reps, sets, tol_onplane)


def extract_face_pivot(cell: AnalyticCell, start_ref: PlaneRef, start_point,
                       tol_cell: float = TOL_CELL, tol_weld: float = TOL_WELD,
                       tol_onplane: float = TOL_ONPLANE) -> FacePolygon | None:
    """Pivoting enumeration: walk the polygon edge by edge from a known boundary.

    Candidate planes are tried in order of Euclidean distance from the start
    point; indices already consumed as pivots are skipped.  Any anomaly (the
    start plane is not actually a boundary, the walk stalls or overruns) falls
    back to the naive enumeration.
    """
    poly, fell_back = extract_face_pivot_checked(cell, start_ref, start_point,
                                                 tol_cell, tol_weld, tol_onplane)
    return poly


def extract_face_pivot_checked(cell: AnalyticCell, start_ref: PlaneRef, start_point,
                               tol_cell: float = TOL_CELL, tol_weld: float = TOL_WELD,
                               tol_onplane: float = TOL_ONPLANE):
    """Pivot walk returning (polygon, fell_back_to_naive)."""
    if _face_rows(cell) is None:
        return None, False
    start_row = cell.ref_row(start_ref)
    if start_row is None:
        log.debug("pivot start plane %s absent from cell %s; using naive", start_ref, cell.state)
        return extract_face_naive(cell, tol_cell, tol_weld, tol_onplane), True

    x0 = np.asarray(start_point, dtype=np.float64)
    dists = np.abs(cell.normals @ x0 + cell.offsets)
    order = [int(i) for i in np.argsort(dists, kind="stable")]

    def walk_step(cur: int, skip: set[int], allow: int | None, prev_vertex):
        """First candidate (in distance order) giving a vertex valid in the cell.

        Candidates reproducing the previous corner are rejected: a plane
        coincident with the current pivot would otherwise spin the walk in
        place instead of advancing along the polygon edge.
        """
        cand_rows = [c for c in order if (c == allow) or (c != cur and c not in skip)]
        if not cand_rows:
            return None
        arr = np.array(cand_rows, dtype=np.int64)
        sols, ok_idx = _solve_pairs(cell, np.full(arr.shape, cur, dtype=np.int64), arr)
        if ok_idx.shape[0] == 0:
            return None
        good = sols[ok_idx]
        inside = points_in_cell(cell, good, tol=tol_cell)
        for pos, keep in zip(ok_idx, inside):
            if not keep:
                continue
            v = sols[pos]
            if prev_vertex is not None and np.linalg.norm(v - prev_vertex) <= tol_weld:
                continue
            return int(arr[pos]), v
        return None

    def fallback(reason: str):
        log.debug("pivot walk %s in cell %s; using naive", reason, cell.state)
        return extract_face_naive(cell, tol_cell, tol_weld, tol_onplane), True

    consumed = {start_row}
    step = walk_step(start_row, consumed, allow=None, prev_vertex=None)
    if step is None:
        return fallback("found no first vertex")
    cur, v = step
    verts = [v]
    pair_sets = [{start_row, cur}]
    consumed.add(cur)

    max_steps = 2 * cell.n_planes + 8
    for _ in range(max_steps):
        # The start plane may close the loop only once two vertices exist,
        # otherwise solving (first pivot, start) just reproduces the first vertex.
        allow = start_row if len(verts) >= 2 else None
        step = walk_step(cur, consumed, allow=allow, prev_vertex=verts[-1])
        if step is None:
            return fallback("stalled")
        nxt, v = step
        verts.append(v)
        pair_sets.append({cur, nxt})
        closed_geometrically = (len(verts) > 3
                                and np.linalg.norm(v - verts[0]) <= tol_weld)
        if nxt == start_row or closed_geometrically:
            break
        consumed.add(nxt)
        cur = nxt
    else:
        return fallback("overran the step budget")

    plane_sets = [ps | _incident_planes(cell, v, tol_onplane) for v, ps in zip(verts, pair_sets)]
    reps, sets = _dedup_vertices(verts, plane_sets, tol_weld)
    if len(reps) < 3:
        return fallback("collapsed to fewer than 3 vertices")
    poly = _assemble_polygon(cell, reps, sets, tol_onplane)
    return poly, False
