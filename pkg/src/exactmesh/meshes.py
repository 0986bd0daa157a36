"""Polygon and triangle meshes: welding, triangulation, topology checks,
plane recovery from vertices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import AffinePlane

TOL_WELD = 1e-7


@dataclass
class PolygonMesh:
    """Vertices plus cyclic index loops; one face plane per loop (optional)."""

    vertices: np.ndarray                      # (V, 3)
    faces: list[np.ndarray]                   # index loops, len >= 3 each
    face_planes: list[AffinePlane] | None = None
    dropped_faces: int = 0                    # loops lost to welding collapse

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = [np.asarray(f, dtype=np.int64) for f in self.faces]
        for f in self.faces:
            if f.min(initial=0) < 0 or (f.max(initial=-1) >= len(self.vertices) and len(f)):
                raise ValueError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass
class TriangleMesh:
    vertices: np.ndarray                      # (V, 3)
    triangles: np.ndarray                     # (T, 3) int

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle index out of range")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.triangles.shape[0]

    def edges(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge -> incident triangle indices."""
        out: dict[tuple[int, int], list[int]] = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(min(a, b)), int(max(a, b)))
                out.setdefault(key, []).append(t)
        return out

    def areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        cross = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def area(self) -> float:
        return float(self.areas().sum())


def polygon_area(mesh: PolygonMesh) -> float:
    total = 0.0
    for loop in mesh.faces:
        pts = mesh.vertices[loop]
        acc = np.zeros(3)
        for i in range(len(pts)):
            acc += np.cross(pts[i], pts[(i + 1) % len(pts)])
        total += 0.5 * np.linalg.norm(acc)
    return total


def weld(mesh: PolygonMesh, tol: float = TOL_WELD) -> PolygonMesh:
    """Merge vertices within tol via spatial hashing and reindex the loops.

    Loops that collapse below 3 distinct vertices are dropped and counted.
    Representatives are first occurrences, so welding an already-welded mesh
    is the identity.
    """
    verts = mesh.vertices
    if tol < 0:
        raise ValueError("weld tolerance must be >= 0")
    kept: list[np.ndarray] = []
    remap = np.empty(len(verts), dtype=np.int64)
    buckets: dict[tuple[int, int, int], list[int]] = {}
    inv = 1.0 / tol if tol > 0 else None
    for i, v in enumerate(verts):
        if inv is None:
            key = tuple(v)
            hit = None
            for j in buckets.get(key, []):
                if np.array_equal(kept[j], v):
                    hit = j
                    break
        else:
            cx, cy, cz = (int(np.floor(c * inv)) for c in v)
            hit = None
            for dx in (0, -1, 1):
                for dy in (0, -1, 1):
                    for dz in (0, -1, 1):
                        for j in buckets.get((cx + dx, cy + dy, cz + dz), []):
                            if np.linalg.norm(kept[j] - v) <= tol:
                                hit = j
                                break
                        if hit is not None:
                            break
                    if hit is not None:
                        break
                if hit is not None:
                    break
            key = (cx, cy, cz)
        if hit is None:
            hit = len(kept)
            kept.append(v.copy())
            buckets.setdefault(key, []).append(hit)
        remap[i] = hit

    faces = []
    planes = [] if mesh.face_planes is not None else None
    dropped = mesh.dropped_faces
    for k, loop in enumerate(mesh.faces):
        new = remap[loop]
        dedup = [new[0]]
        for idx in new[1:]:
            if idx != dedup[-1]:
                dedup.append(idx)
        if len(dedup) > 1 and dedup[0] == dedup[-1]:
            dedup.pop()
        if len(set(int(i) for i in dedup)) < 3:
            dropped += 1
            continue
        faces.append(np.array(dedup, dtype=np.int64))
        if planes is not None:
            planes.append(mesh.face_planes[k])
    return PolygonMesh(np.array(kept).reshape(-1, 3), faces, planes, dropped)


def triangulate(mesh: PolygonMesh) -> TriangleMesh:
    """Fan triangulation from each loop's first vertex; n-gon -> n-2 triangles."""
    tris = []
    for loop in mesh.faces:
        for i in range(1, len(loop) - 1):
            tris.append((loop[0], loop[i], loop[i + 1]))
    tri = np.array(tris, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(mesh.vertices.copy(), tri)


def topology_check(mesh: TriangleMesh) -> dict:
    """Watertight <=> every edge has exactly two incident faces; euler = V-E+F."""
    edges = mesh.edges()
    open_edges = sum(1 for faces in edges.values() if len(faces) == 1)
    nonmanifold = sum(1 for faces in edges.values() if len(faces) > 2)
    used = np.unique(mesh.triangles) if mesh.triangles.size else np.empty(0, dtype=np.int64)
    euler = int(len(used) - len(edges) + mesh.n_faces)

    parent = {int(v): int(v) for v in used}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (a, b) in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    components = len({find(int(v)) for v in used})
    return {
        "watertight": open_edges == 0 and nonmanifold == 0 and mesh.n_faces > 0,
        "open_edges": open_edges,
        "nonmanifold_edges": nonmanifold,
        "euler": euler,
        "components": components,
    }


def plane_from_vertices(vi, vj, vk) -> AffinePlane:
    """Plane through three affinely independent points, unit normal.

    Solves (V V^T) n = V 1 for the normal (the homogeneous normal equation of
    n . v = 1); planes through the origin make that system singular, so a
    cross-product fallback covers them.
    """
    V = np.column_stack([np.asarray(p, dtype=np.float64) for p in (vi, vj, vk)])
    e1 = V[:, 1] - V[:, 0]
    e2 = V[:, 2] - V[:, 0]
    cross = np.cross(e1, e2)
    cn = np.linalg.norm(cross)
    scale = max(np.linalg.norm(e1), np.linalg.norm(e2), 1e-300)
    if cn <= 1e-12 * scale * scale:
        raise ValueError("vertices are affinely dependent (collinear or coincident)")
    G = V @ V.T
    try:
        n = np.linalg.solve(G, V @ np.ones(3))
        nn = np.linalg.norm(n)
        if nn <= 1e-9 or not np.all(np.isfinite(n)):
            raise np.linalg.LinAlgError
        n = n / nn
    except np.linalg.LinAlgError:
        n = cross / cn
    offset = -float(n @ V[:, 0])
    plane = AffinePlane(n, offset)
    worst = max(abs(plane.value(V[:, k])) for k in range(3))
    if worst > 1e-9 * max(1.0, float(np.abs(V).max())):
        # normal-equation solution was poorly conditioned; use the cross product
        n = cross / cn
        plane = AffinePlane(n, -float(n @ V[:, 0]))
    return plane
