"""Quadric edge collapse decimation.

Each vertex accumulates the outer products of its incident face planes; an
edge collapse is charged the quadric form at the merged position, which is
chosen by solving the quadric's normal equations (midpoint/endpoint fallback
when near-singular).  Collapses are rejected when they would flip a surviving
face, break the edge link condition, touch a boundary, or cost more than the
ceiling; the ceiling is what keeps already-minimal meshes (e.g. an octahedron)
intact instead of degrading them toward the face target.
"""

from __future__ import annotations

import heapq
import itertools

import numpy as np

from .meshes import TriangleMesh

FALLBACK_DET_TOL = 1e-10
DEFAULT_COST_CEILING_FACTOR = 0.01


def _face_plane_homogeneous(v0, v1, v2):
    n = np.cross(v1 - v0, v2 - v0)
    nn = np.linalg.norm(n)
    if nn <= 1e-300:
        return None
    n = n / nn
    return np.array([n[0], n[1], n[2], -float(n @ v0)])


def _quadric_cost(Q, x):
    h = np.array([x[0], x[1], x[2], 1.0])
    return float(h @ Q @ h)


def _optimal_position(Q, va, vb):
    A = Q[:3, :3]
    b = Q[:3, 3]
    if abs(np.linalg.det(A)) >= FALLBACK_DET_TOL:
        try:
            x = np.linalg.solve(A, -b)
            if np.all(np.isfinite(x)):
                return x
        except np.linalg.LinAlgError:
            pass
    candidates = [0.5 * (va + vb), va, vb]
    costs = [_quadric_cost(Q, c) for c in candidates]
    return candidates[int(np.argmin(costs))]


class _Mesh:
    def __init__(self, mesh: TriangleMesh):
        self.verts = mesh.vertices.copy()
        self.faces = [tuple(int(i) for i in t) for t in mesh.triangles]
        self.face_alive = [True] * len(self.faces)
        self.vertex_faces: list[set[int]] = [set() for _ in range(len(self.verts))]
        for f, tri in enumerate(self.faces):
            for v in tri:
                self.vertex_faces[v].add(f)
        self.version = np.zeros(len(self.verts), dtype=np.int64)
        self.quadrics = np.zeros((len(self.verts), 4, 4))
        for f, tri in enumerate(self.faces):
            p = _face_plane_homogeneous(*(self.verts[v] for v in tri))
            if p is None:
                continue
            K = np.outer(p, p)
            for v in tri:
                self.quadrics[v] += K
        self.boundary = self._boundary_vertices()
        self.alive_faces = len(self.faces)

    def _boundary_vertices(self) -> set[int]:
        count: dict[tuple[int, int], int] = {}
        for tri in self.faces:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                count[key] = count.get(key, 0) + 1
        out = set()
        for (a, b), c in count.items():
            if c != 2:
                out.add(a)
                out.add(b)
        return out

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for f in self.vertex_faces[v]:
            if self.face_alive[f]:
                out.update(self.faces[f])
        out.discard(v)
        return out

    def edge_faces(self, a: int, b: int) -> list[int]:
        return [f for f in self.vertex_faces[a] & self.vertex_faces[b] if self.face_alive[f]]

    def collapse_ok(self, a: int, b: int, pos: np.ndarray) -> bool:
        if a in self.boundary or b in self.boundary:
            return False
        shared = self.edge_faces(a, b)
        if len(shared) != 2:
            return False
        # link condition: common neighbors must be exactly the two wing vertices
        wings = set()
        for f in shared:
            wings.update(self.faces[f])
        wings -= {a, b}
        if self.neighbors(a) & self.neighbors(b) != wings:
            return False
        # no surviving face may flip or degenerate
        for v, other in ((a, b), (b, a)):
            for f in self.vertex_faces[v]:
                if not self.face_alive[f] or f in shared:
                    continue
                tri = self.faces[f]
                old = [self.verts[i] for i in tri]
                new = [pos if i == v else self.verts[i] for i in tri]
                n_old = np.cross(old[1] - old[0], old[2] - old[0])
                n_new = np.cross(new[1] - new[0], new[2] - new[0])
                if n_new @ n_old <= 0.0:
                    return False
                if np.linalg.norm(n_new) <= 1e-14:
                    return False
        return True

    def collapse(self, a: int, b: int, pos: np.ndarray) -> None:
        for f in self.edge_faces(a, b):
            self.face_alive[f] = False
            self.alive_faces -= 1
        for f in list(self.vertex_faces[b]):
            if not self.face_alive[f]:
                continue
            tri = self.faces[f]
            self.faces[f] = tuple(a if i == b else i for i in tri)
            self.vertex_faces[a].add(f)
        self.vertex_faces[b] = set()
        self.verts[a] = pos
        self.quadrics[a] = self.quadrics[a] + self.quadrics[b]
        self.version[a] += 1
        self.version[b] += 1

    def extract(self) -> TriangleMesh:
        used = sorted({v for f, tri in enumerate(self.faces) if self.face_alive[f] for v in tri})
        remap = {v: i for i, v in enumerate(used)}
        verts = self.verts[used] if used else np.empty((0, 3))
        tris = np.array([[remap[v] for v in self.faces[f]]
                         for f in range(len(self.faces)) if self.face_alive[f]],
                        dtype=np.int64).reshape(-1, 3)
        return TriangleMesh(verts, tris)


def simplify_qecd(mesh: TriangleMesh, ratio: float,
                  max_cost: float | None = None) -> TriangleMesh:
    """Collapse cheapest edges until the face count reaches ratio x input.

    The achieved count is approximate: guarded collapses may stop early, so
    coarse meshes can keep more faces than requested.  max_cost defaults to
    1% of the squared bounding-box diagonal.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    if mesh.n_faces == 0 or ratio == 1.0:
        return TriangleMesh(mesh.vertices.copy(), mesh.triangles.copy())
    if max_cost is None:
        span = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
        max_cost = DEFAULT_COST_CEILING_FACTOR * float(span @ span)

    m = _Mesh(mesh)
    target = max(4, int(round(ratio * mesh.n_faces)))

    heap: list = []
    counter = itertools.count()

    def push_edge(a: int, b: int):
        a, b = (a, b) if a < b else (b, a)
        Q = m.quadrics[a] + m.quadrics[b]
        pos = _optimal_position(Q, m.verts[a], m.verts[b])
        cost = _quadric_cost(Q, pos)
        heapq.heappush(heap, (cost, next(counter), a, b,
                              int(m.version[a]), int(m.version[b]), pos))

    seen = set()
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            if key not in seen:
                seen.add(key)
                push_edge(*key)

    while heap and m.alive_faces > target:
        cost, _, a, b, va, vb, pos = heapq.heappop(heap)
        if m.version[a] != va or m.version[b] != vb:
            continue
        if cost > max_cost:
            break  # heap is cost-ordered: everything else is at least as bad
        if not m.collapse_ok(a, b, pos):
            continue
        m.collapse(a, b, pos)
        for nb in m.neighbors(a):
            push_edge(a, nb)
    return m.extract()
