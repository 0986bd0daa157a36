"""OBJ (text, polygons allowed) and binary little-endian PLY (triangles) I/O.

OBJ uses 1-based `v`/`f` records with shortest round-trip float formatting, so
write -> read reproduces coordinates exactly.  PLY is written as
float64 x/y/z properties and uchar-counted int32 vertex_indices lists.
"""

from __future__ import annotations

import struct

import numpy as np

from .meshes import PolygonMesh, TriangleMesh


class MeshIOError(IOError):
    pass


def write_obj(path, mesh: PolygonMesh | TriangleMesh) -> None:
    try:
        with open(path, "w") as fh:
            for v in mesh.vertices:
                fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
            loops = mesh.faces if isinstance(mesh, PolygonMesh) else mesh.triangles
            for loop in loops:
                fh.write("f " + " ".join(str(int(i) + 1) for i in loop) + "\n")
    except OSError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc


def read_obj(path) -> PolygonMesh:
    verts: list[list[float]] = []
    faces: list[np.ndarray] = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise MeshIOError(f"{path}:{lineno}: malformed vertex record")
                    verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif parts[0] == "f":
                    idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                    if len(idx) < 3:
                        raise MeshIOError(f"{path}:{lineno}: face with fewer than 3 vertices")
                    faces.append(np.array(idx, dtype=np.int64))
    except OSError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc
    return PolygonMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), faces)


def write_ply(path, mesh: TriangleMesh) -> None:
    if not isinstance(mesh, TriangleMesh):
        raise MeshIOError("PLY writer takes a TriangleMesh")
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
            for tri in mesh.triangles:
                fh.write(struct.pack("<B3i", 3, int(tri[0]), int(tri[1]), int(tri[2])))
    except OSError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc


def read_ply(path) -> TriangleMesh:
    """Reads only the binary little-endian layout produced by write_ply."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc
    mark = b"end_header\n"
    pos = data.find(mark)
    if not data.startswith(b"ply\n") or pos < 0:
        raise MeshIOError(f"{path}: not a PLY file")
    header = data[:pos].decode("ascii").splitlines()
    n_vert = n_face = 0
    for line in header:
        toks = line.split()
        if toks[:2] == ["element", "vertex"]:
            n_vert = int(toks[2])
        elif toks[:2] == ["element", "face"]:
            n_face = int(toks[2])
    body = data[pos + len(mark):]
    verts = np.frombuffer(body, dtype="<f8", count=3 * n_vert).reshape(n_vert, 3)
    tris = np.empty((n_face, 3), dtype=np.int64)
    off = 3 * n_vert * 8
    for t in range(n_face):
        count = body[off]
        if count != 3:
            raise MeshIOError(f"{path}: non-triangle face in PLY")
        tris[t] = struct.unpack_from("<3i", body, off + 1)
        off += 1 + 12
    return TriangleMesh(verts.copy(), tris)
