"""Discrete-sampling baseline and evaluation metrics.

Marching cubes runs on a grid of field values (hierarchically masked at high
resolutions so only voxels near the surface are evaluated); Chamfer distance,
F-score and voxel IoU compare meshes, networks, and ground-truth shapes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure

from .meshes import PolygonMesh, TriangleMesh, triangulate
from .network import AnyNetwork, EnsembleSpec, NetworkSpec, forward_many, subnetworks

DEFAULT_BBOX = ((-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))

CHAMFER_SCALE = 1e3   # reported values are mean nearest-neighbor distance x 1000
FSCORE_TAU = 5e-3


# ---------------------------------------------------------------------------
# fast float32 field evaluation


def _cast_net(net: AnyNetwork, dtype):
    subs = []
    for sub in subnetworks(net):
        layers = []
        for lay in sub.layers:
            if hasattr(lay, "inner"):
                inner = [(l.weight.astype(dtype), l.bias.astype(dtype)) for l in lay.inner]
                sw = None if lay.shortcut_weight is None else np.asarray(lay.shortcut_weight, dtype=dtype)
                sb = None if lay.shortcut_bias is None else np.asarray(lay.shortcut_bias, dtype=dtype)
                layers.append(("res", inner, sw, sb))
            else:
                layers.append(("dense", lay.weight.astype(dtype), lay.bias.astype(dtype)))
        subs.append((layers, sub.head_weight.astype(dtype), dtype.type(sub.head_bias)))
    return subs


def _eval_cast(subs, pts: np.ndarray) -> np.ndarray:
    vals = None
    for layers, head_w, head_b in subs:
        h = pts
        for item in layers:
            if item[0] == "dense":
                _, w, b = item
                h = np.maximum(h @ w.T + b, 0.0)
            else:
                _, inner, sw, sb = item
                h_in = h
                for w, b in inner[:-1]:
                    h = np.maximum(h @ w.T + b, 0.0)
                w, b = inner[-1]
                short = h_in if sw is None else h_in @ sw.T
                if sb is not None:
                    short = short + sb
                h = np.maximum(short + h @ w.T + b, 0.0)
        v = h @ head_w + head_b
        vals = v if vals is None else np.maximum(vals, v)
    return vals


def evaluate_grid_points(net: AnyNetwork, pts: np.ndarray, dtype=np.float32,
                         chunk: int = 1 << 19) -> np.ndarray:
    subs = _cast_net(net, np.dtype(dtype))
    out = np.empty(pts.shape[0], dtype=dtype)
    for lo in range(0, pts.shape[0], chunk):
        hi = min(pts.shape[0], lo + chunk)
        out[lo:hi] = _eval_cast(subs, pts[lo:hi].astype(dtype))
    return out


def _grid_axes(resolution: int, bbox):
    lo = np.asarray(bbox[0], dtype=np.float64)
    hi = np.asarray(bbox[1], dtype=np.float64)
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(3)]
    spacing = tuple((hi[k] - lo[k]) / (resolution - 1) for k in range(3))
    return lo, axes, spacing


def _full_volume(net: AnyNetwork, resolution: int, bbox, dtype=np.float32) -> np.ndarray:
    _, axes, _ = _grid_axes(resolution, bbox)
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    vals = evaluate_grid_points(net, pts, dtype=dtype)
    return vals.reshape(resolution, resolution, resolution)


def _masked_volume(net: AnyNetwork, resolution: int, bbox, coarse: int = 48,
                   margin: int = 1, dtype=np.float32):
    """Evaluate only fine grid points near the surface.

    A coarse pass bounds where the zero set can be: if the surface crosses a
    coarse cell, some corner magnitude is at most the local slope times the
    cell diagonal.  Cells passing that test are dilated by `margin` and
    expanded to a fine point mask; unevaluated points get a filler of the
    coarse sign so no spurious crossings appear, and the voxel mask keeps
    marching cubes inside the trusted band.
    """
    coarse = min(coarse, resolution)
    cvol = _full_volume(net, coarse, bbox, dtype=np.float64)
    cstep = float(max((np.asarray(bbox[1]) - np.asarray(bbox[0])) / (coarse - 1)))
    # local slope estimate from grid differences, with a global floor
    grads = np.array([np.abs(np.diff(cvol, axis=a)).max() for a in range(3)])
    lip = max(float(grads.max()) / cstep, 1e-9)
    corner_min = np.abs(cvol)
    for a in range(3):
        sl = [slice(None)] * 3
        sl[a] = slice(0, -1)
        other = [slice(None)] * 3
        other[a] = slice(1, None)
        corner_min = np.minimum(corner_min[tuple(sl)], corner_min[tuple(other)])
    near = corner_min <= 1.2 * lip * cstep * np.sqrt(3.0)
    # one extra dilation covers both the requested margin and the +-1 fine
    # point slack of the nearest-cell lookup below
    near = ndimage.binary_dilation(near, iterations=margin + 1)

    scale = (resolution - 1) / (coarse - 1)
    fine = np.arange(resolution)
    cell_idx = np.clip(np.floor(fine / scale).astype(np.int64), 0, coarse - 2)
    point_mask = near[np.ix_(cell_idx, cell_idx, cell_idx)]

    # filler: coarse sign upsampled by nearest index
    fine_idx = np.round(fine / scale).astype(np.int64).clip(0, coarse - 1)
    filler = np.sign(cvol[np.ix_(fine_idx, fine_idx, fine_idx)]).astype(dtype)
    filler[filler == 0] = 1.0
    vol = filler

    lo, axes, _ = _grid_axes(resolution, bbox)
    iw, jw, kw = np.nonzero(point_mask)
    pts = np.empty((iw.shape[0], 3))
    pts[:, 0] = axes[0][iw]
    pts[:, 1] = axes[1][jw]
    pts[:, 2] = axes[2][kw]
    vol[iw, jw, kw] = evaluate_grid_points(net, pts, dtype=dtype)
    voxel_mask = ndimage.binary_erosion(point_mask, iterations=1)
    return vol, voxel_mask


def marching_cubes(net: AnyNetwork, resolution: int, bbox=DEFAULT_BBOX,
                   method: str = "lewiner", exact_grid: bool | None = None) -> TriangleMesh:
    """Standard table-based marching cubes over a grid of field values.

    Vertices sit on zero-crossing grid edges by linear interpolation; an empty
    field yields an empty mesh.  Above resolution 96 only the band of voxels
    near the surface is evaluated (set exact_grid=True to force the full grid).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if exact_grid is None:
        exact_grid = resolution <= 96
    lo = np.asarray(bbox[0], dtype=np.float64)
    _, _, spacing = _grid_axes(resolution, bbox)
    mask = None
    if exact_grid:
        vol = _full_volume(net, resolution, bbox)
    else:
        vol, mask = _masked_volume(net, resolution, bbox)
    if not (vol.min() < 0.0 < vol.max()):
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    try:
        verts, faces, _, _ = measure.marching_cubes(
            vol, 0.0, spacing=spacing, method=method, allow_degenerate=False, mask=mask)
    except (ValueError, RuntimeError):
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    return TriangleMesh(np.asarray(verts, dtype=np.float64) + lo,
                        np.asarray(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# surface sampling


def sample_surface(obj, n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-uniform surface samples from a mesh or an analytic shape."""
    if hasattr(obj, "sample_surface"):
        return obj.sample_surface(n, rng)
    mesh = triangulate(obj) if isinstance(obj, PolygonMesh) else obj
    if not isinstance(mesh, TriangleMesh):
        raise TypeError(f"cannot sample surface of {type(obj).__name__}")
    if mesh.n_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    areas = mesh.areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero surface area")
    tri = rng.choice(mesh.n_faces, size=n, p=areas / total)
    u = rng.uniform(0, 1, size=(n, 2))
    flip = u.sum(axis=1) > 1.0
    u[flip] = 1.0 - u[flip]
    v = mesh.vertices
    t = mesh.triangles[tri]
    return (v[t[:, 0]] * (1.0 - u.sum(axis=1))[:, None]
            + v[t[:, 1]] * u[:, 0:1] + v[t[:, 2]] * u[:, 1:2])


def chamfer(mesh_a, mesh_b, n_samples: int = 100_000, rng_seed: int = 0) -> float:
    """Symmetric mean nearest-neighbor distance between surface samples, x 1000.

    Both objects are sampled with identical random streams, which makes the
    metric symmetric under argument swap and deterministic given the seed.
    """
    pa = sample_surface(mesh_a, n_samples, np.random.default_rng(rng_seed))
    pb = sample_surface(mesh_b, n_samples, np.random.default_rng(rng_seed))
    d_ab = cKDTree(pb).query(pa, k=1)[0]
    d_ba = cKDTree(pa).query(pb, k=1)[0]
    return float(0.5 * (d_ab.mean() + d_ba.mean()) * CHAMFER_SCALE)


def fscore(mesh_a, mesh_b, tau: float = FSCORE_TAU, n_samples: int = 100_000,
           rng_seed: int = 0) -> float:
    """Harmonic mean of precision/recall at distance threshold tau."""
    pa = sample_surface(mesh_a, n_samples, np.random.default_rng(rng_seed))
    pb = sample_surface(mesh_b, n_samples, np.random.default_rng(rng_seed))
    precision = float((cKDTree(pb).query(pa, k=1)[0] <= tau).mean())
    recall = float((cKDTree(pa).query(pb, k=1)[0] <= tau).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# occupancy and IoU


def _cell_centers(resolution: int, bbox):
    lo = np.asarray(bbox[0], dtype=np.float64)
    hi = np.asarray(bbox[1], dtype=np.float64)
    step = (hi - lo) / resolution
    axes = [lo[k] + (np.arange(resolution) + 0.5) * step[k] for k in range(3)]
    return axes, step


def mesh_occupancy_grid(mesh, resolution: int, bbox=DEFAULT_BBOX,
                        jitter_seed: int = 0) -> np.ndarray:
    """Point-in-mesh parity on a grid of cell centers via +z ray crossings.

    Column coordinates are jittered by a millionth of a cell so rays do not
    graze triangle edges.
    """
    if isinstance(mesh, PolygonMesh):
        mesh = triangulate(mesh)
    axes, step = _cell_centers(resolution, bbox)
    rng = np.random.default_rng(jitter_seed)
    xs = axes[0] + rng.uniform(-1e-6, 1e-6, size=resolution) * step[0]
    ys = axes[1] + rng.uniform(-1e-6, 1e-6, size=resolution) * step[1]
    zs = axes[2]
    # crossing counts below each z level, accumulated per column
    counts = np.zeros((resolution, resolution, resolution + 1), dtype=np.int32)
    v = mesh.vertices
    for tri in mesh.triangles:
        p0, p1, p2 = v[tri[0]], v[tri[1]], v[tri[2]]
        n = np.cross(p1 - p0, p2 - p0)
        if abs(n[2]) < 1e-300:
            continue
        xmin, xmax = min(p0[0], p1[0], p2[0]), max(p0[0], p1[0], p2[0])
        ymin, ymax = min(p0[1], p1[1], p2[1]), max(p0[1], p1[1], p2[1])
        i0, i1 = np.searchsorted(xs, [xmin, xmax])
        j0, j1 = np.searchsorted(ys, [ymin, ymax])
        if i0 == i1 or j0 == j1:
            continue
        cx = xs[i0:i1]
        cy = ys[j0:j1]
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        # 2-d barycentric point-in-triangle test
        d = (p1[1] - p2[1]) * (p0[0] - p2[0]) + (p2[0] - p1[0]) * (p0[1] - p2[1])
        if d == 0.0:
            continue
        a = ((p1[1] - p2[1]) * (gx - p2[0]) + (p2[0] - p1[0]) * (gy - p2[1])) / d
        b = ((p2[1] - p0[1]) * (gx - p2[0]) + (p0[0] - p2[0]) * (gy - p2[1])) / d
        c = 1.0 - a - b
        hit = (a >= 0) & (b >= 0) & (c >= 0)
        if not hit.any():
            continue
        zc = -(n[0] * (gx - p0[0]) + n[1] * (gy - p0[1])) / n[2] + p0[2]
        kk = np.searchsorted(zs, zc[hit])
        ii, jj = np.nonzero(hit)
        np.add.at(counts, (ii + i0, jj + j0, kk), 1)
    below = np.cumsum(counts[:, :, :-1], axis=2)
    return (below % 2).astype(bool)


def occupancy_grid(obj, resolution: int, bbox=DEFAULT_BBOX) -> np.ndarray:
    """Inside/outside grid at cell centers for a network, shape, or mesh."""
    if isinstance(obj, (NetworkSpec, EnsembleSpec)):
        axes, _ = _cell_centers(resolution, bbox)
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        vals = evaluate_grid_points(obj, pts).reshape(resolution, resolution, resolution)
        # SDF: negative inside; occupancy logit: positive inside
        return vals < 0.0 if obj.field_kind == "sdf" else vals > 0.0
    if hasattr(obj, "sdf"):
        axes, _ = _cell_centers(resolution, bbox)
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        return (obj.sdf(pts) < 0.0).reshape(resolution, resolution, resolution)
    return mesh_occupancy_grid(obj, resolution, bbox)


def iou(obj_a, obj_b, resolution: int = 128, bbox=DEFAULT_BBOX) -> float:
    """Occupancy-grid intersection over union in [0, 1]."""
    a = occupancy_grid(obj_a, resolution, bbox)
    b = occupancy_grid(obj_b, resolution, bbox)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)
