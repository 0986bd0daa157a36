"""Ground-truth solids with exact signed distance functions and area-uniform
surface samplers; the reference geometry the metrics compare against."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Sphere:
    radius: float = 0.5
    kind: str = "sphere"

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts, axis=1) - self.radius

    def normals(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        n = np.linalg.norm(pts, axis=1, keepdims=True)
        return pts / np.maximum(n, 1e-12)

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return self.radius * v


@dataclass(frozen=True)
class Box:
    half_extents: tuple[float, float, float] = (0.45, 0.35, 0.55)
    kind: str = "box"

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        h = np.asarray(self.half_extents)
        q = np.abs(pts) - h
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        hx, hy, hz = self.half_extents
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        face = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-1.0, 1.0, size=(n, 2))
        out = np.empty((n, 3))
        h = np.asarray(self.half_extents)
        for f in range(6):
            m = face == f
            axis = f // 2
            sign = 1.0 if f % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            out[m, axis] = sign * h[axis]
            out[m, others[0]] = u[m, 0] * h[others[0]]
            out[m, others[1]] = u[m, 1] * h[others[1]]
        return out

    def normals(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        h = np.asarray(self.half_extents)
        q = np.abs(pts) - h
        sign = np.where(pts >= 0, 1.0, -1.0)
        out = np.maximum(q, 0.0)
        onorm = np.linalg.norm(out, axis=1)
        n = np.empty_like(pts)
        outside = onorm > 0
        n[outside] = (out[outside] / onorm[outside, None]) * sign[outside]
        inside = ~outside
        if inside.any():
            axis = q[inside].argmax(axis=1)
            n[inside] = 0.0
            n[inside, axis] = sign[inside, axis]
        return n



@dataclass(frozen=True)
class Torus:
    major: float = 0.35
    minor: float = 0.15
    kind: str = "torus"

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        ring = np.hypot(np.hypot(pts[:, 0], pts[:, 1]) - self.major, pts[:, 2])
        return ring - self.minor

    def normals(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        rho_safe = np.maximum(rho, 1e-12)
        ring = np.column_stack([self.major * pts[:, 0] / rho_safe,
                                self.major * pts[:, 1] / rho_safe,
                                np.zeros(len(pts))])
        d = pts - ring
        dn = np.linalg.norm(d, axis=1, keepdims=True)
        return d / np.maximum(dn, 1e-12)

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # area element is proportional to (major + minor cos theta): rejection
        # sample the tube angle so the points are area uniform
        out = np.empty((n, 3))
        done = 0
        while done < n:
            m = 2 * (n - done)
            theta = rng.uniform(0.0, 2 * np.pi, size=m)
            keep = rng.uniform(0.0, 1.0, size=m) <= (
                (self.major + self.minor * np.cos(theta)) / (self.major + self.minor))
            theta = theta[keep][: n - done]
            phi = rng.uniform(0.0, 2 * np.pi, size=theta.shape[0])
            r = self.major + self.minor * np.cos(theta)
            out[done:done + theta.shape[0], 0] = r * np.cos(phi)
            out[done:done + theta.shape[0], 1] = r * np.sin(phi)
            out[done:done + theta.shape[0], 2] = self.minor * np.sin(theta)
            done += theta.shape[0]
        return out


@dataclass(frozen=True)
class L1Ball:
    radius: float = 0.5
    kind: str = "l1ball"

    def l1_field(self, pts: np.ndarray) -> np.ndarray:
        """||x||_1 - c; not the Euclidean SDF but shares the zero set."""
        pts = np.atleast_2d(pts)
        return np.abs(pts).sum(axis=1) - self.radius

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        """Exact Euclidean signed distance to the octahedron surface."""
        pts = np.atleast_2d(pts)
        p = np.abs(pts)  # fold into the positive octant triangle
        c = self.radius
        tri = np.array([[c, 0.0, 0.0], [0.0, c, 0.0], [0.0, 0.0, c]])
        d = _point_triangle_distance(p, tri)
        sign = np.where(p.sum(axis=1) < c, -1.0, 1.0)
        return sign * d

    def normals(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        s = np.where(pts >= 0, 1.0, -1.0)
        return s / np.sqrt(3.0)

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # uniform barycentric samples on one face, random octant signs
        c = self.radius
        u = rng.uniform(0, 1, size=(n, 2))
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        bary = np.column_stack([u[:, 0], u[:, 1], 1.0 - u.sum(axis=1)])
        pts = c * bary
        signs = rng.choice([-1.0, 1.0], size=(n, 3))
        return pts * signs


def _point_triangle_distance(p: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Euclidean distance from points to one triangle (vectorized)."""
    a, b, c = tri
    ab, ac = b - a, c - a
    n = np.cross(ab, ac)
    n = n / np.linalg.norm(n)
    ap = p - a
    # project into the plane, solve barycentrics
    d1 = ap @ ab
    d2 = ap @ ac
    g11, g12, g22 = ab @ ab, ab @ ac, ac @ ac
    det = g11 * g22 - g12 * g12
    v = (g22 * d1 - g12 * d2) / det
    w = (g11 * d2 - g12 * d1) / det
    inside = (v >= 0) & (w >= 0) & (v + w <= 1.0)
    dist = np.empty(p.shape[0])
    dist[inside] = np.abs(ap[inside] @ n)
    out = ~inside
    if out.any():
        q = p[out]
        best = None
        for e0, e1 in ((a, b), (b, c), (c, a)):
            seg = e1 - e0
            t = np.clip(((q - e0) @ seg) / (seg @ seg), 0.0, 1.0)
            closest = e0 + t[:, None] * seg
            d = np.linalg.norm(q - closest, axis=1)
            best = d if best is None else np.minimum(best, d)
        dist[out] = best
    return dist


SHAPES = {"sphere": Sphere, "box": Box, "torus": Torus, "l1ball": L1Ball}


def make_shape(spec: str):
    """Parse 'sphere:0.5', 'box:0.4,0.3,0.5', 'torus:0.35,0.15', 'l1ball:0.5'."""
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name not in SHAPES:
        raise ValueError(f"unknown shape {name!r}; choose from {sorted(SHAPES)}")
    if not args:
        return SHAPES[name]()
    vals = [float(tok) for tok in args.split(",")]
    if name == "sphere":
        return Sphere(*vals)
    if name == "torus":
        return Torus(*vals)
    if name == "l1ball":
        return L1Ball(*vals)
    if len(vals) != 3:
        raise ValueError("box takes three half-extents")
    return Box(tuple(vals))
