"""Locate zero-crossing seed points to start marching.

Three schemes: gradient descent on |F| (works on any field), sphere tracing
(signed distance fields only), and bisection between sign-opposite samples
(the only scheme that reliably triggers on occupancy logits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import AnyNetwork, forward, forward_many, grad_input

SEED_TOL = 1e-7

SCHEMES = ("sgd", "sphere_trace", "dichotomy")


class SeedingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedResult:
    point: np.ndarray | None
    iterations: int

    @property
    def converged(self) -> bool:
        return self.point is not None


def seed_sgd(net: AnyNetwork, x0, max_iters: int = 1000, step: float = 0.05,
             seed_tol: float = SEED_TOL) -> SeedResult:
    """Gradient descent on |F|; field gradients are exact region face normals.

    The step halves whenever the field value changes sign (the iterate walked
    past the surface), so the walk settles onto the zero set geometrically
    instead of oscillating at the step scale.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f = forward(net, x)
    cur = step
    for it in range(max_iters + 1):
        if abs(f) <= seed_tol:
            return SeedResult(x, it)
        g = grad_input(net, x)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return SeedResult(None, it)
        x_new = x - cur * np.sign(f) * g / gn
        f_new = forward(net, x_new)
        if np.sign(f_new) != np.sign(f):
            cur *= 0.5
        x, f = x_new, f_new
    return SeedResult(None, max_iters)


def seed_sphere_trace(net: AnyNetwork, x0, eta: float = 1.0, max_iters: int = 50,
                      seed_tol: float = SEED_TOL, escape_scale: float = 12.0) -> SeedResult:
    """x <- x - eta * F(x) * grad F(x); needs an SDF-like field.

    Raises on divergence (the iterate leaving escape_scale times the unit box).
    """
    if net.field_kind != "sdf":
        raise SeedingError("sphere tracing requires field_kind == 'sdf'")
    x = np.asarray(x0, dtype=np.float64).copy()
    for it in range(max_iters + 1):
        f = forward(net, x)
        if abs(f) <= seed_tol:
            return SeedResult(x, it)
        if float(np.abs(x).max()) > escape_scale:
            raise SeedingError(f"sphere tracing diverged after {it} iterations")
        x = x - eta * f * grad_input(net, x)
    return SeedResult(None, max_iters)


def seed_dichotomy(net: AnyNetwork, x_pos, x_neg, eps: float = SEED_TOL,
                   max_iters: int = 200, seed_tol: float = SEED_TOL) -> tuple[np.ndarray, int]:
    """Bisect the segment between a positive and a negative sample.

    Stops once the midpoint field value is within seed_tol or the bracket's
    value gap F(x+) - F(x-) falls below eps; each iteration halves the
    bracket.  Returns (point, iterations).
    """
    xp = np.asarray(x_pos, dtype=np.float64).copy()
    xn = np.asarray(x_neg, dtype=np.float64).copy()
    fp, fn = forward(net, xp), forward(net, xn)
    if not (fp > 0.0 and fn < 0.0):
        raise SeedingError(f"need F(x_pos) > 0 > F(x_neg), got {fp} and {fn}")
    for it in range(1, max_iters + 1):
        mid = 0.5 * (xp + xn)
        fm = forward(net, mid)
        if abs(fm) <= seed_tol:
            return mid, it
        if fm > 0.0:
            xp, fp = mid, fm
        else:
            xn, fn = mid, fm
        if fp - fn <= eps:
            return (xp, it) if abs(fp) <= abs(fn) else (xn, it)
    return (xp, max_iters) if abs(fp) <= abs(fn) else (xn, max_iters)


def validate_scheme(net: AnyNetwork, scheme: str) -> None:
    if scheme not in SCHEMES:
        raise SeedingError(f"unknown triggering scheme {scheme!r}; choose from {SCHEMES}")
    if net.field_kind == "occupancy" and scheme in ("sgd", "sphere_trace"):
        raise SeedingError(
            f"scheme {scheme!r} does not trigger on occupancy fields; use 'dichotomy'")


def sample_seeds(net: AnyNetwork, count: int, bbox, scheme: str = "dichotomy",
                 rng_seed: int = 0, eps: float = SEED_TOL, seed_tol: float = SEED_TOL,
                 retry_budget: int = 200, collect_iters: list | None = None) -> np.ndarray:
    """Up to `count` surface points, deterministic given rng_seed.

    Each seed index owns an independent random stream, so results do not
    depend on how the searches are scheduled.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    validate_scheme(net, scheme)
    lo = np.asarray(bbox[0], dtype=np.float64)
    hi = np.asarray(bbox[1], dtype=np.float64)
    seeds: list[np.ndarray] = []
    for index in range(count):
        rng = np.random.default_rng([rng_seed, index])
        found = None
        if scheme == "dichotomy":
            batch = 64
            for _ in range(retry_budget):
                pts = rng.uniform(lo, hi, size=(batch, 3))
                vals = forward_many(net, pts)
                pos = pts[vals > 0.0]
                neg = pts[vals < 0.0]
                if len(pos) and len(neg):
                    point, iters = seed_dichotomy(net, pos[0], neg[0],
                                                  eps=eps, seed_tol=seed_tol)
                    if collect_iters is not None:
                        collect_iters.append(iters)
                    found = point
                    break
        else:
            for _ in range(retry_budget):
                x0 = rng.uniform(lo, hi, size=3)
                if scheme == "sgd":
                    res = seed_sgd(net, x0, seed_tol=seed_tol)
                else:
                    res = seed_sphere_trace(net, x0, seed_tol=seed_tol)
                if res.converged:
                    if collect_iters is not None:
                        collect_iters.append(res.iterations)
                    found = res.point
                    break
        if found is not None:
            seeds.append(found)
    if not seeds:
        raise SeedingError("no surface located in bbox")
    return np.array(seeds)
