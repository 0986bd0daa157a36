"""Fit small ReLU MLPs to analytic signed distance fields.

Training runs on a smooth ReLU surrogate g_a(x) = x * sigmoid(a*x) whose
sharpness a anneals upward over the run; the returned network uses plain ReLU.
Gradients are hand-written reverse mode; the optional eikonal mode penalizes
|| grad F || deviating from 1 using central differences through extra forward
evaluations, so one backward pass covers every term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import AnyNetwork, DenseLayer, NetworkSpec


@dataclass
class TrainConfig:
    widths: tuple[int, ...] = (16, 16, 16, 16)
    mode: str = "regression"             # regression | eikonal
    batch: int = 1024
    epochs: int = 2000                   # one minibatch step per epoch at desk scale
    lr: float = 5e-3
    lr_drops: tuple[tuple[float, float], ...] = (
        (0.733, 0.3), (0.8, 0.3), (0.9, 0.3), (0.967, 0.3))
    momentum: float = 0.9
    lambda_eikonal: float = 0.2
    lambda_normals: float = 1.0
    alpha_start: float = 10.0
    alpha_end: float = 10_000.0
    near_fraction: float = 0.5
    noise_sigma: float = 0.05
    bbox: tuple = ((-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))
    rng_seed: int = 0
    fd_step: float = 1e-4                # eikonal-mode finite-difference step
    init_net: NetworkSpec | None = None

    def __post_init__(self):
        if self.mode not in ("regression", "eikonal"):
            raise ValueError("mode must be 'regression' or 'eikonal'")
        if self.alpha_end < self.alpha_start:
            raise ValueError("the sharpness schedule must be nondecreasing")
        if self.lambda_eikonal < 0 or self.lambda_normals < 0:
            raise ValueError("penalties must be >= 0")

    def alpha_at(self, epoch: int) -> float:
        if self.epochs <= 1:
            return self.alpha_end
        t = epoch / (self.epochs - 1)
        return float(self.alpha_start * (self.alpha_end / self.alpha_start) ** t)

    def lr_at(self, epoch: int) -> float:
        lr = self.lr
        frac = epoch / max(self.epochs, 1)
        for at, factor in self.lr_drops:
            if frac >= at:
                lr *= factor
        return lr


@dataclass
class MLPParams:
    weights: list[np.ndarray]   # hidden layers, (n_out, n_in)
    biases: list[np.ndarray]
    head_w: np.ndarray
    head_b: float

    @classmethod
    def init(cls, widths, rng: np.random.Generator) -> "MLPParams":
        dims = [3] + list(widths)
        ws, bs = [], []
        for n_in, n_out in zip(dims[:-1], dims[1:]):
            ws.append(rng.normal(scale=np.sqrt(2.0 / n_in), size=(n_out, n_in)))
            bs.append(np.zeros(n_out))
        head_w = rng.normal(scale=np.sqrt(1.0 / dims[-1]), size=dims[-1])
        return cls(ws, bs, head_w, 0.0)

    @classmethod
    def from_network(cls, net: NetworkSpec) -> "MLPParams":
        ws, bs = [], []
        for lay in net.layers:
            if not isinstance(lay, DenseLayer):
                raise ValueError("trainer handles plain dense stacks only")
            ws.append(lay.weight.copy())
            bs.append(lay.bias.copy())
        return cls(ws, bs, net.head_weight.copy(), float(net.head_bias))

    def to_network(self, field_kind: str = "sdf") -> NetworkSpec:
        layers = tuple(DenseLayer(w.copy(), b.copy()) for w, b in zip(self.weights, self.biases))
        return NetworkSpec(layers, self.head_w.copy(), float(self.head_b), field_kind=field_kind)

    def flat(self) -> list[np.ndarray]:
        return self.weights + self.biases + [self.head_w, np.array([self.head_b])]


def _soft_relu(x: np.ndarray, alpha: float):
    """x * sigmoid(alpha x) and its derivative, numerically stable."""
    s = 1.0 / (1.0 + np.exp(-np.clip(alpha * x, -60.0, 60.0)))
    return x * s, s + alpha * x * s * (1.0 - s)


def forward_soft(params: MLPParams, pts: np.ndarray, alpha: float | None):
    """Batch forward; alpha None means hard ReLU.  Returns (values, cache)."""
    h = pts
    cache = []
    for w, b in zip(params.weights, params.biases):
        pre = h @ w.T + b
        if alpha is None:
            act = np.maximum(pre, 0.0)
            dact = (pre > 0.0).astype(np.float64)
        else:
            act, dact = _soft_relu(pre, alpha)
        cache.append((h, dact))
        h = act
    out = h @ params.head_w + params.head_b
    cache.append(h)
    return out, cache


def backward_soft(params: MLPParams, cache, dout: np.ndarray):
    """Reverse pass for per-sample output gradients dout (shape (M,))."""
    h_last = cache[-1]
    g_head_w = dout @ h_last
    g_head_b = float(dout.sum())
    gh = np.outer(dout, params.head_w)
    g_ws, g_bs = [], []
    for (h_in, dact), w in zip(reversed(cache[:-1]), reversed(params.weights)):
        gpre = gh * dact
        g_ws.append(gpre.T @ h_in)
        g_bs.append(gpre.sum(axis=0))
        gh = gpre @ w
    g_ws.reverse()
    g_bs.reverse()
    return g_ws, g_bs, g_head_w, g_head_b, gh  # gh is the input-point gradient


def loss_and_grads(params: MLPParams, pts: np.ndarray, targets: np.ndarray,
                   alpha: float | None, loss: str = "l1"):
    """Mean |F - d| (or squared) plus gradients w.r.t. every parameter."""
    out, cache = forward_soft(params, pts, alpha)
    resid = out - targets
    m = pts.shape[0]
    if loss == "l1":
        value = float(np.abs(resid).mean())
        dout = np.sign(resid) / m
    elif loss == "l2":
        value = float((resid ** 2).mean())
        dout = 2.0 * resid / m
    else:
        raise ValueError("loss must be 'l1' or 'l2'")
    g_ws, g_bs, g_hw, g_hb, _ = backward_soft(params, cache, dout)
    return value, (g_ws, g_bs, g_hw, g_hb)


def _fd_gradient_objective(params: MLPParams, pts: np.ndarray, alpha: float | None,
                           fd_step: float, grad_to_value_and_dgrad):
    """Objective of the input gradient, taken by central differences.

    The six shifted evaluations are stacked into one batch; backpropagating
    the chain coefficients through that single batch gives the exact gradient
    of the finite-difference objective.  grad_to_value_and_dgrad maps the
    (M, 3) gradient estimates to (scalar value, (M, 3) sensitivity).
    """
    m = pts.shape[0]
    shifts = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = fd_step
        shifts += [pts + e, pts - e]
    big = np.concatenate(shifts, axis=0)
    out, cache = forward_soft(params, big, alpha)
    parts = out.reshape(6, m)
    grad = np.stack([(parts[2 * k] - parts[2 * k + 1]) / (2 * fd_step) for k in range(3)],
                    axis=1)
    value, dgrad = grad_to_value_and_dgrad(grad)
    dout = np.empty(6 * m)
    for k in range(3):
        dout[2 * k * m:(2 * k + 1) * m] = dgrad[:, k] / (2 * fd_step)
        dout[(2 * k + 1) * m:(2 * k + 2) * m] = -dgrad[:, k] / (2 * fd_step)
    g_ws, g_bs, g_hw, g_hb, _ = backward_soft(params, cache, dout)
    return value, (g_ws, g_bs, g_hw, g_hb)


def eikonal_loss_and_grads(params: MLPParams, pts: np.ndarray, alpha: float | None,
                           fd_step: float):
    """Mean | ||grad F|| - 1 | over field points."""
    m = pts.shape[0]

    def objective(grad):
        norms = np.linalg.norm(grad, axis=1)
        value = float(np.abs(norms - 1.0).mean())
        safe = np.maximum(norms, 1e-12)
        dgrad = (np.sign(norms - 1.0) / m)[:, None] * grad / safe[:, None]
        return value, dgrad

    return _fd_gradient_objective(params, pts, alpha, fd_step, objective)


def normals_loss_and_grads(params: MLPParams, surf_pts: np.ndarray, normals: np.ndarray,
                           alpha: float | None, fd_step: float):
    """Mean || grad F(z) - n_z || over surface samples."""
    m = surf_pts.shape[0]

    def objective(grad):
        diff = grad - normals
        dn = np.linalg.norm(diff, axis=1)
        value = float(dn.mean())
        safe = np.maximum(dn, 1e-12)
        dgrad = diff / safe[:, None] / m
        return value, dgrad

    return _fd_gradient_objective(params, surf_pts, alpha, fd_step, objective)


def _sample_batch(shape, cfg: TrainConfig, rng: np.random.Generator):
    n_near = int(round(cfg.batch * cfg.near_fraction))
    n_uni = cfg.batch - n_near
    lo = np.asarray(cfg.bbox[0])
    hi = np.asarray(cfg.bbox[1])
    parts = []
    if n_near:
        surf = shape.sample_surface(n_near, rng)
        parts.append(surf + rng.normal(scale=cfg.noise_sigma, size=surf.shape))
    if n_uni:
        parts.append(rng.uniform(lo, hi, size=(n_uni, 3)))
    return np.clip(np.concatenate(parts, axis=0), lo, hi)


@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)
    eval_losses: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)


def fit_direct(shape, cfg: TrainConfig, target_fn=None) -> tuple[NetworkSpec, TrainLog]:
    """Train an MLP on a shape's signed distance samples; returns (net, log).

    target_fn overrides the regression target (defaults to shape.sdf).
    Deterministic given cfg.rng_seed; epochs == 0 returns the initial network.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    if cfg.init_net is not None:
        params = MLPParams.from_network(cfg.init_net)
    else:
        params = MLPParams.init(cfg.widths, rng)
    target = target_fn if target_fn is not None else shape.sdf
    log = TrainLog()
    vel = [np.zeros_like(g) for g in params.flat()]

    for epoch in range(cfg.epochs):
        pts = _sample_batch(shape, cfg, rng)
        d = target(pts)
        alpha = cfg.alpha_at(epoch)
        with np.errstate(over="ignore", invalid="ignore"):
            value, (g_ws, g_bs, g_hw, g_hb) = loss_and_grads(
                params, pts, d, alpha, loss="l1")
            if cfg.mode == "eikonal":
                ev, (e_ws, e_bs, e_hw, e_hb) = eikonal_loss_and_grads(
                    params, pts, alpha, cfg.fd_step)
                value += cfg.lambda_eikonal * ev
                for k in range(len(g_ws)):
                    g_ws[k] += cfg.lambda_eikonal * e_ws[k]
                    g_bs[k] += cfg.lambda_eikonal * e_bs[k]
                g_hw = g_hw + cfg.lambda_eikonal * e_hw
                g_hb = g_hb + cfg.lambda_eikonal * e_hb
                if cfg.lambda_normals > 0 and hasattr(shape, "normals"):
                    surf = shape.sample_surface(cfg.batch // 2, rng)
                    nv, (n_ws, n_bs, n_hw, n_hb) = normals_loss_and_grads(
                        params, surf, shape.normals(surf), alpha, cfg.fd_step)
                    value += cfg.lambda_normals * nv
                    for k in range(len(g_ws)):
                        g_ws[k] += cfg.lambda_normals * n_ws[k]
                        g_bs[k] += cfg.lambda_normals * n_bs[k]
                    g_hw = g_hw + cfg.lambda_normals * n_hw
                    g_hb = g_hb + cfg.lambda_normals * n_hb
        if not np.isfinite(value):
            raise FloatingPointError(
                f"training loss became non-finite at epoch {epoch} (lr {cfg.lr_at(epoch)})")
        log.losses.append(value)
        log.alphas.append(alpha)

        lr = cfg.lr_at(epoch)
        grads = g_ws + g_bs + [g_hw, np.array([g_hb])]
        tensors = params.flat()
        for v, g, t in zip(vel, grads, tensors):
            v *= cfg.momentum
            v -= lr * g
            t += v
        params.head_b = float(tensors[-1][0])

    net = params.to_network()
    # held-out evaluation with hard ReLU (the network that is actually meshed)
    eval_pts = _sample_batch(shape, cfg, np.random.default_rng([cfg.rng_seed, 999]))
    ev, _ = forward_soft(params, eval_pts, alpha=None)
    log.eval_losses.append(float(np.abs(ev - target(eval_pts)).mean()))
    return net, log


def hard_relu_l1_error(net_or_params, shape, n: int = 4096, rng_seed: int = 123,
                       target_fn=None, bbox=((-1.2,) * 3, (1.2,) * 3)) -> float:
    """Mean |F - d| with hard ReLU on fresh uniform samples."""
    params = net_or_params if isinstance(net_or_params, MLPParams) \
        else MLPParams.from_network(net_or_params)
    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(np.asarray(bbox[0]), np.asarray(bbox[1]), size=(n, 3))
    target = target_fn if target_fn is not None else shape.sdf
    out, _ = forward_soft(params, pts, alpha=None)
    return float(np.abs(out - target(pts)).mean())
