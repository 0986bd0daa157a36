"""ReLU implicit surface networks: evaluation, activation states, region-wise affine maps.

A network is a stack of dense / residual layers with ReLU activations and a
scalar linear head.  The scalar field F is piecewise affine; on each linear
region (labelled by the activation pattern of all hidden neurons) every neuron
pre-activation and F itself reduce to an affine functional of the input point.
All planes are kept in affine form (normal, offset) so networks with biases
are handled exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

FIELD_KINDS = ("sdf", "occupancy")

# Rows of a masked weight product whose norm falls below this are treated as
# constant functionals (the neuron's pre-activation no longer depends on x).
DEGENERATE_NORMAL_TOL = 1e-12


class NetworkFormatError(ValueError):
    """Raised when an interchange file fails to parse or violates invariants."""


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise NetworkFormatError(f"{name}: expected a 2-d weight matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NetworkFormatError(f"{name}: non-finite weight entries")
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise NetworkFormatError(f"{name}: expected a 1-d bias vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NetworkFormatError(f"{name}: non-finite bias entries")
    return arr


@dataclass(frozen=True)
class DenseLayer:
    """weight is (n_out, n_in), row-major: weight[i, j] multiplies input j into output i."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def in_width(self) -> int:
        return self.weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.weight.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.out_width

    def validate(self, name: str, in_width: int) -> int:
        _as_matrix(self.weight, f"{name}.weight")
        _as_vector(self.bias, f"{name}.bias")
        if self.bias.shape[0] != self.out_width:
            raise NetworkFormatError(
                f"{name}: bias length {self.bias.shape[0]} != weight rows {self.out_width}")
        if self.in_width != in_width:
            raise NetworkFormatError(
                f"{name}: expects input width {self.in_width}, got {in_width}")
        return self.out_width


@dataclass(frozen=True)
class ResidualBlock:
    """Inner dense stack whose final pre-activation is merged with a shortcut.

    Output = ReLU(shortcut(x_in) + inner_stack(x_in)) where the inner stack
    applies ReLU between its dense layers but not after the last one.  With
    shortcut_weight None the shortcut is the identity (requires matching
    widths); otherwise it is an affine map V x_in + v_bias.
    """

    inner: tuple[DenseLayer, ...]
    shortcut_weight: np.ndarray | None = None
    shortcut_bias: np.ndarray | None = None

    @property
    def out_width(self) -> int:
        return self.inner[-1].out_width

    @property
    def n_hidden(self) -> int:
        return sum(l.out_width for l in self.inner)

    def validate(self, name: str, in_width: int) -> int:
        if not self.inner:
            raise NetworkFormatError(f"{name}: residual block has no inner layers")
        w = in_width
        for i, lay in enumerate(self.inner):
            w = lay.validate(f"{name}.inner[{i}]", w)
        if self.shortcut_weight is None:
            if self.shortcut_bias is not None:
                raise NetworkFormatError(f"{name}: shortcut bias without shortcut weight")
            if in_width != self.out_width:
                raise NetworkFormatError(
                    f"{name}: identity shortcut requires input width {in_width} == "
                    f"output width {self.out_width}")
        else:
            v = _as_matrix(self.shortcut_weight, f"{name}.shortcut_weight")
            if v.shape != (self.out_width, in_width):
                raise NetworkFormatError(
                    f"{name}: shortcut weight shape {v.shape} != ({self.out_width}, {in_width})")
            if self.shortcut_bias is not None:
                b = _as_vector(self.shortcut_bias, f"{name}.shortcut_bias")
                if b.shape[0] != self.out_width:
                    raise NetworkFormatError(f"{name}: shortcut bias length mismatch")
        return self.out_width


Layer = Union[DenseLayer, ResidualBlock]


@dataclass(frozen=True)
class NetworkSpec:
    """A ReLU MLP implicit field: hidden layers, scalar linear head, field kind."""

    layers: tuple[Layer, ...]
    head_weight: np.ndarray
    head_bias: float
    field_kind: str = "sdf"
    input_dim: int = 3

    def __post_init__(self):
        object.__setattr__(self, "head_weight", _as_vector(self.head_weight, "head.weight"))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    def validate(self) -> None:
        if self.field_kind not in FIELD_KINDS:
            raise NetworkFormatError(f"field_kind must be one of {FIELD_KINDS}")
        if self.input_dim != 3:
            raise NetworkFormatError("input_dim is fixed at 3")
        if not self.layers:
            raise NetworkFormatError("network needs at least one hidden layer")
        w = self.input_dim
        for i, lay in enumerate(self.layers):
            w = lay.validate(f"layers[{i}]", w)
        if self.head_weight.shape[0] != w:
            raise NetworkFormatError(
                f"head: weight length {self.head_weight.shape[0]} != last layer width {w}")
        if not math.isfinite(self.head_bias):
            raise NetworkFormatError("head: non-finite bias")

    @property
    def n_hidden(self) -> int:
        return sum(l.n_hidden for l in self.layers)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        widths: list[int] = []
        for lay in self.layers:
            if isinstance(lay, DenseLayer):
                widths.append(lay.out_width)
            else:
                widths.extend(l.out_width for l in lay.inner)
        return tuple(widths)


@dataclass(frozen=True)
class EnsembleSpec:
    """Union of implicit fields: F(x) = max over subnetworks of F_i(x)."""

    subnetworks: tuple[NetworkSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "subnetworks", tuple(self.subnetworks))
        if not self.subnetworks:
            raise NetworkFormatError("ensemble needs at least one subnetwork")
        kinds = {s.field_kind for s in self.subnetworks}
        if len(kinds) != 1:
            raise NetworkFormatError("ensemble subnetworks must share field_kind")

    @property
    def field_kind(self) -> str:
        return self.subnetworks[0].field_kind

    @property
    def input_dim(self) -> int:
        return 3

    @property
    def n_hidden(self) -> int:
        return sum(s.n_hidden for s in self.subnetworks)

    @property
    def n_branches(self) -> int:
        return len(self.subnetworks)


AnyNetwork = Union[NetworkSpec, EnsembleSpec]


def subnetworks(net: AnyNetwork) -> tuple[NetworkSpec, ...]:
    if isinstance(net, EnsembleSpec):
        return net.subnetworks
    return (net,)


@dataclass(frozen=True)
class StateVector:
    """Activation pattern over all hidden neurons, ordered by (layer, neuron).

    For ensembles the bits of all subnetworks are concatenated and ``branch``
    holds the 0-based index of the dominating subnetwork; plain networks use
    branch None.  Packed bits make states cheap to hash, so a StateVector is
    the unique label of a linear region.
    """

    key: bytes
    n_bits: int
    branch: int | None = None

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray, branch: int | None = None) -> "StateVector":
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        return cls(key=np.packbits(arr).tobytes(), n_bits=arr.shape[0], branch=branch)

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.key, dtype=np.uint8))[: self.n_bits]

    def flip(self, index: int) -> "StateVector":
        if not 0 <= index < self.n_bits:
            raise IndexError(f"bit index {index} out of range [0, {self.n_bits})")
        b = self.bits().copy()
        b[index] ^= 1
        return StateVector.from_bits(b, branch=self.branch)

    def with_branch(self, branch: int) -> "StateVector":
        return StateVector(key=self.key, n_bits=self.n_bits, branch=branch)

    def __repr__(self) -> str:
        bits = "".join(str(int(b)) for b in self.bits())
        tail = "" if self.branch is None else f"|b{self.branch}"
        return f"StateVector({bits}{tail})"


@dataclass(frozen=True)
class AffinePlane:
    """Affine functional n . x + d; its zero set is a plane when ||n|| > 0."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(n)) and math.isfinite(self.offset)):
            raise ValueError("plane coefficients must be finite")
        object.__setattr__(self, "normal", n)

    def value(self, x) -> float:
        return float(self.normal @ np.asarray(x, dtype=np.float64) + self.offset)

    @property
    def degenerate(self) -> bool:
        return float(np.linalg.norm(self.normal)) <= DEGENERATE_NORMAL_TOL

    def unit(self) -> "AffinePlane":
        s = float(np.linalg.norm(self.normal))
        if s <= DEGENERATE_NORMAL_TOL:
            raise ValueError("cannot normalize a degenerate plane")
        return AffinePlane(self.normal / s, self.offset / s)


@dataclass(frozen=True)
class RegionMaps:
    """Affine functionals attached to one linear region.

    neuron row k evaluated at x reproduces the k-th hidden pre-activation for
    every x inside the region; the face row reproduces F.  ``state`` is the
    canonical form of the requested state: bits of neurons whose functional is
    constant on the region are forced to the sign of that constant, so equal
    regions always carry equal labels.
    """

    state: StateVector
    neuron_normals: np.ndarray        # (N, 3)
    neuron_offsets: np.ndarray        # (N,)
    face_normal: np.ndarray           # (3,)
    face_offset: float
    branch_normals: np.ndarray        # (M-1, 3) dominance planes, empty for plain nets
    branch_offsets: np.ndarray        # (M-1,)
    branch_targets: tuple[int, ...] = ()   # subnetwork index per dominance plane

    @property
    def neuron_planes(self) -> list[AffinePlane]:
        return [AffinePlane(n, float(d)) for n, d in zip(self.neuron_normals, self.neuron_offsets)]

    @property
    def face_plane(self) -> AffinePlane:
        return AffinePlane(self.face_normal, float(self.face_offset))


# ---------------------------------------------------------------------------
# forward evaluation


def _shortcut_apply(block: ResidualBlock, h_in: np.ndarray) -> np.ndarray:
    if block.shortcut_weight is None:
        return h_in
    out = h_in @ np.asarray(block.shortcut_weight).T
    if block.shortcut_bias is not None:
        out = out + np.asarray(block.shortcut_bias)
    return out


def _forward_hidden(sub: NetworkSpec, pts: np.ndarray, collect_bits: bool = False):
    """Batch forward of the hidden stack; pts is (M, 3).

    Returns (last hidden activations (M, n_L), bits (M, N) uint8 or None).
    """
    h = pts
    bits = [] if collect_bits else None
    for lay in sub.layers:
        if isinstance(lay, DenseLayer):
            pre = h @ lay.weight.T + lay.bias
            if collect_bits:
                bits.append(pre > 0.0)
            h = np.maximum(pre, 0.0)
        else:
            h_in = h
            for inner in lay.inner[:-1]:
                pre = h @ inner.weight.T + inner.bias
                if collect_bits:
                    bits.append(pre > 0.0)
                h = np.maximum(pre, 0.0)
            last = lay.inner[-1]
            pre = _shortcut_apply(lay, h_in) + h @ last.weight.T + last.bias
            if collect_bits:
                bits.append(pre > 0.0)
            h = np.maximum(pre, 0.0)
    packed = np.concatenate([b.astype(np.uint8) for b in bits], axis=1) if collect_bits else None
    return h, packed


def forward_many(net: AnyNetwork, pts: np.ndarray) -> np.ndarray:
    """Evaluate F at a batch of points, shape (M, 3) -> (M,).

    Occupancy networks return the raw pre-sigmoid logit; its zero level set is
    the 0.5-probability surface, so meshing code never needs the sigmoid.
    """
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (M, 3) points, got shape {pts.shape}")
    subs = subnetworks(net)
    vals = np.empty((pts.shape[0], len(subs)))
    for i, sub in enumerate(subs):
        h, _ = _forward_hidden(sub, pts)
        vals[:, i] = h @ sub.head_weight + sub.head_bias
    out = vals[:, 0] if len(subs) == 1 else vals.max(axis=1)
    if np.isnan(out).any():
        raise FloatingPointError("forward evaluation produced NaN")
    return out


def forward(net: AnyNetwork, x) -> float:
    """Evaluate F at one 3-point."""
    return float(forward_many(net, np.asarray(x, dtype=np.float64).reshape(1, 3))[0])


def state_at_many(net: AnyNetwork, pts: np.ndarray):
    """States for a batch of points: (bits (M, N) uint8, branch (M,) or None)."""
    pts = np.asarray(pts, dtype=np.float64)
    subs = subnetworks(net)
    all_bits = []
    vals = np.empty((pts.shape[0], len(subs)))
    for i, sub in enumerate(subs):
        h, bits = _forward_hidden(sub, pts, collect_bits=True)
        vals[:, i] = h @ sub.head_weight + sub.head_bias
        all_bits.append(bits)
    bits = np.concatenate(all_bits, axis=1)
    if isinstance(net, EnsembleSpec):
        return bits, vals.argmax(axis=1)  # argmax takes the lowest index on ties
    return bits, None


def state_at(net: AnyNetwork, x) -> StateVector:
    """Activation state of the region containing x (pre-activation 0 maps to bit 0)."""
    bits, branch = state_at_many(net, np.asarray(x, dtype=np.float64).reshape(1, 3))
    b = None if branch is None else int(branch[0])
    return StateVector.from_bits(bits[0], branch=b)


# ---------------------------------------------------------------------------
# region-wise affine maps


def _region_maps_sub(sub: NetworkSpec, bits: np.ndarray):
    """Planes of one subnetwork for the given bits (canonicalized in place).

    Returns (canonical bits, normals (N, 3), offsets (N,), face normal, face offset).
    """
    bits = np.asarray(bits, dtype=np.uint8).copy()
    normals = np.empty((sub.n_hidden, 3))
    offsets = np.empty(sub.n_hidden)
    A = np.eye(3)
    c = np.zeros(3)
    pos = 0

    def step(pre_A, pre_c):
        nonlocal A, c, pos
        w = pre_c.shape[0]
        normals[pos:pos + w] = pre_A
        offsets[pos:pos + w] = pre_c
        s = bits[pos:pos + w]
        const = np.linalg.norm(pre_A, axis=1) <= DEGENERATE_NORMAL_TOL
        if const.any():
            # Constant pre-activation: the bit is dictated by the constant's sign,
            # never by the label we arrived with.
            s[const] = (pre_c[const] > 0.0).astype(np.uint8)
        mask = s.astype(np.float64)
        A = pre_A * mask[:, None]
        c = pre_c * mask
        pos += w

    for lay in sub.layers:
        if isinstance(lay, DenseLayer):
            step(lay.weight @ A, lay.weight @ c + lay.bias)
        else:
            A_in, c_in = A, c
            for inner in lay.inner[:-1]:
                step(inner.weight @ A, inner.weight @ c + inner.bias)
            last = lay.inner[-1]
            if lay.shortcut_weight is None:
                sA, sc = A_in, c_in
            else:
                V = np.asarray(lay.shortcut_weight)
                sA = V @ A_in
                sc = V @ c_in
                if lay.shortcut_bias is not None:
                    sc = sc + np.asarray(lay.shortcut_bias)
            step(sA + last.weight @ A, sc + last.weight @ c + last.bias)

    face_n = sub.head_weight @ A
    face_c = float(sub.head_weight @ c + sub.head_bias)
    return bits, normals, offsets, face_n, face_c


def affine_maps(net: AnyNetwork, s: StateVector) -> RegionMaps:
    """All neuron planes and the face plane of the region labelled by s.

    For an ensemble the neuron planes of every subnetwork are concatenated and
    the M-1 dominance planes (F_i - F_branch as affine functionals) are
    returned as branch planes.
    """
    subs = subnetworks(net)
    n_total = sum(sub.n_hidden for sub in subs)
    if s.n_bits != n_total:
        raise ValueError(f"state has {s.n_bits} bits, network has {n_total} hidden neurons")
    bits = s.bits()
    canon_bits = []
    normals = []
    offsets = []
    faces = []
    pos = 0
    for sub in subs:
        chunk = bits[pos:pos + sub.n_hidden]
        cb, nn, off, fn, fc = _region_maps_sub(sub, chunk)
        canon_bits.append(cb)
        normals.append(nn)
        offsets.append(off)
        faces.append((fn, fc))
        pos += sub.n_hidden

    if isinstance(net, EnsembleSpec):
        if s.branch is None or not 0 <= s.branch < len(subs):
            raise ValueError("ensemble state needs a valid branch index")
        j = s.branch
        face_n, face_c = faces[j]
        others = [i for i in range(len(subs)) if i != j]
        bn = np.array([faces[i][0] - face_n for i in others]).reshape(len(others), 3)
        bo = np.array([faces[i][1] - face_c for i in others])
        state = StateVector.from_bits(np.concatenate(canon_bits), branch=j)
        return RegionMaps(state, np.concatenate(normals), np.concatenate(offsets),
                          face_n, face_c, bn, bo, tuple(others))
    face_n, face_c = faces[0]
    state = StateVector.from_bits(canon_bits[0], branch=None)
    return RegionMaps(state, normals[0], offsets[0], face_n, face_c,
                      np.empty((0, 3)), np.empty(0), ())


def grad_input(net: AnyNetwork, x) -> np.ndarray:
    """Input gradient of F at x: the face-plane normal of the containing region.

    On a region boundary the one-sided value follows the state convention
    (pre-activation exactly 0 counts as inactive).
    """
    maps = affine_maps(net, state_at(net, x))
    return maps.face_normal.copy()


# ---------------------------------------------------------------------------
# counting and diagnostics


def region_count_lower_bound(widths: Sequence[int], n0: int) -> int:
    """Lower bound on the maximal number of linear regions for the given widths.

    Exact integer: prod_{l<L} floor(n_l/n0)^n0 times sum_{j<=n0} C(n_L, j).
    """
    widths = list(widths)
    if n0 < 1 or not widths:
        raise ValueError("need n0 >= 1 and at least one layer width")
    for w in widths:
        if w < n0:
            raise ValueError(f"layer width {w} < input dimension {n0}")
    prod = 1
    for w in widths[:-1]:
        prod *= (w // n0) ** n0
    tail = sum(math.comb(widths[-1], j) for j in range(n0 + 1))
    return prod * tail


def check_unique_planes(cells: Sequence[tuple[StateVector, AffinePlane]],
                        tol: float = 1e-9) -> list[tuple[int, int]]:
    """Pairs of cells whose face planes are proportional within angle tol.

    Proportional face planes break the guarantee that marched faces connect
    into a single surface; violations are diagnostics, not failures.
    """
    m = len(cells)
    if m < 2:
        return []
    H = np.empty((m, 4))
    for i, (_, plane) in enumerate(cells):
        H[i, :3] = plane.normal
        H[i, 3] = plane.offset
    norms = np.linalg.norm(H, axis=1)
    norms[norms == 0.0] = 1.0
    U = H / norms[:, None]
    # Chord distance min(||u-v||, ||u+v||) equals the angle to first order and
    # stays accurate for angles far below what a dot product can resolve.
    out: list[tuple[int, int]] = []
    chunk = max(1, int(2e6) // max(m, 1))
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        diff = np.linalg.norm(U[lo:hi, None, :] - U[None, :, :], axis=2)
        summ = np.linalg.norm(U[lo:hi, None, :] + U[None, :, :], axis=2)
        close = np.minimum(diff, summ) <= tol
        ii, jj = np.nonzero(close)
        for a, b in zip(ii, jj):
            i, j = lo + int(a), int(b)
            if i < j:
                out.append((i, j))
    return out


# ---------------------------------------------------------------------------
# interchange format


def _layer_to_json(lay: Layer) -> dict:
    if isinstance(lay, DenseLayer):
        return {"kind": "dense", "weight": lay.weight.tolist(), "bias": lay.bias.tolist()}
    doc: dict = {"inner": [_layer_to_json(l) for l in lay.inner]}
    if lay.shortcut_weight is None:
        doc["kind"] = "residual_identity"
    else:
        doc["kind"] = "residual_linear"
        doc["shortcut_weight"] = np.asarray(lay.shortcut_weight).tolist()
        doc["shortcut_bias"] = (np.zeros(lay.out_width) if lay.shortcut_bias is None
                                else np.asarray(lay.shortcut_bias)).tolist()
    return doc


def _layer_from_json(doc: dict, name: str) -> Layer:
    kind = doc.get("kind")
    if kind == "dense":
        for key in ("weight", "bias"):
            if key not in doc:
                raise NetworkFormatError(f"{name}: dense layer missing '{key}'")
        return DenseLayer(_as_matrix(doc["weight"], f"{name}.weight"),
                          _as_vector(doc["bias"], f"{name}.bias"))
    if kind in ("residual_identity", "residual_linear"):
        inner_docs = doc.get("inner")
        if not inner_docs:
            raise NetworkFormatError(f"{name}: residual block missing 'inner'")
        inner = []
        for i, d in enumerate(inner_docs):
            lay = _layer_from_json(d, f"{name}.inner[{i}]")
            if not isinstance(lay, DenseLayer):
                raise NetworkFormatError(f"{name}.inner[{i}]: nested residual blocks unsupported")
            inner.append(lay)
        if kind == "residual_identity":
            return ResidualBlock(tuple(inner))
        return ResidualBlock(tuple(inner),
                             _as_matrix(doc["shortcut_weight"], f"{name}.shortcut_weight"),
                             _as_vector(doc["shortcut_bias"], f"{name}.shortcut_bias"))
    raise NetworkFormatError(f"{name}: unknown layer kind {kind!r}")


def save_network(net: AnyNetwork, path) -> None:
    """Write the interchange JSON; floats use shortest round-trip repr (lossless)."""
    subs = subnetworks(net)
    doc = {
        "field_kind": subs[0].field_kind,
        "input_dim": 3,
        "subnetworks": [
            {
                "layers": [_layer_to_json(l) for l in sub.layers],
                "head": {"weight": sub.head_weight.tolist(), "bias": sub.head_bias},
            }
            for sub in subs
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def network_from_dict(doc: dict, source: str = "<network>") -> AnyNetwork:
    if not isinstance(doc, dict):
        raise NetworkFormatError(f"{source}: top level must be a JSON object")
    field_kind = doc.get("field_kind", "sdf")
    if field_kind not in FIELD_KINDS:
        raise NetworkFormatError(f"{source}: field_kind must be one of {FIELD_KINDS}")
    if doc.get("input_dim", 3) != 3:
        raise NetworkFormatError(f"{source}: input_dim is fixed at 3")
    sub_docs = doc.get("subnetworks")
    if not sub_docs:
        raise NetworkFormatError(f"{source}: missing or empty 'subnetworks'")
    subs = []
    for i, sd in enumerate(sub_docs):
        name = f"{source}.subnetworks[{i}]"
        layers = [_layer_from_json(l, f"{name}.layers[{k}]")
                  for k, l in enumerate(sd.get("layers", []))]
        if not layers:
            raise NetworkFormatError(f"{name}: missing layers")
        head = sd.get("head")
        if not isinstance(head, dict) or "weight" not in head or "bias" not in head:
            raise NetworkFormatError(f"{name}: head needs 'weight' and 'bias'")
        subs.append(NetworkSpec(tuple(layers), _as_vector(head["weight"], f"{name}.head.weight"),
                                float(head["bias"]), field_kind=field_kind))
    if len(subs) == 1:
        return subs[0]
    return EnsembleSpec(tuple(subs))


def load_network(path) -> AnyNetwork:
    """Load the interchange JSON; a 1-element subnetworks list yields a plain NetworkSpec."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return network_from_dict(doc, source=str(path))


# ---------------------------------------------------------------------------
# reference constructions


def octahedron_net(c: float = 0.5, field_kind: str = "sdf") -> NetworkSpec:
    """Six-neuron net computing the l1 ball field ||x||_1 - c (octahedron zero set)."""
    rows = np.array([
        [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
    ])
    layer = DenseLayer(rows, np.zeros(6))
    return NetworkSpec((layer,), np.ones(6), -c, field_kind=field_kind)


def cube_ensemble(c: float = 0.5, shift: float = 2.0, field_kind: str = "sdf") -> EnsembleSpec:
    """Max-pool union of six single-neuron half-space fields; zero set is the cube [-c, c]^3.

    Each subnetwork computes ReLU(+-axis + shift) - (shift + c), which equals
    (+-axis - c) wherever |axis| < shift; the hidden planes sit at distance
    `shift` from the origin so they stay outside the working box and each cube
    face is a single quadrilateral.
    """
    subs = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            row = np.zeros((1, 3))
            row[0, axis] = sign
            layer = DenseLayer(row, np.array([shift]))
            subs.append(NetworkSpec((layer,), np.ones(1), -(shift + c), field_kind=field_kind))
    return EnsembleSpec(tuple(subs))
