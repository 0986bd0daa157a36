"""Export manifests: an explicit, auditable map from checkpoint tensor names
to interchange layers.

The manifest is YAML with this shape:

    checkpoint: model.pt
    field_kind: sdf            # or occupancy
    subnetworks:
      - layers:
          - kind: dense
            weight: net.0.weight
            bias: net.0.bias
            activation: relu          # optional, relu assumed
          - kind: residual_identity   # or residual_linear
            inner:
              - {kind: dense, weight: blk.0.weight, bias: blk.0.bias}
              - {kind: dense, weight: blk.1.weight, bias: blk.1.bias}
            # residual_linear additionally takes shortcut_weight / shortcut_bias
        head:
          weight: head.weight
          bias: head.bias

Tensor names refer to state-dict keys; there is no graph auto-discovery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

FIELD_KINDS = ("sdf", "occupancy")
RELU_NAMES = ("relu",)
LINEAR_NAMES = ("linear", "identity", "none")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class DenseRef:
    weight: str
    bias: str
    activation: str = "relu"


@dataclass(frozen=True)
class BlockRef:
    kind: str                      # residual_identity | residual_linear
    inner: tuple[DenseRef, ...]
    shortcut_weight: str | None = None
    shortcut_bias: str | None = None
    activation: str = "relu"


@dataclass(frozen=True)
class SubnetRef:
    layers: tuple
    head_weight: str
    head_bias: str


@dataclass(frozen=True)
class ExportManifest:
    checkpoint: str
    field_kind: str
    subnetworks: tuple[SubnetRef, ...]
    output: str | None = None


def _dense_from(doc: dict, where: str) -> DenseRef:
    for key in ("weight", "bias"):
        if key not in doc:
            raise ManifestError(f"{where}: dense layer needs '{key}'")
    return DenseRef(str(doc["weight"]), str(doc["bias"]),
                    str(doc.get("activation", "relu")).lower())


def _layer_from(doc: dict, where: str):
    kind = str(doc.get("kind", "dense")).lower()
    if kind == "dense":
        return _dense_from(doc, where)
    if kind in ("residual_identity", "residual_linear"):
        inner_docs = doc.get("inner")
        if not inner_docs:
            raise ManifestError(f"{where}: residual block needs a non-empty 'inner' list")
        inner = tuple(_dense_from(d, f"{where}.inner[{i}]")
                      for i, d in enumerate(inner_docs))
        sw = doc.get("shortcut_weight")
        sb = doc.get("shortcut_bias")
        if kind == "residual_linear" and sw is None:
            raise ManifestError(f"{where}: residual_linear needs 'shortcut_weight'")
        if kind == "residual_identity" and sw is not None:
            raise ManifestError(f"{where}: residual_identity takes no shortcut tensors")
        return BlockRef(kind, inner, None if sw is None else str(sw),
                        None if sb is None else str(sb),
                        str(doc.get("activation", "relu")).lower())
    raise ManifestError(f"{where}: unknown layer kind {kind!r}")


def manifest_from_dict(doc: dict, source: str = "<manifest>") -> ExportManifest:
    if not isinstance(doc, dict):
        raise ManifestError(f"{source}: manifest must be a mapping")
    if "checkpoint" not in doc:
        raise ManifestError(f"{source}: missing 'checkpoint'")
    field_kind = str(doc.get("field_kind", "sdf")).lower()
    if field_kind not in FIELD_KINDS:
        raise ManifestError(f"{source}: field_kind must be one of {FIELD_KINDS}")
    sub_docs = doc.get("subnetworks")
    if not sub_docs:
        raise ManifestError(f"{source}: missing or empty 'subnetworks'")
    subs = []
    for i, sd in enumerate(sub_docs):
        where = f"{source}.subnetworks[{i}]"
        layer_docs = sd.get("layers")
        if not layer_docs:
            raise ManifestError(f"{where}: missing 'layers'")
        layers = tuple(_layer_from(d, f"{where}.layers[{k}]")
                       for k, d in enumerate(layer_docs))
        head = sd.get("head")
        if not isinstance(head, dict) or "weight" not in head or "bias" not in head:
            raise ManifestError(f"{where}: head needs 'weight' and 'bias' tensor names")
        subs.append(SubnetRef(layers, str(head["weight"]), str(head["bias"])))
    return ExportManifest(str(doc["checkpoint"]), field_kind, tuple(subs),
                          doc.get("output"))


def load_manifest(path) -> ExportManifest:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    return manifest_from_dict(doc, source=str(path))
