"""Checkpoint to interchange-format conversion.

Reads a torch checkpoint (a plain state dict, or a dict holding one under
'state_dict' plus optional 'activations' metadata), pulls the tensors the
manifest names, validates shapes and ReLU-only activations, and writes the
interchange JSON.  Weights are exported in float64; float32 sources are
upcast and flagged in the file's metadata block.
"""

from __future__ import annotations

import json

import numpy as np
import torch

from .manifest import (
    BlockRef,
    DenseRef,
    ExportManifest,
    ManifestError,
    LINEAR_NAMES,
    RELU_NAMES,
)


class ExportError(ValueError):
    pass


def load_checkpoint(path) -> tuple[dict, list]:
    doc = torch.load(path, map_location="cpu", weights_only=True)
    activations = []
    if isinstance(doc, dict) and "state_dict" in doc:
        activations = list(doc.get("activations", []))
        doc = doc["state_dict"]
    if not isinstance(doc, dict) or not doc:
        raise ExportError(f"{path}: expected a non-empty state dict")
    tensors = {}
    for name, value in doc.items():
        if not torch.is_tensor(value):
            raise ExportError(f"{path}: entry {name!r} is not a tensor")
        tensors[str(name)] = value.detach().cpu()
    return tensors, activations


def validate_relu_only(manifest: ExportManifest, checkpoint_activations: list) -> None:
    """Reject anything that is not ReLU between layers (linear heads aside)."""
    for i, act in enumerate(checkpoint_activations):
        name = str(act).lower()
        if name not in RELU_NAMES + LINEAR_NAMES:
            raise ExportError(
                f"checkpoint declares non-ReLU activation {act!r} at position {i}")

    def check(ref, where):
        if ref.activation not in RELU_NAMES:
            raise ExportError(f"{where}: activation {ref.activation!r} is not ReLU")

    for si, sub in enumerate(manifest.subnetworks):
        for li, layer in enumerate(sub.layers):
            where = f"subnetworks[{si}].layers[{li}]"
            if isinstance(layer, DenseRef):
                check(layer, where)
            else:
                check(layer, where)
                for ii, inner in enumerate(layer.inner[:-1]):
                    check(inner, f"{where}.inner[{ii}]")
                # the final inner dense feeds the additive merge pre-activation;
                # its own activation slot must be linear or relu-merge handled
                last = layer.inner[-1]
                if last.activation not in RELU_NAMES + LINEAR_NAMES:
                    raise ExportError(
                        f"{where}.inner[{len(layer.inner) - 1}]: "
                        f"activation {last.activation!r} is not ReLU")


def _tensor(tensors: dict, name: str, where: str) -> torch.Tensor:
    if name not in tensors:
        raise ExportError(f"{where}: checkpoint has no tensor named {name!r}")
    return tensors[name]


def _matrix(tensors, name, where, rows=None, cols=None) -> np.ndarray:
    t = _tensor(tensors, name, where)
    if t.dim() != 2:
        raise ExportError(f"{where}: {name!r} must be 2-d, got shape {tuple(t.shape)}")
    if rows is not None and t.shape[0] != rows:
        raise ExportError(f"{where}: {name!r} has {t.shape[0]} rows, expected {rows}")
    if cols is not None and t.shape[1] != cols:
        raise ExportError(f"{where}: {name!r} has {t.shape[1]} cols, expected {cols}")
    return t.to(torch.float64).numpy()


def _vector(tensors, name, where, length=None) -> np.ndarray:
    t = _tensor(tensors, name, where).reshape(-1)
    if length is not None and t.shape[0] != length:
        raise ExportError(f"{where}: {name!r} has length {t.shape[0]}, expected {length}")
    return t.to(torch.float64).numpy()


def build_interchange(manifest: ExportManifest, tensors: dict) -> dict:
    """Assemble the interchange document, checking every declared shape."""
    subs = []
    for si, sub in enumerate(manifest.subnetworks):
        width = 3
        layers_doc = []
        for li, layer in enumerate(sub.layers):
            where = f"subnetworks[{si}].layers[{li}]"
            if isinstance(layer, DenseRef):
                w = _matrix(tensors, layer.weight, where, cols=width)
                b = _vector(tensors, layer.bias, where, length=w.shape[0])
                layers_doc.append({"kind": "dense", "weight": w.tolist(),
                                   "bias": b.tolist()})
                width = w.shape[0]
            else:
                in_width = width
                inner_doc = []
                for ii, inner in enumerate(layer.inner):
                    iw = _matrix(tensors, inner.weight, f"{where}.inner[{ii}]", cols=width)
                    ib = _vector(tensors, inner.bias, f"{where}.inner[{ii}]",
                                 length=iw.shape[0])
                    inner_doc.append({"kind": "dense", "weight": iw.tolist(),
                                      "bias": ib.tolist()})
                    width = iw.shape[0]
                doc = {"kind": layer.kind, "inner": inner_doc}
                if layer.kind == "residual_identity":
                    if width != in_width:
                        raise ExportError(
                            f"{where}: identity shortcut needs matching widths "
                            f"({in_width} in, {width} out)")
                else:
                    sw = _matrix(tensors, layer.shortcut_weight, where,
                                 rows=width, cols=in_width)
                    doc["shortcut_weight"] = sw.tolist()
                    if layer.shortcut_bias is not None:
                        sb = _vector(tensors, layer.shortcut_bias, where, length=width)
                    else:
                        sb = np.zeros(width)
                    doc["shortcut_bias"] = sb.tolist()
                layers_doc.append(doc)
        hw = _tensor(tensors, sub.head_weight, f"subnetworks[{si}].head")
        hw = hw.reshape(-1).to(torch.float64).numpy()
        if hw.shape[0] != width:
            raise ExportError(f"subnetworks[{si}].head: weight length {hw.shape[0]} "
                              f"!= last layer width {width}")
        hb = _tensor(tensors, sub.head_bias, f"subnetworks[{si}].head")
        if hb.numel() != 1:
            raise ExportError(f"subnetworks[{si}].head: bias must be a scalar")
        subs.append({"layers": layers_doc,
                     "head": {"weight": hw.tolist(), "bias": float(hb.reshape(-1)[0])}})

    dtypes = sorted({str(t.dtype).removeprefix("torch.") for t in tensors.values()})
    return {
        "field_kind": manifest.field_kind,
        "input_dim": 3,
        "subnetworks": subs,
        "metadata": {
            "exporter": "fieldexport",
            "source_dtypes": dtypes,
            "upcast_from_float32": any(d != "float64" for d in dtypes),
        },
    }


def reference_forward(manifest: ExportManifest, tensors: dict, pts: np.ndarray) -> np.ndarray:
    """Float64 torch evaluation of the checkpoint per the manifest wiring.

    This is the exporter-side half of the dual evaluation: it never touches
    the primary implementation, only the checkpoint tensors.
    """
    x = torch.as_tensor(pts, dtype=torch.float64)
    outs = []
    for si, sub in enumerate(manifest.subnetworks):
        h = x
        for li, layer in enumerate(sub.layers):
            where = f"subnetworks[{si}].layers[{li}]"
            if isinstance(layer, DenseRef):
                w = _tensor(tensors, layer.weight, where).to(torch.float64)
                b = _tensor(tensors, layer.bias, where).to(torch.float64).reshape(-1)
                h = torch.relu(h @ w.T + b)
            else:
                h_in = h
                for inner in layer.inner[:-1]:
                    w = _tensor(tensors, inner.weight, where).to(torch.float64)
                    b = _tensor(tensors, inner.bias, where).to(torch.float64).reshape(-1)
                    h = torch.relu(h @ w.T + b)
                last = layer.inner[-1]
                w = _tensor(tensors, last.weight, where).to(torch.float64)
                b = _tensor(tensors, last.bias, where).to(torch.float64).reshape(-1)
                pre = h @ w.T + b
                if layer.shortcut_weight is None:
                    short = h_in
                else:
                    sw = _tensor(tensors, layer.shortcut_weight, where).to(torch.float64)
                    short = h_in @ sw.T
                    if layer.shortcut_bias is not None:
                        sb = _tensor(tensors, layer.shortcut_bias, where)
                        short = short + sb.to(torch.float64).reshape(-1)
                h = torch.relu(short + pre)
        hw = _tensor(tensors, sub.head_weight, "head").to(torch.float64).reshape(-1)
        hb = float(_tensor(tensors, sub.head_bias, "head").reshape(-1)[0])
        outs.append(h @ hw + hb)
    stacked = torch.stack(outs, dim=1)
    return stacked.max(dim=1).values.numpy()


def export(manifest: ExportManifest, out_path=None) -> str:
    """Run the conversion end to end; returns the output path."""
    tensors, activations = load_checkpoint(manifest.checkpoint)
    validate_relu_only(manifest, activations)
    doc = build_interchange(manifest, tensors)
    path = out_path or manifest.output
    if path is None:
        raise ExportError("no output path: pass --out or set 'output' in the manifest")
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return str(path)
