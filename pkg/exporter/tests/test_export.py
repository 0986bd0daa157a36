import json

import numpy as np
import pytest
import torch
import yaml

from fieldexport.cli import main
from fieldexport.export import (
    ExportError,
    build_interchange,
    export,
    load_checkpoint,
    reference_forward,
)
from fieldexport.manifest import ManifestError, load_manifest, manifest_from_dict

from exactmesh.network import forward_many, load_network


def _dense_state(rng, dims, prefix):
    state = {}
    refs = []
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        state[f"{prefix}.{i}.weight"] = torch.tensor(
            rng.normal(scale=0.7, size=(n_out, n_in)))
        state[f"{prefix}.{i}.bias"] = torch.tensor(rng.normal(scale=0.2, size=n_out))
        refs.append({"kind": "dense", "weight": f"{prefix}.{i}.weight",
                     "bias": f"{prefix}.{i}.bias"})
    return state, refs


def make_plain(rng, dims=(3, 10, 8), field_kind="sdf"):
    state, refs = _dense_state(rng, dims, "net")
    state["head.weight"] = torch.tensor(rng.normal(size=(1, dims[-1])))
    state["head.bias"] = torch.tensor(rng.normal(size=1))
    manifest = {
        "checkpoint": None, "field_kind": field_kind,
        "subnetworks": [{"layers": refs,
                         "head": {"weight": "head.weight", "bias": "head.bias"}}],
    }
    return state, manifest


def make_residual_identity(rng):
    state, refs = _dense_state(rng, (3, 6), "stem")
    blk, blk_refs = _dense_state(rng, (6, 5, 6), "blk")
    state.update(blk)
    refs.append({"kind": "residual_identity", "inner": blk_refs})
    state["head.weight"] = torch.tensor(rng.normal(size=(1, 6)))
    state["head.bias"] = torch.tensor(rng.normal(size=1))
    manifest = {
        "checkpoint": None, "field_kind": "sdf",
        "subnetworks": [{"layers": refs,
                         "head": {"weight": "head.weight", "bias": "head.bias"}}],
    }
    return state, manifest


def make_residual_linear(rng):
    state, refs = _dense_state(rng, (3, 5), "stem")
    blk, blk_refs = _dense_state(rng, (5, 4, 7), "blk")
    state.update(blk)
    state["short.weight"] = torch.tensor(rng.normal(size=(7, 5)))
    state["short.bias"] = torch.tensor(rng.normal(size=7))
    refs.append({"kind": "residual_linear", "inner": blk_refs,
                 "shortcut_weight": "short.weight", "shortcut_bias": "short.bias"})
    state["head.weight"] = torch.tensor(rng.normal(size=(1, 7)))
    state["head.bias"] = torch.tensor(rng.normal(size=1))
    manifest = {
        "checkpoint": None, "field_kind": "sdf",
        "subnetworks": [{"layers": refs,
                         "head": {"weight": "head.weight", "bias": "head.bias"}}],
    }
    return state, manifest


def make_ensemble(rng):
    state = {}
    subs = []
    for j, dims in enumerate([(3, 6, 5), (3, 8)]):
        sub_state, refs = _dense_state(rng, dims, f"sub{j}")
        state.update(sub_state)
        state[f"sub{j}.head.weight"] = torch.tensor(rng.normal(size=(1, dims[-1])))
        state[f"sub{j}.head.bias"] = torch.tensor(rng.normal(size=1))
        subs.append({"layers": refs, "head": {"weight": f"sub{j}.head.weight",
                                              "bias": f"sub{j}.head.bias"}})
    manifest = {"checkpoint": None, "field_kind": "sdf", "subnetworks": subs}
    return state, manifest


CHECKPOINT_BUILDERS = {
    "plain": lambda rng: make_plain(rng),
    "residual_identity": make_residual_identity,
    "residual_linear": make_residual_linear,
    "ensemble": make_ensemble,
    "occupancy": lambda rng: make_plain(rng, dims=(3, 12, 6), field_kind="occupancy"),
}


def _write(tmp_path, name, state, manifest_doc):
    ckpt = tmp_path / f"{name}.pt"
    torch.save(state, ckpt)
    manifest_doc = dict(manifest_doc)
    manifest_doc["checkpoint"] = str(ckpt)
    mpath = tmp_path / f"{name}.yaml"
    mpath.write_text(yaml.safe_dump(manifest_doc))
    return mpath


# ---------------------------------------------------------------------------
# acceptance: dual evaluation on the five checkpoint kinds


@pytest.mark.parametrize("name", sorted(CHECKPOINT_BUILDERS))
def test_dual_evaluation_roundtrip(name, tmp_path):
    rng = np.random.default_rng(hash(name) % 2**32)
    state, manifest_doc = CHECKPOINT_BUILDERS[name](rng)
    mpath = _write(tmp_path, name, state, manifest_doc)
    manifest = load_manifest(mpath)
    out = tmp_path / f"{name}.json"
    export(manifest, out_path=out)

    net = load_network(out)
    pts = np.random.default_rng(99).uniform(-1.2, 1.2, size=(1000, 3))
    primary = forward_many(net, pts)
    tensors, _ = load_checkpoint(manifest.checkpoint)
    reference = reference_forward(manifest, tensors, pts)
    rel = np.abs(primary - reference) / np.maximum(np.abs(reference), 1e-12)
    assert rel.max() <= 1e-10
    doc = json.loads(out.read_text())
    assert doc["field_kind"] == manifest.field_kind


# ---------------------------------------------------------------------------
# validation


def test_octahedron_style_checkpoint(tmp_path):
    rows = torch.tensor([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0],
                         [0, -1.0, 0], [0, 0, 1.0], [0, 0, -1.0]], dtype=torch.float64)
    state = {"net.0.weight": rows, "net.0.bias": torch.zeros(6, dtype=torch.float64),
             "head.weight": torch.ones(1, 6, dtype=torch.float64),
             "head.bias": torch.tensor([-0.5], dtype=torch.float64)}
    manifest_doc = {
        "checkpoint": None, "field_kind": "sdf",
        "subnetworks": [{"layers": [{"kind": "dense", "weight": "net.0.weight",
                                     "bias": "net.0.bias"}],
                         "head": {"weight": "head.weight", "bias": "head.bias"}}],
    }
    mpath = _write(tmp_path, "octa", state, manifest_doc)
    out = tmp_path / "octa.json"
    export(load_manifest(mpath), out_path=out)
    net = load_network(out)
    assert forward_many(net, np.zeros((1, 3)))[0] == -0.5


def test_non_relu_manifest_rejected(tmp_path):
    rng = np.random.default_rng(0)
    state, manifest_doc = make_plain(rng)
    manifest_doc["subnetworks"][0]["layers"][0]["activation"] = "tanh"
    mpath = _write(tmp_path, "tanh", state, manifest_doc)
    with pytest.raises(ExportError, match="tanh"):
        export(load_manifest(mpath), out_path=tmp_path / "x.json")


def test_non_relu_checkpoint_metadata_rejected(tmp_path):
    rng = np.random.default_rng(1)
    state, manifest_doc = make_plain(rng)
    wrapped = {"state_dict": state, "activations": ["relu", "tanh"]}
    ckpt = tmp_path / "wrapped.pt"
    torch.save(wrapped, ckpt)
    manifest_doc = dict(manifest_doc)
    manifest_doc["checkpoint"] = str(ckpt)
    mpath = tmp_path / "wrapped.yaml"
    mpath.write_text(yaml.safe_dump(manifest_doc))
    with pytest.raises(ExportError, match="tanh"):
        export(load_manifest(mpath), out_path=tmp_path / "x.json")


def test_shape_mismatch_rejected(tmp_path):
    rng = np.random.default_rng(2)
    state, manifest_doc = make_plain(rng)
    state["head.weight"] = torch.tensor(rng.normal(size=(1, 5)))  # wrong width
    mpath = _write(tmp_path, "bad", state, manifest_doc)
    with pytest.raises(ExportError, match="head"):
        export(load_manifest(mpath), out_path=tmp_path / "x.json")


def test_missing_tensor_named(tmp_path):
    rng = np.random.default_rng(3)
    state, manifest_doc = make_plain(rng)
    del state["net.0.bias"]
    mpath = _write(tmp_path, "missing", state, manifest_doc)
    with pytest.raises(ExportError, match="net.0.bias"):
        export(load_manifest(mpath), out_path=tmp_path / "x.json")


def test_float32_upcast_flagged(tmp_path):
    rng = np.random.default_rng(4)
    state, manifest_doc = make_plain(rng)
    state = {k: v.to(torch.float32) for k, v in state.items()}
    mpath = _write(tmp_path, "f32", state, manifest_doc)
    out = tmp_path / "f32.json"
    export(load_manifest(mpath), out_path=out)
    doc = json.loads(out.read_text())
    assert doc["metadata"]["upcast_from_float32"] is True
    load_network(out)  # primary still parses files carrying metadata


def test_float64_lossless_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    state, manifest_doc = make_plain(rng)
    mpath = _write(tmp_path, "f64", state, manifest_doc)
    out = tmp_path / "f64.json"
    export(load_manifest(mpath), out_path=out)
    doc = json.loads(out.read_text())
    got = np.asarray(doc["subnetworks"][0]["layers"][0]["weight"])
    want = state["net.0.weight"].numpy()
    assert np.array_equal(got, want)


def test_manifest_errors():
    with pytest.raises(ManifestError, match="checkpoint"):
        manifest_from_dict({"subnetworks": []})
    with pytest.raises(ManifestError, match="field_kind"):
        manifest_from_dict({"checkpoint": "x.pt", "field_kind": "density",
                            "subnetworks": [{}]})
    with pytest.raises(ManifestError, match="shortcut_weight"):
        manifest_from_dict({
            "checkpoint": "x.pt",
            "subnetworks": [{"layers": [{"kind": "residual_linear",
                                         "inner": [{"weight": "a", "bias": "b"}]}],
                             "head": {"weight": "w", "bias": "b"}}]})


# ---------------------------------------------------------------------------
# CLI


def test_cli_roundtrip(tmp_path, capsys):
    rng = np.random.default_rng(6)
    state, manifest_doc = make_plain(rng)
    mpath = _write(tmp_path, "cli", state, manifest_doc)
    out = tmp_path / "cli.json"
    assert main(["export", "--manifest", str(mpath), "--out", str(out)]) == 0
    assert out.exists()
    assert main(["--manifest", str(mpath), "--out", str(out)]) == 0


def test_cli_reports_errors(tmp_path, capsys):
    assert main(["--manifest", str(tmp_path / "nope.yaml")]) in (1, 2)
