import numpy as np
import pytest

from exactmesh.network import DenseLayer, NetworkSpec, forward_many


def make_random_net(depth, width, seed, field_kind="sdf", center_surface=True):
    """Random He-initialized ReLU MLP; head bias shifted so the zero set crosses the box."""
    rng = np.random.default_rng(seed)
    widths = [3] + [width] * depth
    layers = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        w = rng.normal(scale=np.sqrt(2.0 / n_in), size=(n_out, n_in))
        b = rng.normal(scale=0.1, size=n_out)
        layers.append(DenseLayer(w, b))
    head_w = rng.normal(scale=np.sqrt(1.0 / width), size=width)
    net = NetworkSpec(tuple(layers), head_w, 0.0, field_kind=field_kind)
    if center_surface:
        probe = rng.uniform(-1.0, 1.0, size=(256, 3))
        med = float(np.median(forward_many(net, probe)))
        net = NetworkSpec(net.layers, net.head_weight, -med, field_kind=field_kind)
    return net


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
