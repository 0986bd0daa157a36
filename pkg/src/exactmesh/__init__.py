"""exactmesh: exact zero-level-set meshing of ReLU implicit surface networks."""

from .network import (
    AffinePlane,
    AnyNetwork,
    DenseLayer,
    EnsembleSpec,
    NetworkFormatError,
    NetworkSpec,
    ResidualBlock,
    StateVector,
    affine_maps,
    check_unique_planes,
    cube_ensemble,
    forward,
    forward_many,
    grad_input,
    load_network,
    octahedron_net,
    region_count_lower_bound,
    save_network,
    state_at,
)

__all__ = [
    "AffinePlane",
    "AnyNetwork",
    "DenseLayer",
    "EnsembleSpec",
    "NetworkFormatError",
    "NetworkSpec",
    "ResidualBlock",
    "StateVector",
    "affine_maps",
    "check_unique_planes",
    "cube_ensemble",
    "forward",
    "forward_many",
    "grad_input",
    "load_network",
    "octahedron_net",
    "region_count_lower_bound",
    "save_network",
    "state_at",
]

__version__ = "0.1.0"
