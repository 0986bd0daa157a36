import numpy as np
import pytest

from exactmesh.baseline import (
    chamfer,
    evaluate_grid_points,
    fscore,
    iou,
    marching_cubes,
    mesh_occupancy_grid,
    occupancy_grid,
    sample_surface,
)
from exactmesh.marching import MarchConfig, march
from exactmesh.meshes import PolygonMesh, TriangleMesh, topology_check, triangulate
from exactmesh.network import NetworkSpec, forward_many, octahedron_net
from exactmesh.shapes import Box, L1Ball, Sphere, Torus, make_shape

BBOX = ((-1.2, -1.2, -1.2), (1.2, 1.2, 1.2))


# ---------------------------------------------------------------------------
# shapes


def test_shape_sdf_zero_on_surface():
    rng = np.random.default_rng(0)
    for shape in (Sphere(0.5), Box((0.4, 0.3, 0.5)), Torus(0.35, 0.15), L1Ball(0.5)):
        pts = shape.sample_surface(2000, rng)
        assert np.abs(shape.sdf(pts)).max() <= 1e-12


def test_shape_sdf_is_1_lipschitz():
    rng = np.random.default_rng(1)
    for shape in (Sphere(0.5), Box((0.4, 0.3, 0.5)), Torus(0.35, 0.15), L1Ball(0.5)):
        a = rng.uniform(-1, 1, size=(3000, 3))
        b = a + rng.normal(scale=0.05, size=a.shape)
        lhs = np.abs(shape.sdf(a) - shape.sdf(b))
        rhs = np.linalg.norm(a - b, axis=1)
        assert (lhs <= rhs + 1e-12).all()


def test_l1ball_sdf_matches_octahedron_net_sign():
    shape = L1Ball(0.5)
    net = octahedron_net(0.5)
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(2000, 3))
    np.testing.assert_array_equal(np.sign(shape.sdf(pts)),
                                  np.sign(forward_many(net, pts)))


def test_make_shape_parser():
    assert make_shape("sphere:0.4").radius == 0.4
    assert make_shape("box:0.1,0.2,0.3").half_extents == (0.1, 0.2, 0.3)
    assert make_shape("torus:0.3,0.1").minor == 0.1
    with pytest.raises(ValueError):
        make_shape("dodecahedron")


# ---------------------------------------------------------------------------
# marching cubes


def test_mc_octahedron_watertight_but_inexact():
    net = octahedron_net(0.5)
    tri = marching_cubes(net, 64, BBOX)
    assert tri.n_faces > 0
    assert topology_check(tri)["watertight"]
    # A symmetric box lands the field's folds exactly midway between samples,
    # which lets interpolation reproduce this axis-aligned field; an offset box
    # exposes the generic discretization residual.
    off = marching_cubes(net, 64, ((-1.2, -1.2, -1.2), (1.3, 1.25, 1.21)))
    residuals = np.abs(forward_many(net, off.vertices))
    assert residuals.max() > 1e-4


def test_mc_empty_field():
    net = octahedron_net(0.5)
    shifted = NetworkSpec(net.layers, net.head_weight, 10.0)
    tri = marching_cubes(shifted, 32, BBOX)
    assert tri.n_faces == 0


def test_mc_vertices_near_zero_set():
    # every MC vertex lies on a grid edge whose endpoints straddle zero, so it
    # is within one cell of the true surface: |F(v)| <= max-slope * step
    net = octahedron_net(0.5)
    res = 48
    tri = marching_cubes(net, res, BBOX)
    step = 2.4 / (res - 1)
    max_slope = np.sqrt(3.0)
    residuals = np.abs(forward_many(net, tri.vertices))
    assert residuals.max() <= 2.0 * max_slope * step


def test_mc_masked_matches_full_grid():
    net = octahedron_net(0.5)
    full = marching_cubes(net, 120, BBOX, exact_grid=True)
    masked = marching_cubes(net, 120, BBOX, exact_grid=False)
    va = {tuple(np.round(v, 5)) for v in full.vertices}
    vb = {tuple(np.round(v, 5)) for v in masked.vertices}
    assert va == vb
    assert full.n_faces == masked.n_faces


def test_mc_sphere_chamfer_improves_with_resolution():
    shape = Sphere(0.5)
    net = octahedron_net(0.5)  # stand-in field with known surface
    cds = [chamfer(marching_cubes(net, res, BBOX), L1Ball(0.5), n_samples=20000)
           for res in (24, 48, 96)]
    assert cds[2] < cds[0]


def test_evaluate_grid_points_matches_forward():
    net = octahedron_net(0.5)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(5000, 3))
    f32 = evaluate_grid_points(net, pts)
    f64 = forward_many(net, pts)
    assert np.abs(f32 - f64).max() < 1e-5


# ---------------------------------------------------------------------------
# chamfer / fscore


def square_mesh(z, side=1.0):
    s = side / 2
    verts = np.array([[-s, -s, z], [s, -s, z], [s, s, z], [-s, s, z]])
    return TriangleMesh(verts, np.array([[0, 1, 2], [0, 2, 3]]))


def test_chamfer_identical_zero():
    mesh = square_mesh(0.0)
    assert chamfer(mesh, mesh, n_samples=5000, rng_seed=0) == 0.0


def test_chamfer_parallel_squares():
    d = 0.25
    cd = chamfer(square_mesh(0.0), square_mesh(d), n_samples=100_000, rng_seed=0)
    assert abs(cd - d * 1e3) <= 0.02 * d * 1e3


def test_chamfer_symmetric_and_deterministic():
    a, b = square_mesh(0.0), square_mesh(0.3)
    ab = chamfer(a, b, n_samples=20000, rng_seed=5)
    ba = chamfer(b, a, n_samples=20000, rng_seed=5)
    assert ab == ba
    assert chamfer(a, b, n_samples=20000, rng_seed=5) == ab


def test_fscore_identical_and_disjoint():
    mesh = square_mesh(0.0)
    assert fscore(mesh, mesh, n_samples=5000) == 1.0
    assert fscore(square_mesh(0.0), square_mesh(5.0), n_samples=5000) == 0.0


def test_fscore_symmetric():
    a, b = square_mesh(0.0), square_mesh(0.004)
    assert fscore(a, b, n_samples=20000, rng_seed=2) == fscore(b, a, n_samples=20000, rng_seed=2)


# ---------------------------------------------------------------------------
# IoU


def test_iou_identical_shape():
    assert iou(Sphere(0.5), Sphere(0.5), resolution=48, bbox=BBOX) == 1.0


def test_iou_nested_spheres_volume_ratio():
    got = iou(Sphere(0.25), Sphere(0.5), resolution=96, bbox=BBOX)
    assert abs(got - 0.125) < 0.01


def test_iou_mesh_vs_source_net():
    net = octahedron_net(0.5)
    mesh = march(net, MarchConfig(seeds=8, rng_seed=3)).welded_mesh()
    got = iou(mesh, net, resolution=64, bbox=BBOX)
    assert got >= 0.99


def test_mesh_occupancy_grid_matches_field_sign():
    # the parity raycaster must classify exactly like the source field's sign
    net = octahedron_net(0.5)
    mesh = march(net, MarchConfig(seeds=8, rng_seed=3)).welded_mesh()
    res = 64
    occ_mesh = mesh_occupancy_grid(mesh, res, BBOX)
    occ_net = occupancy_grid(net, res, BBOX)
    assert np.logical_xor(occ_mesh, occ_net).sum() == 0
    cell = (2.4 / res) ** 3
    expect = 4.0 / 3.0 * 0.5 ** 3  # l1 ball volume = 4/3 c^3
    assert abs(occ_mesh.sum() * cell - expect) < 0.1 * expect
