import numpy as np
import pytest

from patchview.errors import MeshFormatError
from patchview.geometry import Intrinsics, SphericalPose, Viewpoint, \
    viewpoint_from_spherical
from patchview.raster import (Mesh, load_obj, patch_visibility, rasterize,
                              render_sketch, save_obj)
from patchview.toydata import make_box, make_sedan, box_patch_spec
from patchview.raster import patch_plane_samples

from oracles import make_icosphere, raycast_patch_fraction

SIZE = (128, 128)
K = Intrinsics.for_image(SIZE)


def _front_on_view(distance=120.0):
    return viewpoint_from_spherical(SphericalPose(0, 0, distance))


# ---------------------------------------------------------------------------
# OBJ loading


def test_obj_roundtrip(tmp_path, sedan):
    mesh, _ = sedan
    path = tmp_path / "sedan.obj"
    save_obj(mesh, path)
    loaded = load_obj(path)
    assert np.allclose(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.faces, mesh.faces)


def test_obj_parses_slash_indices(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n")
    mesh = load_obj(path)
    assert mesh.face_count == 1
    assert np.array_equal(mesh.faces[0], [0, 1, 2])


def test_obj_rejects_quads(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshFormatError, match="triangulate"):
        load_obj(path)


def test_obj_rejects_nonpositive_indices(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -1 -2 -3\n")
    with pytest.raises(MeshFormatError, match="1-based"):
        load_obj(path)


def test_mesh_drops_degenerate_faces():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    faces = np.array([[0, 1, 2], [0, 0, 1]])
    mesh = Mesh(verts, faces)
    assert mesh.face_count == 1


def test_mesh_rejects_out_of_range_indices():
    with pytest.raises(MeshFormatError, match="out of range"):
        Mesh(np.zeros((3, 3)), np.array([[0, 1, 7]]))


# ---------------------------------------------------------------------------
# rasterize


def test_frontal_cube_face_depth_is_analytic(box):
    mesh, _ = box  # half-size 1 cube
    view = _front_on_view(120.0)
    buffers = rasterize(mesh, view, K, SIZE)
    # the facing plane x=+1 sits at depth 119 from the camera at (120,0,0)
    face_px = buffers.depth[buffers.silhouette]
    assert face_px.size > 100
    assert np.abs(face_px - 119.0).max() < 1e-6


def test_frontal_face_normal_encodes_to_blue(box):
    mesh, _ = box
    buffers = rasterize(mesh, _front_on_view(), K, SIZE)
    sketch = render_sketch(buffers)
    fg = sketch.pixels[buffers.silhouette]
    assert np.all(fg == (128, 128, 255))


def test_normals_are_unit_length(sedan):
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(75, 33, 120))
    buffers = rasterize(mesh, view, K, SIZE)
    norms = np.linalg.norm(buffers.normals[buffers.silhouette], axis=1)
    assert np.abs(norms - 1.0).max() < 1e-6


def test_buffer_consistency_invariant(sedan):
    mesh, _ = sedan
    buffers = rasterize(mesh, viewpoint_from_spherical(SphericalPose(10, 20, 120)),
                        K, SIZE)
    finite = np.isfinite(buffers.depth)
    assert np.array_equal(buffers.silhouette, finite)
    assert np.array_equal(buffers.face_id >= 0, finite)


def test_icosphere_silhouette_matches_projected_disc_area():
    verts, faces = make_icosphere(radius=1.0, subdivisions=2)
    mesh = Mesh(verts, faces, name="icosphere")
    z = 100.0
    view = _front_on_view(z)
    buffers = rasterize(mesh, view, K, SIZE)
    expected = np.pi * (K.focal * 1.0 / z) ** 2
    actual = buffers.silhouette.sum()
    assert abs(actual - expected) / expected < 0.02


def test_mesh_behind_camera_warns_not_raises(box):
    mesh, _ = box
    view = Viewpoint(np.eye(3), np.array([0.0, 0.0, -50.0]))  # box behind camera
    buffers = rasterize(mesh, view, K, SIZE)
    assert buffers.empty
    assert buffers.warning is not None


def test_depth_is_min_over_face_subsets(sedan):
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(48, 18, 120))
    full = rasterize(mesh, view, K, SIZE).depth
    half = len(mesh.faces) // 2
    a = rasterize(Mesh(mesh.vertices, mesh.faces[:half]), view, K, SIZE).depth
    b = rasterize(Mesh(mesh.vertices, mesh.faces[half:]), view, K, SIZE).depth
    assert np.array_equal(np.minimum(a, b), full)


def test_rigid_transform_of_scene_and_camera_is_bit_identical(sedan):
    # exactly representable motion (90-degree permutation rotation): the
    # composed camera-frame coordinates are bitwise unchanged
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(30, 10, 120))
    base = rasterize(mesh, view, K, SIZE)
    rot = np.diag([1.0, -1.0, -1.0])  # 180 degrees about x: exact sign flips
    moved = mesh.transformed(rot)
    moved_view = Viewpoint(view.rotation @ rot.T, view.translation)
    other = rasterize(moved, moved_view, K, SIZE)
    assert np.array_equal(base.depth, other.depth)
    assert np.array_equal(base.face_id, other.face_id)
    assert np.array_equal(base.normals, other.normals)


def test_rigid_transform_of_scene_and_camera_general(sedan):
    # a generic rigid motion reproduces the buffers up to float re-association
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(30, 10, 120))
    base = rasterize(mesh, view, K, SIZE)
    rot = viewpoint_from_spherical(SphericalPose(77, -12, 1.0)).rotation
    t = np.array([0.4, -1.2, 2.0])
    moved = mesh.transformed(rot, t)
    moved_view = Viewpoint(view.rotation @ rot.T,
                           view.translation - view.rotation @ rot.T @ t)
    other = rasterize(moved, moved_view, K, SIZE)
    same = base.face_id == other.face_id
    assert same.mean() > 0.999  # only silhouette-edge pixels may flip
    both = base.silhouette & other.silhouette & same
    assert np.abs(base.depth[both] - other.depth[both]).max() < 1e-9
    assert np.abs(base.normals[both] - other.normals[both]).max() < 1e-9


def test_deterministic_buffers(sedan):
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(123, 45, 120))
    a = rasterize(mesh, view, K, SIZE)
    b = rasterize(mesh, view, K, SIZE)
    assert np.array_equal(a.depth, b.depth)
    assert np.array_equal(a.face_id, b.face_id)


# ---------------------------------------------------------------------------
# render_sketch


def test_empty_buffers_render_background(box):
    mesh, _ = box
    view = Viewpoint(np.eye(3), np.array([0.0, 0.0, -50.0]))
    sketch = render_sketch(rasterize(mesh, view, K, SIZE))
    assert np.all(sketch.pixels == 255)
    assert not sketch.silhouette.any()


def test_single_triangle_renders_connected_blue_region():
    verts = np.array([[-0.5, -0.5, 0], [0.5, -0.5, 0], [0, 0.6, 0]])
    mesh = Mesh(verts, np.array([[0, 1, 2]]))
    view = Viewpoint(np.eye(3), np.array([0.0, 0.0, 100.0]))
    sketch = render_sketch(rasterize(mesh, view, K, SIZE))
    fg = sketch.silhouette
    assert fg.any()
    assert np.all(sketch.pixels[fg] == (128, 128, 255))


def test_sketch_decode_recovers_normals(sedan):
    mesh, _ = sedan
    view = viewpoint_from_spherical(SphericalPose(52, 28, 120))
    buffers = rasterize(mesh, view, K, SIZE)
    sketch = render_sketch(buffers)
    decoded = sketch.pixels[buffers.silhouette].astype(np.float64) / 255.0 * 2.0 - 1.0
    stored = buffers.normals[buffers.silhouette]
    assert np.abs(decoded - stored).max() <= 1.0 / 255.0 + 1e-9


def test_sketch_silhouette_preserved_exactly(sedan):
    mesh, _ = sedan
    buffers = rasterize(mesh, viewpoint_from_spherical(SphericalPose(52, 28, 120)),
                        K, SIZE)
    sketch = render_sketch(buffers)
    background = np.all(sketch.pixels == 255, axis=2)
    assert np.array_equal(~background, buffers.silhouette)


# ---------------------------------------------------------------------------
# patch visibility


def test_head_on_vehicle_front_visible_back_hidden(sedan, car_spec):
    mesh, kps3d = sedan
    view = _front_on_view()
    buffers = rasterize(mesh, view, K, SIZE)
    vis = patch_visibility(mesh, kps3d, car_spec, buffers, view, K)
    assert vis["front"] > 0.5
    assert vis["back"] < 0.5


def test_side_view_mirror_occlusion(sedan, car_spec):
    mesh, kps3d = sedan
    view = viewpoint_from_spherical(SphericalPose(90, 0, 120))  # pure left view
    buffers = rasterize(mesh, view, K, SIZE)
    vis = patch_visibility(mesh, kps3d, car_spec, buffers, view, K)
    assert vis["left"] > 0.5
    assert vis["right"] < 0.5


def test_degenerate_patch_reports_zero(box, box_spec):
    mesh, kps3d = box
    collapsed = dict(kps3d)
    # crush the top face's corners onto one line
    collapsed["front_top_left"] = collapsed["front_top_right"]
    collapsed["back_top_left"] = collapsed["back_top_right"]
    view = _front_on_view()
    buffers = rasterize(mesh, view, K, SIZE)
    vis = patch_visibility(mesh, collapsed, box_spec, buffers, view, K)
    assert vis["top"] == 0.0


def test_mirror_pair_product_below_threshold_on_azimuth_ring(box, box_spec):
    mesh, kps3d = box
    tau = 0.5
    for az in range(0, 360, 30):
        view = viewpoint_from_spherical(SphericalPose(az, 0, 120))
        buffers = rasterize(mesh, view, K, SIZE)
        vis = patch_visibility(mesh, kps3d, box_spec, buffers, view, K)
        assert vis["left"] * vis["right"] < tau * tau


def test_visibility_monotone_under_occluder_removal(box, box_spec):
    mesh, kps3d = box
    # occluding wall in front of the box's front face
    wall = np.array([[2.5, -3, -3], [2.5, 3, -3], [2.5, 3, 3], [2.5, -3, 3]])
    verts = np.vstack([mesh.vertices, wall])
    base = len(mesh.vertices)
    wall_faces = np.array([[base, base + 1, base + 2], [base, base + 2, base + 3]])
    occluded_mesh = Mesh(verts, np.vstack([mesh.faces, wall_faces]))
    view = _front_on_view()
    vis_occluded = patch_visibility(
        occluded_mesh, kps3d, box_spec,
        rasterize(occluded_mesh, view, K, SIZE), view, K)
    vis_clear = patch_visibility(
        mesh, kps3d, box_spec, rasterize(mesh, view, K, SIZE), view, K)
    for name in box_spec.patches:
        assert vis_clear[name] >= vis_occluded[name] - 1e-12
    assert vis_occluded["front"] < 0.5 < vis_clear["front"]


def test_visibility_agrees_with_raycast_oracle(box, box_spec):
    mesh, kps3d = box
    rng = np.random.default_rng(17)
    samples = patch_plane_samples(kps3d, box_spec)
    agree = total = 0
    for _ in range(25):
        pose = SphericalPose(rng.uniform(0, 360), rng.uniform(-80, 80), 120)
        view = viewpoint_from_spherical(pose)
        buffers = rasterize(mesh, view, K, SIZE)
        vis = patch_visibility(mesh, kps3d, box_spec, buffers, view, K,
                               plane_samples=samples)
        for name in box_spec.patches:
            oracle = raycast_patch_fraction(mesh, samples[name][0], view) >= 0.5
            agree += (vis[name] >= 0.5) == oracle
            total += 1
    assert agree / total >= 0.95
