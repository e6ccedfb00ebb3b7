"""Procedurally generated fixtures: low-poly vehicles, a box proxy, toy datasets.

The toy vehicles are convex prisms whose six default patches (left, right,
roof, front, back, windshield) coincide exactly with mesh planes, and whose
twelve keypoints sit on mesh vertices. Azimuth 0 looks at the vehicle nose
(+x axis), counterclockwise, z up.

Toy images are rendered with a texture keyed to 3D surface position, so the
same physical point keeps its color across viewpoints; the texture is
asymmetric (arrow on the left flank, dots on the right) which makes mirror
transfers and pixel provenance observable. Texture edges are smoothed over
~4 px so warping losses stay interpolation-bounded.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import Intrinsics, SphericalPose, project_points, viewpoint_from_spherical
from .raster import Mesh, rasterize, save_obj
from .warp import PatchSpec, default_patch_spec

__all__ = [
    "make_sedan",
    "make_van",
    "make_box",
    "box_patch_spec",
    "render_toy_image",
    "make_toy_dataset",
    "TOY_RADIUS",
]

TOY_RADIUS = 120.0


def _prism(profile, half_width: float, name: str) -> Mesh:
    """Extrude a convex (x, z) polygon along y into a closed triangle mesh."""
    n = len(profile)
    left = [(x, half_width, z) for x, z in profile]
    right = [(x, -half_width, z) for x, z in profile]
    verts = np.array(left + right, dtype=np.float64)
    faces = []
    for i in range(1, n - 1):
        faces.append((0, i, i + 1))
        faces.append((n, n + i, n + i + 1))
    for i in range(n):
        j = (i + 1) % n
        faces.append((i, j, n + j))
        faces.append((i, n + j, n + i))
    return Mesh(verts, np.array(faces, dtype=np.int32), name=name)


def _vehicle_keypoints(profile_points, half_width: float) -> dict[str, np.ndarray]:
    """Map the six profile anchors to the twelve left/right keypoint names."""
    (wheel_f, light_f, windshield_u, rearwindow_u, trunk_b, wheel_b) = profile_points
    anchors = {
        "front_wheel": wheel_f,
        "front_light": light_f,
        "windshield": windshield_u,
        "rearwindow": rearwindow_u,
        "back_trunk": trunk_b,
        "back_wheel": wheel_b,
    }
    kps = {}
    for side, y in (("left", half_width), ("right", -half_width)):
        for anchor, (x, z) in anchors.items():
            if anchor in ("windshield", "rearwindow"):
                name = f"upper_{side}_{anchor}"
            elif anchor.startswith("front") or anchor.startswith("back"):
                a, b = anchor.split("_")
                name = f"{side}_{a}_{b}"
            kps[name] = np.array([x, y, z], dtype=np.float64)
    return kps


def make_sedan() -> tuple[Mesh, dict[str, np.ndarray]]:
    """Fastback sedan: length 4, width 1.8, height 1.4, centered at the origin."""
    a = (1.3, -0.7)   # front wheel
    b = (2.0, 0.1)    # front light
    d = (0.3, 0.7)    # upper windshield
    e = (-1.0, 0.7)   # upper rear window
    f = (-2.0, 0.1)   # back trunk
    g = (-1.3, -0.7)  # back wheel
    mesh = _prism([a, b, d, e, f, g], 0.9, "sedan")
    return mesh, _vehicle_keypoints([a, b, d, e, f, g], 0.9)


def make_van() -> tuple[Mesh, dict[str, np.ndarray]]:
    """Boxier van on the same keypoint catalog."""
    a = (1.7, -0.75)
    b = (2.0, 0.2)
    d = (1.2, 0.9)
    e = (-1.6, 0.9)
    f = (-2.0, 0.2)
    g = (-1.7, -0.75)
    mesh = _prism([a, b, d, e, f, g], 1.0, "van")
    return mesh, _vehicle_keypoints([a, b, d, e, f, g], 1.0)


_BOX_CORNERS = {
    "front_top_left": (1, 1, 1),
    "front_top_right": (1, -1, 1),
    "front_bottom_left": (1, 1, -1),
    "front_bottom_right": (1, -1, -1),
    "back_top_left": (-1, 1, 1),
    "back_top_right": (-1, -1, 1),
    "back_bottom_left": (-1, 1, -1),
    "back_bottom_right": (-1, -1, -1),
}


def make_box(half_size: float = 1.0) -> tuple[Mesh, dict[str, np.ndarray]]:
    """Axis-aligned cube proxy with corner keypoints."""
    names = list(_BOX_CORNERS)
    verts = np.array([_BOX_CORNERS[n] for n in names], dtype=np.float64) * half_size
    idx = {n: i for i, n in enumerate(names)}
    quads = [
        ("front_top_left", "front_top_right", "front_bottom_right", "front_bottom_left"),
        ("back_top_right", "back_top_left", "back_bottom_left", "back_bottom_right"),
        ("front_top_left", "front_bottom_left", "back_bottom_left", "back_top_left"),
        ("front_top_right", "back_top_right", "back_bottom_right", "front_bottom_right"),
        ("front_top_left", "back_top_left", "back_top_right", "front_top_right"),
        ("front_bottom_left", "front_bottom_right", "back_bottom_right", "back_bottom_left"),
    ]
    faces = []
    for qa, qb, qc, qd in quads:
        faces.append((idx[qa], idx[qb], idx[qc]))
        faces.append((idx[qa], idx[qc], idx[qd]))
    mesh = Mesh(verts, np.array(faces, dtype=np.int32), name="box")
    kps = {n: verts[i].copy() for n, i in idx.items()}
    return mesh, kps


def box_patch_spec() -> PatchSpec:
    patches = {
        "front": ["front_top_left", "front_top_right", "front_bottom_right", "front_bottom_left"],
        "back": ["back_top_left", "back_top_right", "back_bottom_right", "back_bottom_left"],
        "left": ["front_top_left", "front_bottom_left", "back_bottom_left", "back_top_left"],
        "right": ["front_top_right", "front_bottom_right", "back_bottom_right", "back_top_right"],
        "top": ["front_top_left", "front_top_right", "back_top_right", "back_top_left"],
        "bottom": ["front_bottom_left", "front_bottom_right", "back_bottom_right", "back_bottom_left"],
    }
    mirror = {"left": "right", "right": "left", "front": "front",
              "back": "back", "top": "top", "bottom": "bottom"}
    kp_mirror = {}
    for name in _BOX_CORNERS:
        kp_mirror[name] = name.replace("left", "right") if "left" in name \
            else name.replace("right", "left")
    return PatchSpec("box", patches, mirror, kp_mirror)


# ---------------------------------------------------------------------------
# Procedural texturing


def _smooth_band(value, center, half_width, edge=0.15):
    """1 inside |value-center| < half_width, smoothstep rolloff over ``edge``."""
    d = np.abs(value - center) - half_width
    t = np.clip(1.0 - d / edge, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t) * (d < edge)


def _paint_vehicle(points: np.ndarray, normals: np.ndarray, kind: str) -> np.ndarray:
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    if kind == "van":
        nose, tail = np.array([70.0, 120.0, 200.0]), np.array([190.0, 210.0, 80.0])
    else:
        nose, tail = np.array([210.0, 80.0, 60.0]), np.array([60.0, 90.0, 200.0])
    t = np.clip((x + 2.0) / 4.0, 0.0, 1.0)[:, None]
    base = nose * t + tail * (1.0 - t)
    # subtle smooth stripes along z keep the surface textured everywhere
    base = base * (0.85 + 0.15 * np.cos(2.0 * np.pi * z / 1.4))[:, None]

    side = y.max() if len(y) else 1.0
    dark = np.array([30.0, 30.0, 35.0])
    # left flank: forward-pointing arrow (shaft plus head)
    on_left = y > 0.8 * max(side, 0.5)
    shaft = _smooth_band(z, -0.1, 0.14) * _smooth_band(x, -0.25, 0.45)
    head_half = np.clip((0.8 - x) * 0.9, 0.0, None)
    head = _smooth_band(z, -0.1, head_half) * _smooth_band(x, 0.5, 0.3)
    arrow = np.clip(shaft + head, 0.0, 1.0) * on_left
    # right flank: two dots
    on_right = y < -0.8 * max(side, 0.5)
    dots = np.zeros_like(x)
    for cx in (-0.7, 0.7):
        r = np.sqrt((x - cx) ** 2 + (z + 0.1) ** 2)
        dots = np.maximum(dots, _smooth_band(r, 0.0, 0.3))
    dots = dots * on_right
    glyph = np.clip(arrow + dots, 0.0, 1.0)[:, None]
    color = base * (1.0 - glyph) + dark * glyph

    light = np.array([0.45, 0.25, 0.86])
    light = light / np.linalg.norm(light)
    lambert = 0.62 + 0.38 * np.clip(normals @ light, 0.0, None)
    return np.clip(color * lambert[:, None], 0.0, 250.0)


def render_toy_image(mesh: Mesh, view, k: Intrinsics, size,
                     kind: str = "sedan",
                     background=(255, 255, 255)) -> np.ndarray:
    """Render an RGB toy photo via the rasterizer and the procedural paint."""
    if isinstance(view, SphericalPose):
        view = viewpoint_from_spherical(view)
    buffers = rasterize(mesh, view, k, size)
    h, w = size
    image = np.empty((h, w, 3), dtype=np.uint8)
    image[:] = np.asarray(background, dtype=np.uint8)
    fg = buffers.silhouette
    if not fg.any():
        return image
    ys, xs = np.nonzero(fg)
    depth = buffers.depth[fg]
    cx, cy = k.principal_point
    dirs = np.stack([(xs + 0.5 - cx) / k.focal,
                     (ys + 0.5 - cy) / k.focal,
                     np.ones_like(depth)], axis=1)
    p_cam = dirs * depth[:, None]
    r, t = view.rotation, view.translation
    p_world = (p_cam - t) @ r
    stored = buffers.normals[fg]
    n_cam = np.stack([stored[:, 0], -stored[:, 1], -stored[:, 2]], axis=1)
    n_world = n_cam @ r
    colors = _paint_vehicle(p_world, n_world, kind)
    image[fg] = np.clip(np.rint(colors), 0, 255).astype(np.uint8)
    return image


# ---------------------------------------------------------------------------
# Toy dataset writer


def _toy_poses(n: int) -> list[SphericalPose]:
    elevations = [8.0, 20.0, 12.0, 30.0, 6.0, 15.0]
    poses = []
    for i in range(n):
        az = (25.0 + i * 137.0) % 360.0
        el = elevations[i % len(elevations)]
        poses.append(SphericalPose(az, el, TOY_RADIUS))
    return poses


def make_toy_dataset(root, n_samples: int = 6, size=(128, 128), classes=("sedan", "van")) -> Path:
    """Write a self-contained toy vehicle dataset (meshes, images, manifest).

    Returns the dataset root. Keypoint annotations are exact projections of
    the CAD keypoints, so a sample's own viewpoint reproduces its keypoints
    bit-for-bit.
    """
    root = Path(root)
    (root / "meshes").mkdir(parents=True, exist_ok=True)
    (root / "images").mkdir(parents=True, exist_ok=True)
    makers = {"sedan": make_sedan, "van": make_van}
    cads = []
    cad_assets = []
    for cad_id, kind in enumerate(classes):
        mesh, kps3d = makers[kind]()
        mesh_path = root / "meshes" / f"{kind}.obj"
        save_obj(mesh, mesh_path)
        cads.append({"id": cad_id, "mesh": f"meshes/{kind}.obj",
                     "keypoints3d": {k: [float(c) for c in v] for k, v in kps3d.items()}})
        cad_assets.append((mesh, kps3d, kind))

    k = Intrinsics.for_image(size)
    samples = []
    for i, pose in enumerate(_toy_poses(n_samples)):
        cad_id = i % len(cad_assets)
        mesh, kps3d, kind = cad_assets[cad_id]
        view = viewpoint_from_spherical(pose)
        image = render_toy_image(mesh, view, k, size, kind=kind)
        kps2d = project_points(kps3d, view, k, image_size=size)
        sid = f"s{i:03d}"
        from .dataset import save_image  # local import avoids a cycle
        save_image(image, root / "images" / f"{sid}.png")
        samples.append({
            "id": sid,
            "image": f"images/{sid}.png",
            "keypoints2d": {k2: [float(v[0]), float(v[1])] for k2, v in kps2d.items()},
            "view": {"azimuth_deg": pose.azimuth_deg,
                     "elevation_deg": pose.elevation_deg,
                     "radius": pose.radius},
            "cad_id": cad_id,
        })

    manifest = {"class": "car", "cads": cads, "samples": samples}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                        encoding="utf-8")
    return root


def toy_patch_spec() -> PatchSpec:
    return default_patch_spec("car")
