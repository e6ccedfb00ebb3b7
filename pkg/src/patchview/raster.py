"""Software triangle rasterizer: depth, face-normal, and silhouette buffers.

Depth is perspective-correct (1/z interpolated in screen space), depth ties
are broken by lowest face index, and faces with any vertex at or behind the
camera are skipped. Normals are stored per pixel in the normal-map frame
(x right, y up, z toward the viewer) so that a camera-facing surface encodes
to (128, 128, 255) under the (n+1)/2 byte encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import MeshFormatError
from .geometry import Intrinsics, Viewpoint
from .warp import convex_hull, points_in_polygon, polygon_area

__all__ = [
    "Mesh",
    "RenderBuffers",
    "SketchImage",
    "load_obj",
    "save_obj",
    "rasterize",
    "render_sketch",
    "patch_visibility",
    "patch_plane_samples",
    "SKETCH_BACKGROUND",
]

SKETCH_BACKGROUND = (255, 255, 255)

_NEAR = 1e-9
_MIN_FACE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh: (N, 3) float vertices, (M, 3) int vertex-index faces."""

    vertices: np.ndarray
    faces: np.ndarray
    name: str = "mesh"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshFormatError(
                f"face index out of range (mesh '{self.name}', {len(v)} vertices)")
        # drop zero-area faces up front so buffers never see them
        if len(f):
            a = v[f[:, 1]] - v[f[:, 0]]
            b = v[f[:, 2]] - v[f[:, 0]]
            area2 = np.linalg.norm(np.cross(a, b), axis=1)
            f = f[area2 > _MIN_FACE_AREA]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)) -> "Mesh":
        r = np.asarray(rotation, dtype=np.float64)
        t = np.asarray(translation, dtype=np.float64)
        return Mesh(self.vertices @ r.T + t, self.faces, name=self.name)


def load_obj(path) -> Mesh:
    """Load the OBJ subset: ``v`` lines and triangular ``f`` lines.

    Indices are 1-based; texture/normal indices after ``/`` are ignored.
    Quads and higher-order faces are rejected.
    """
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"{path}:{lineno}: malformed vertex line")
                vertices.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = parts[1:]
                if len(idx) != 3:
                    raise MeshFormatError(
                        f"{path}:{lineno}: only triangular faces are supported "
                        f"(got {len(idx)} vertices; triangulate quads first)")
                face = []
                for token in idx:
                    v_index = token.split("/")[0]
                    i = int(v_index)
                    if i <= 0:
                        raise MeshFormatError(
                            f"{path}:{lineno}: indices must be positive and 1-based")
                    face.append(i - 1)
                faces.append(face)
            # other tags (vn, vt, o, g, usemtl, ...) are ignored
    if not vertices:
        raise MeshFormatError(f"{path}: no vertices found")
    return Mesh(np.array(vertices), np.array(faces, dtype=np.int32) if faces
                else np.zeros((0, 3), dtype=np.int32),
                name=str(path))


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


@dataclass
class RenderBuffers:
    """Per-pixel render products; empty pixels hold +inf depth / id -1."""

    depth: np.ndarray
    normals: np.ndarray
    face_id: np.ndarray
    silhouette: np.ndarray
    warning: str | None = None

    @property
    def empty(self) -> bool:
        return not bool(self.silhouette.any())


@dataclass
class SketchImage:
    """Byte-encoded surface normals over a constant background."""

    pixels: np.ndarray  # (H, W, 3) uint8
    silhouette: np.ndarray  # (H, W) bool
    background: tuple[int, int, int] = SKETCH_BACKGROUND


def rasterize(mesh: Mesh, view: Viewpoint, k: Intrinsics, size) -> RenderBuffers:
    """Render depth/normal/face-id/silhouette buffers at the given pose.

    Deterministic: identical inputs give bit-identical buffers. A mesh
    entirely behind the camera yields empty buffers with a warning, not an
    error. Faces only partially in front of the camera are skipped.
    """
    h, w = size
    if h <= 0 or w <= 0:
        raise ValueError(f"render size must be positive, got {size}")
    depth = np.full((h, w), np.inf)
    normals = np.zeros((h, w, 3))
    face_id = np.full((h, w), -1, dtype=np.int32)

    cam = view.transform(mesh.vertices)
    z = cam[:, 2]
    cx, cy = k.principal_point
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.focal * cam[:, 0] / z + cx
        v = k.focal * cam[:, 1] / z + cy

    faces = mesh.faces
    drawn = 0
    if len(faces):
        tz = z[faces]  # (M, 3)
        tu = u[faces]
        tv = v[faces]
        in_front = (tz > _NEAR).all(axis=1)
        # screen-space edge determinant per face
        denom = ((tu[:, 1] - tu[:, 0]) * (tv[:, 2] - tv[:, 0])
                 - (tv[:, 1] - tv[:, 0]) * (tu[:, 2] - tu[:, 0]))
        valid = in_front & (np.abs(denom) > 1e-12)
        # camera-frame face normals, oriented toward the camera, in the
        # normal-map frame (x right, y up, z toward viewer)
        e1 = cam[faces[:, 1]] - cam[faces[:, 0]]
        e2 = cam[faces[:, 2]] - cam[faces[:, 0]]
        fnorm = np.cross(e1, e2)
        norm_len = np.linalg.norm(fnorm, axis=1, keepdims=True)
        norm_len[norm_len == 0] = 1.0
        fnorm = fnorm / norm_len
        centroids = cam[faces].mean(axis=1)
        flip = (fnorm * centroids).sum(axis=1) > 0
        fnorm[flip] = -fnorm[flip]
        stored_all = fnorm * np.array([1.0, -1.0, -1.0])
        xs0 = np.maximum(0, np.floor(tu.min(axis=1)).astype(np.int64))
        xs1 = np.minimum(w, np.ceil(tu.max(axis=1)).astype(np.int64) + 1)
        ys0 = np.maximum(0, np.floor(tv.min(axis=1)).astype(np.int64))
        ys1 = np.minimum(h, np.ceil(tv.max(axis=1)).astype(np.int64) + 1)
        valid &= (xs0 < xs1) & (ys0 < ys1)
        inv_tz = 1.0 / np.where(tz > _NEAR, tz, 1.0)
        col_centers = np.arange(w) + 0.5
        row_centers = (np.arange(h) + 0.5).reshape(-1, 1)

        for fi in np.flatnonzero(valid):
            ax, bx, cx2 = tu[fi]
            ay, by, cy2 = tv[fi]
            x0, x1, y0, y1 = xs0[fi], xs1[fi], ys0[fi], ys1[fi]
            xs = col_centers[x0:x1]
            ys = row_centers[y0:y1]
            inv_d = 1.0 / denom[fi]
            w0 = ((cx2 - bx) * (ys - by) - (cy2 - by) * (xs - bx)) * inv_d
            w1 = ((ax - cx2) * (ys - cy2) - (ay - cy2) * (xs - cx2)) * inv_d
            w2 = 1.0 - w0 - w1
            inv_z = w0 * inv_tz[fi, 0] + w1 * inv_tz[fi, 1] + w2 * inv_tz[fi, 2]
            pix_depth = 1.0 / inv_z
            tile = depth[y0:y1, x0:x1]
            closer = (w0 >= 0) & (w1 >= 0) & (w2 >= 0) & (pix_depth < tile)
            if not closer.any():
                continue
            drawn += 1
            tile[closer] = pix_depth[closer]
            face_id[y0:y1, x0:x1][closer] = fi

        hit = face_id >= 0
        if hit.any():
            normals[hit] = stored_all[face_id[hit]]

    warning = None
    if mesh.face_count and drawn == 0:
        warning = "mesh is entirely behind the camera or outside the frame"
    silhouette = np.isfinite(depth)
    return RenderBuffers(depth=depth, normals=normals, face_id=face_id,
                         silhouette=silhouette, warning=warning)


def render_sketch(buffers: RenderBuffers,
                  background: tuple[int, int, int] = SKETCH_BACKGROUND) -> SketchImage:
    """Encode the normal buffer to bytes: round(255*(n+1)/2) over a constant background."""
    h, w = buffers.depth.shape
    pixels = np.empty((h, w, 3), dtype=np.uint8)
    pixels[:] = np.asarray(background, dtype=np.uint8)
    fg = buffers.silhouette
    encoded = np.clip(np.rint(255.0 * (buffers.normals[fg] + 1.0) / 2.0), 0, 255)
    pixels[fg] = encoded.astype(np.uint8)
    return SketchImage(pixels=pixels, silhouette=fg.copy(), background=tuple(background))


def _plane_basis(points: np.ndarray):
    """Least-squares plane through points: (centroid, 2x3 basis, unit normal)."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centroid, vt[:2], vt[2]


def _patch_samples(points3d: np.ndarray, grid_n: int, inset: float):
    """(sample grid on the patch plane, plane normal), or None if degenerate."""
    if len(points3d) < 3:
        return None
    centroid, basis, normal = _plane_basis(points3d)
    coords2 = (points3d - centroid) @ basis.T
    hull = convex_hull(coords2)
    if len(hull) < 3:
        return None
    scale2 = float(np.abs(coords2).max())
    if polygon_area(hull) < 1e-10 * max(scale2, 1e-12) ** 2:
        return None
    hull_center = hull.mean(axis=0)
    hull = hull_center + (hull - hull_center) * (1.0 - inset)
    lo = hull.min(axis=0)
    hi = hull.max(axis=0)
    xs = np.linspace(lo[0], hi[0], grid_n)
    ys = np.linspace(lo[1], hi[1], grid_n)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    grid = grid[points_in_polygon(grid, hull)]
    if len(grid) == 0:
        return None
    return centroid + grid @ basis, normal


def patch_plane_samples(kps3d: Mapping[str, np.ndarray], spec,
                        grid_n: int = 12, inset: float = 0.05):
    """Per-patch (sample grid, plane normal) pairs on each patch's plane polygon.

    View independent, so the result can be computed once per (CAD, spec) and
    reused across visibility queries. Degenerate patches map to None.
    """
    out = {}
    for name, kp_names in spec.patches.items():
        try:
            pts3 = np.stack([np.asarray(kps3d[kp], dtype=np.float64) for kp in kp_names])
        except KeyError as exc:
            raise KeyError(f"patch '{name}' references missing 3D keypoint {exc}") from exc
        out[name] = _patch_samples(pts3, grid_n, inset)
    return out


def patch_visibility(mesh: Mesh, kps3d: Mapping[str, np.ndarray], spec,
                     buffers: RenderBuffers, view: Viewpoint, k: Intrinsics,
                     rel_tol: float = 0.01, grid_n: int = 12,
                     inset: float = 0.05, min_incidence_deg: float = 8.0,
                     max_normal_dev_deg: float = 30.0,
                     plane_samples=None) -> dict[str, float]:
    """Fraction of each patch's plane samples that the z-buffer confirms visible.

    Samples are taken on a grid inside each patch's 3D plane polygon
    (slightly inset to dodge silhouette-edge quantization) and projected
    with the same camera as ``buffers``. A sample is visible when

    * the depth buffer matches its depth within ``rel_tol`` (relative:
      keypoints sit slightly off the true surface),
    * the surface normal stored at that pixel agrees with the patch plane
      within ``max_normal_dev_deg`` (the pixel must show this plane, not
      just any surface at a compatible depth: near shared edges the depth
      band alone cannot separate an occluded face from its occluder), and
    * the viewing ray meets the patch plane at more than
      ``min_incidence_deg`` (a grazing patch carries no usable texture).

    Degenerate patches (< 3 keypoints, collinear) report 0.
    ``plane_samples`` may carry grids precomputed by
    :func:`patch_plane_samples`.
    """
    h, w = buffers.depth.shape
    cx, cy = k.principal_point
    if plane_samples is None:
        plane_samples = patch_plane_samples(kps3d, spec, grid_n=grid_n, inset=inset)
    center = view.camera_center()
    min_cos = np.sin(np.radians(min_incidence_deg))
    normal_cos = np.cos(np.radians(max_normal_dev_deg))
    # patch plane normals compare against stored normals in the normal-map
    # frame; the frame change is a rotation, so |dot| is frame-invariant
    flip = np.array([1.0, -1.0, -1.0])
    fractions: dict[str, float] = {}
    for name in spec.patches:
        entry = plane_samples[name]
        if entry is None:
            fractions[name] = 0.0
            continue
        samples, normal = entry
        cam = view.transform(samples)
        z = cam[:, 2]
        good = z > _NEAR
        if not good.any():
            fractions[name] = 0.0
            continue
        rays = samples[good] - center
        rays /= np.linalg.norm(rays, axis=1, keepdims=True)
        incident = np.abs(rays @ normal) >= min_cos
        u = k.focal * cam[good, 0] / z[good] + cx
        v = k.focal * cam[good, 1] / z[good] + cy
        ix = np.floor(u).astype(np.int64)
        iy = np.floor(v).astype(np.int64)
        in_img = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        gz = z[good]
        zbuf = np.full(len(gz), np.inf)
        zbuf[in_img] = buffers.depth[iy[in_img], ix[in_img]]
        ok = np.abs(gz - zbuf) <= rel_tol * gz
        stored_patch_normal = (view.rotation @ normal) * flip
        pixel_normals = np.zeros((len(gz), 3))
        pixel_normals[in_img] = buffers.normals[iy[in_img], ix[in_img]]
        same_plane = np.abs(pixel_normals @ stored_patch_normal) >= normal_cos
        match = np.zeros(len(samples), dtype=bool)
        match[np.flatnonzero(good)] = ok & in_img & incident & same_plane
        fractions[name] = float(match.sum()) / float(len(samples))
    return fractions
