"""Planar-patch extraction, homography estimation, and warp/dewarp resampling.

Patches are convex polygons bounded by named 2D keypoints. Each patch is
treated as a plane, so a single homography relates its images under any two
camera poses; warping moves pixel content between poses by inverse mapping
with bilinear interpolation. Mirror-symmetric patch pairs can borrow each
other's content when one side is occluded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import DegenerateHomographyError, PatchSpecError

__all__ = [
    "PatchSpec",
    "Patch",
    "PatchSet",
    "convex_hull",
    "polygon_area",
    "points_in_polygon",
    "estimate_homography",
    "apply_homography",
    "warp_patch",
    "extract_patches",
    "warp_to_view",
    "dewarp_roundtrip",
    "symmetry_transfer",
    "default_patch_spec",
    "VEHICLE_KEYPOINTS",
    "CHAIR_KEYPOINTS",
]

# Minimum polygon area (px^2) below which a patch is degenerate.
MIN_PATCH_AREA = 1.0


# ---------------------------------------------------------------------------
# Patch specification


@dataclass(frozen=True)
class PatchSpec:
    """Per-class catalog of named planar patches.

    ``patches`` maps patch name to an ordered list of >= 3 keypoint names;
    ``mirror`` pairs each patch with its reflection partner (an involution,
    self-pairs allowed); ``keypoint_mirror`` does the same at keypoint level.
    """

    class_name: str
    patches: dict[str, list[str]]
    mirror: dict[str, str]
    keypoint_mirror: dict[str, str]

    def __post_init__(self):
        catalog = self.keypoint_names()
        for patch, kps in self.patches.items():
            if len(kps) < 3:
                raise PatchSpecError(f"patch '{patch}' needs >= 3 keypoints, has {len(kps)}")
            unknown = [k for k in kps if k not in catalog]
            if unknown:
                raise PatchSpecError(f"patch '{patch}' references unknown keypoints: {unknown}")
        for a, b in self.mirror.items():
            if a not in self.patches or b not in self.patches:
                raise PatchSpecError(f"mirror pair ({a}, {b}) references unknown patches")
            if self.mirror.get(b) != a:
                raise PatchSpecError(f"mirror is not an involution at '{a}'")
        for a, b in self.keypoint_mirror.items():
            if self.keypoint_mirror.get(b) != a:
                raise PatchSpecError(f"keypoint_mirror is not an involution at '{a}'")

    def keypoint_names(self) -> set[str]:
        names = set(self.keypoint_mirror)
        for kps in self.patches.values():
            names.update(kps)
        return names

    @classmethod
    def from_json(cls, text: str) -> "PatchSpec":
        data = json.loads(text)
        try:
            return cls(class_name=data["class"],
                       patches={k: list(v) for k, v in data["patches"].items()},
                       mirror=dict(data["mirror"]),
                       keypoint_mirror=dict(data["keypoint_mirror"]))
        except KeyError as exc:
            raise PatchSpecError(f"patch spec missing field: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "PatchSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_json(self) -> str:
        return json.dumps({"class": self.class_name,
                           "patches": self.patches,
                           "mirror": self.mirror,
                           "keypoint_mirror": self.keypoint_mirror},
                          indent=2, sort_keys=True)


VEHICLE_KEYPOINTS = [
    "left_front_wheel", "left_back_wheel", "right_front_wheel", "right_back_wheel",
    "upper_left_windshield", "upper_right_windshield",
    "upper_left_rearwindow", "upper_right_rearwindow",
    "left_front_light", "right_front_light",
    "left_back_trunk", "right_back_trunk",
]

CHAIR_KEYPOINTS = [
    "back_upper_left", "back_upper_right",
    "seat_upper_left", "seat_upper_right",
    "seat_lower_left", "seat_lower_right",
    "leg_upper_left", "leg_upper_right",
    "leg_lower_left", "leg_lower_right",
]


def _mirror_name(name: str) -> str:
    if "left" in name:
        return name.replace("left", "right")
    if "right" in name:
        return name.replace("right", "left")
    return name


def default_patch_spec(class_name: str) -> PatchSpec:
    """Built-in patch catalogs: six planes for vehicles, four for chairs."""
    if class_name in ("car", "vehicle"):
        patches = {
            "left": ["left_front_light", "left_front_wheel", "left_back_wheel",
                     "left_back_trunk", "upper_left_rearwindow", "upper_left_windshield"],
            "right": ["right_front_light", "right_front_wheel", "right_back_wheel",
                      "right_back_trunk", "upper_right_rearwindow", "upper_right_windshield"],
            "roof": ["upper_left_windshield", "upper_right_windshield",
                     "upper_right_rearwindow", "upper_left_rearwindow"],
            "front": ["left_front_light", "right_front_light",
                      "right_front_wheel", "left_front_wheel"],
            "back": ["left_back_trunk", "right_back_trunk",
                     "right_back_wheel", "left_back_wheel"],
            "windshield": ["upper_left_windshield", "upper_right_windshield",
                           "right_front_light", "left_front_light"],
        }
        mirror = {"left": "right", "right": "left", "roof": "roof",
                  "front": "front", "back": "back", "windshield": "windshield"}
        kp_mirror = {k: _mirror_name(k) for k in VEHICLE_KEYPOINTS}
        return PatchSpec("car", patches, mirror, kp_mirror)
    if class_name == "chair":
        patches = {
            "back": ["back_upper_left", "back_upper_right",
                     "seat_upper_right", "seat_upper_left"],
            "seat": ["seat_upper_left", "seat_upper_right",
                     "seat_lower_right", "seat_lower_left"],
            "left": ["back_upper_left", "seat_upper_left", "seat_lower_left",
                     "leg_upper_left", "leg_lower_left"],
            "right": ["back_upper_right", "seat_upper_right", "seat_lower_right",
                      "leg_upper_right", "leg_lower_right"],
        }
        mirror = {"left": "right", "right": "left", "seat": "seat", "back": "back"}
        kp_mirror = {k: _mirror_name(k) for k in CHAIR_KEYPOINTS}
        return PatchSpec("chair", patches, mirror, kp_mirror)
    raise PatchSpecError(f"no built-in patch spec for class '{class_name}'")


# ---------------------------------------------------------------------------
# 2D polygon utilities


def convex_hull(points) -> np.ndarray:
    """Convex hull (Andrew's monotone chain), counterclockwise in (x, y).

    Collinear inputs return the two extreme points; fewer than 3 distinct
    points return what is available. Output shape (M, 2).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    pts = np.unique(pts, axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    return hull


def polygon_area(polygon) -> float:
    """Unsigned shoelace area; 0 for fewer than 3 vertices."""
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points, polygon, tol: float = 1e-9) -> np.ndarray:
    """Boolean membership of (N, 2) points in a convex polygon (boundary included)."""
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 3:
        return np.zeros(len(pts), dtype=bool)
    scale = max(1.0, float(np.abs(poly).max()))
    eps = tol * scale
    px = pts[:, 0]
    py = pts[:, 1]
    # cross((b-a), (p-a)) per edge; all-same-sign (up to tol) means inside
    pos = np.ones(len(pts), dtype=bool)
    neg = np.ones(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        cr = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        pos &= cr >= -eps
        neg &= cr <= eps
        if not pos.any() and not neg.any():
            break
    return pos | neg


# ---------------------------------------------------------------------------
# Homographies


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = np.sqrt(2.0) / d if d > 1e-12 else 1.0
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def estimate_homography(src, dst) -> np.ndarray:
    """Direct linear transform with Hartley normalization.

    ``src`` and ``dst`` are matching (N, 2) arrays, N >= 4. Exact for four
    points in general position; least-squares (minimum algebraic error on
    normalized coordinates) for more. The result is scaled so h33 = 1
    whenever h33 is nonzero.

    Raises :class:`DegenerateHomographyError` for rank-deficient
    configurations (e.g. three collinear points among four).
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape:
        raise DegenerateHomographyError("src and dst must have matching shapes")
    n = len(src)
    if n < 4:
        raise DegenerateHomographyError(f"need >= 4 correspondences, got {n}")
    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    sh = src @ t_src[:2, :2].T + t_src[:2, 2]
    dh = dst @ t_dst[:2, :2].T + t_dst[:2, 2]
    a = np.zeros((2 * n, 9))
    x, y = sh[:, 0], sh[:, 1]
    u, v = dh[:, 0], dh[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v
    _, s, vt = np.linalg.svd(a)
    if n == 4 and s[7] < 1e-9 * max(s[0], 1e-300):
        raise DegenerateHomographyError(
            "degenerate correspondence set (rank-deficient design matrix)")
    h = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h @ t_src
    if abs(np.linalg.det(h)) < 1e-12 * max(1.0, np.abs(h).max()) ** 3:
        raise DegenerateHomographyError("estimated homography is singular")
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def apply_homography(h, points) -> np.ndarray:
    """Map (N, 2) points through a homography, with perspective divide."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    w = pts @ h[2, :2] + h[2, 2]
    x = pts @ h[0, :2] + h[0, 2]
    y = pts @ h[1, :2] + h[1, 2]
    return np.stack([x / w, y / w], axis=1)


def _bilinear_sample(image: np.ndarray, coords: np.ndarray):
    """Sample float image channels at continuous pixel coords; returns (values, in_bounds).

    ``coords`` are (N, 2) continuous image-plane positions (pixel (i, j)
    center at (i+0.5, j+0.5)). Out-of-bounds samples are flagged, not
    clamped, and border samples clamp-replicate the edge texel.
    """
    h, w = image.shape[:2]
    g = coords - 0.5
    x0 = np.floor(g[:, 0]).astype(np.int64)
    y0 = np.floor(g[:, 1]).astype(np.int64)
    fx = g[:, 0] - x0
    fy = g[:, 1] - y0
    in_bounds = (g[:, 0] >= -0.5) & (g[:, 0] <= w - 0.5) & \
                (g[:, 1] >= -0.5) & (g[:, 1] <= h - 0.5)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    img = image.reshape(h, w, -1)
    v00 = img[y0c, x0c]
    v10 = img[y0c, x1c]
    v01 = img[y1c, x0c]
    v11 = img[y1c, x1c]
    wx = fx[:, None]
    wy = fy[:, None]
    values = (v00 * (1 - wx) * (1 - wy) + v10 * wx * (1 - wy)
              + v01 * (1 - wx) * wy + v11 * wx * wy)
    return values, in_bounds


def _polygon_grid_mask(polygon: np.ndarray, x0: int, x1: int, y0: int, y1: int,
                       tol: float = 1e-9) -> np.ndarray:
    """Convex-polygon membership of pixel centers over an integer bbox, as (rows, cols)."""
    xs = np.arange(x0, x1) + 0.5
    ys = (np.arange(y0, y1) + 0.5).reshape(-1, 1)
    eps = tol * max(1.0, float(np.abs(polygon).max()))
    pos = np.ones((y1 - y0, x1 - x0), dtype=bool)
    neg = pos.copy()
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        cr = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        pos &= cr >= -eps
        neg &= cr <= eps
    return pos | neg


def warp_patch(image, src_polygon, dst_polygon, h, out_size=None) -> np.ndarray:
    """Inverse-warp a polygonal patch, returning a full-frame RGBA image.

    Every destination pixel whose center lies inside ``dst_polygon`` is
    sampled from the source at H^-1 p with bilinear interpolation. Samples
    falling outside the source polygon or the source image are transparent.
    For RGBA sources the color sampling is alpha-weighted so transparent
    texels never bleed into the result; coverage itself stays geometric
    (polygon membership).
    """
    image = np.asarray(image)
    if out_size is None:
        out_h, out_w = image.shape[:2]
    else:
        out_h, out_w = out_size
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    dst_poly = np.asarray(dst_polygon, dtype=np.float64).reshape(-1, 2)
    if len(dst_poly) < 3 or polygon_area(dst_poly) <= 0.0:
        return out
    try:
        h_inv = np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:
        raise DegenerateHomographyError("homography is not invertible") from exc

    x0 = max(0, int(np.floor(dst_poly[:, 0].min())))
    x1 = min(out_w, int(np.ceil(dst_poly[:, 0].max())) + 1)
    y0 = max(0, int(np.floor(dst_poly[:, 1].min())))
    y1 = min(out_h, int(np.ceil(dst_poly[:, 1].max())) + 1)
    if x0 >= x1 or y0 >= y1:
        return out

    mask = _polygon_grid_mask(dst_poly, x0, x1, y0, y1)
    if not mask.any():
        return out
    iy, ix = np.nonzero(mask)
    px = ix + (x0 + 0.5)
    py = iy + (y0 + 0.5)

    wdiv = h_inv[2, 0] * px + h_inv[2, 1] * py + h_inv[2, 2]
    valid = np.abs(wdiv) > 1e-12
    safe = np.where(valid, wdiv, 1.0)
    sx = (h_inv[0, 0] * px + h_inv[0, 1] * py + h_inv[0, 2]) / safe
    sy = (h_inv[1, 0] * px + h_inv[1, 1] * py + h_inv[1, 2]) / safe
    sx = np.where(valid, sx, -1e9)
    sy = np.where(valid, sy, -1e9)
    src_pts = np.stack([sx, sy], axis=1)

    src_poly_arr = np.asarray(src_polygon, dtype=np.float64)
    inside_src = points_in_polygon(src_pts, src_poly_arr)

    # restrict source conversion to the polygon's bbox (plus the 1-texel
    # bilinear margin); samples outside the polygon are dropped anyway
    ih, iw = image.shape[:2]
    bx0 = max(0, int(np.floor(src_poly_arr[:, 0].min())) - 1)
    bx1 = min(iw, int(np.ceil(src_poly_arr[:, 0].max())) + 2)
    by0 = max(0, int(np.floor(src_poly_arr[:, 1].min())) - 1)
    by1 = min(ih, int(np.ceil(src_poly_arr[:, 1].max())) + 2)
    if bx0 >= bx1 or by0 >= by1:
        return out
    region = image[by0:by1, bx0:bx1]
    local_pts = src_pts - np.array([bx0, by0], dtype=np.float64)

    has_alpha = image.ndim == 3 and image.shape[2] == 4
    if has_alpha:
        # alpha-premultiplied sampling in one gather: [r*a, g*a, b*a, a]
        chans = region.astype(np.float32)
        alpha = chans[..., 3:] / np.float32(255.0)
        chans = np.concatenate([chans[..., :3] * alpha, alpha], axis=2)
        sampled, in_bounds = _bilinear_sample(chans, local_pts)
        weight = sampled[:, 3]
        covered = weight > 1e-6
        values = np.zeros((len(sampled), 3))
        values[covered] = sampled[covered, :3] / weight[covered, None]
        keep = valid & inside_src & in_bounds & covered
    else:
        values, in_bounds = _bilinear_sample(region[..., :3].astype(np.float32), local_pts)
        keep = valid & inside_src & in_bounds

    oy = iy[keep] + y0
    ox = ix[keep] + x0
    out[oy, ox, :3] = np.clip(np.rint(values[keep]), 0, 255).astype(np.uint8)
    out[oy, ox, 3] = 255
    return out


# ---------------------------------------------------------------------------
# Patch sets


@dataclass
class Patch:
    """State of one named patch within a PatchSet."""

    name: str
    src_polygon: np.ndarray | None
    dst_polygon: np.ndarray | None = None
    visible: bool = True
    degenerate: bool = False
    homography: np.ndarray | None = None
    content: np.ndarray | None = None  # full-frame RGBA, uint8
    mirrored_from: str | None = None

    @property
    def dropped(self) -> bool:
        return self.degenerate or not self.visible


@dataclass
class PatchSet:
    """Per-image set of patches plus the keypoint maps that produced them.

    ``keypoints_src`` / ``keypoints_dst`` are pixel-coordinate maps; they are
    retained so symmetry transfer can route content through mirrored
    correspondences.
    """

    image_size: tuple[int, int]
    patches: dict[str, Patch]
    keypoints_src: dict[str, np.ndarray] | None = None
    keypoints_dst: dict[str, np.ndarray] | None = None
    source_image: np.ndarray | None = None

    def __iter__(self):
        return iter(self.patches.values())

    def __getitem__(self, name: str) -> Patch:
        return self.patches[name]

    def names(self) -> list[str]:
        return list(self.patches)

    def dropped_names(self) -> list[str]:
        return sorted(n for n, p in self.patches.items()
                      if p.dropped or p.content is None)

    def set_visibility(self, fractions: Mapping[str, float], threshold: float = 0.5) -> None:
        """Flag patches whose visibility fraction falls below ``threshold``."""
        for name, patch in self.patches.items():
            if name in fractions:
                patch.visible = fractions[name] >= threshold
                if not patch.visible:
                    patch.content = None

    def composite(self) -> np.ndarray:
        """Composite patch contents, lexicographically later names on top."""
        h, w = self.image_size
        out = np.zeros((h, w, 4), dtype=np.uint8)
        for name in sorted(self.patches):
            patch = self.patches[name]
            if patch.dropped or patch.content is None:
                continue
            mask = patch.content[..., 3] > 0
            out[mask] = patch.content[mask]
        return out


def _kps_to_pixels(kps: Mapping[str, np.ndarray], image_size) -> dict[str, np.ndarray]:
    h, w = image_size
    scale = np.array([w, h], dtype=np.float64)
    return {k: np.asarray(v, dtype=np.float64).reshape(2) * scale for k, v in kps.items()}


def _crop_polygon(image: np.ndarray, polygon: np.ndarray, size) -> np.ndarray:
    """Identity-warp fast path: copy pixels whose centers fall inside the polygon."""
    out_h, out_w = size
    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    x0 = max(0, int(np.floor(polygon[:, 0].min())))
    x1 = min(out_w, int(np.ceil(polygon[:, 0].max())) + 1)
    y0 = max(0, int(np.floor(polygon[:, 1].min())))
    y1 = min(out_h, int(np.ceil(polygon[:, 1].max())) + 1)
    if x0 >= x1 or y0 >= y1:
        return out
    inside = _polygon_grid_mask(np.asarray(polygon, dtype=np.float64), x0, x1, y0, y1)
    block = out[y0:y1, x0:x1]
    block[inside, :3] = image[y0:y1, x0:x1, :3][inside]
    block[inside, 3] = 255
    return out


def extract_patches(kps: Mapping[str, np.ndarray], spec: PatchSpec,
                    image_size, image=None) -> PatchSet:
    """Build source polygons (convex hulls of each patch's keypoints).

    ``kps`` is in normalized [0, 1] coordinates. When ``image`` is supplied,
    each patch is filled with its source crop (identity-warp content) so the
    set is ready for warping. Hulls with fewer than 3 non-collinear vertices
    are flagged degenerate, never raised.
    """
    missing = sorted(set(k for kps_list in spec.patches.values() for k in kps_list)
                     - set(kps))
    if missing:
        raise PatchSpecError(f"keypoints missing from input: {', '.join(missing)}")
    px = _kps_to_pixels(kps, image_size)
    patches = {}
    for name, kp_names in spec.patches.items():
        pts = np.stack([px[k] for k in kp_names])
        hull = convex_hull(pts)
        degenerate = len(hull) < 3 or polygon_area(hull) < MIN_PATCH_AREA
        poly = None if degenerate else hull
        content = None
        if image is not None and not degenerate:
            content = _crop_polygon(np.asarray(image), poly, image_size)
        patches[name] = Patch(name=name, src_polygon=poly, dst_polygon=poly,
                              degenerate=degenerate, content=content,
                              homography=np.eye(3) if not degenerate else None)
    return PatchSet(image_size=tuple(image_size), patches=patches,
                    keypoints_src=px, keypoints_dst=px,
                    source_image=None if image is None else np.asarray(image))


def _fit_patch_homography(kp_names, kps_from, kps_to):
    src = np.stack([kps_from[k] for k in kp_names])
    dst = np.stack([kps_to[k] for k in kp_names])
    return estimate_homography(src, dst)


def _map_polygon(h, polygon):
    """Map a convex polygon through H; None if it crosses the line at infinity."""
    poly = np.asarray(polygon, dtype=np.float64)
    w = poly @ h[2, :2] + h[2, 2]
    if np.any(np.abs(w) < 1e-12) or (w.max() > 0) != (w.min() > 0):
        return None
    return apply_homography(h, poly)


def warp_to_view(patches: PatchSet, kps_src: Mapping[str, np.ndarray],
                 kps_dst: Mapping[str, np.ndarray], spec: PatchSpec) -> PatchSet:
    """Warp every visible patch to the destination keypoint configuration.

    Homographies are fitted per patch on that patch's own keypoints. Patches
    flagged invisible at the source stay dropped; per-patch estimation
    failures degrade that patch to dropped instead of aborting the set.
    """
    if patches.source_image is None:
        raise PatchSpecError("patch set has no source image to warp from")
    size = patches.image_size
    src_px = _kps_to_pixels(kps_src, size)
    dst_px = _kps_to_pixels(kps_dst, size)
    out = {}
    for name, patch in patches.patches.items():
        new = Patch(name=name, src_polygon=patch.src_polygon,
                    visible=patch.visible, degenerate=patch.degenerate)
        if patch.dropped or patch.src_polygon is None:
            out[name] = new
            continue
        try:
            h = _fit_patch_homography(spec.patches[name], src_px, dst_px)
            dst_poly = _map_polygon(h, patch.src_polygon)
            if dst_poly is None or polygon_area(dst_poly) < MIN_PATCH_AREA:
                raise DegenerateHomographyError("destination polygon collapsed")
            new.homography = h
            new.dst_polygon = dst_poly
            new.content = warp_patch(patches.source_image, patch.src_polygon,
                                     dst_poly, h, out_size=size)
        except DegenerateHomographyError:
            new.degenerate = True
            new.content = None
        out[name] = new
    return PatchSet(image_size=size, patches=out, keypoints_src=src_px,
                    keypoints_dst=dst_px, source_image=patches.source_image)


def dewarp_roundtrip(image, kps_src: Mapping[str, np.ndarray],
                     kps_mid: Mapping[str, np.ndarray], spec: PatchSpec,
                     visibility: Mapping[str, bool],
                     image_size=None) -> PatchSet:
    """Warp patches to an intermediate keypoint configuration and back.

    The double resampling bakes realistic interpolation artifacts into the
    returned set; ``visibility[name]`` False (occluded at either endpoint)
    zeroes that patch, which acts as viewpoint-driven patch dropout.
    """
    image = np.asarray(image)
    if image_size is None:
        image_size = image.shape[:2]
    ps = extract_patches(kps_src, spec, image_size, image=image)
    src_px = ps.keypoints_src
    mid_px = _kps_to_pixels(kps_mid, image_size)
    for name, patch in ps.patches.items():
        if not visibility.get(name, True):
            patch.visible = False
            patch.content = None
            continue
        if patch.degenerate or patch.src_polygon is None:
            continue
        try:
            h = _fit_patch_homography(spec.patches[name], src_px, mid_px)
            mid_poly = _map_polygon(h, patch.src_polygon)
            if mid_poly is None or polygon_area(mid_poly) < MIN_PATCH_AREA:
                raise DegenerateHomographyError("intermediate polygon collapsed")
            mid_content = warp_patch(image, patch.src_polygon, mid_poly, h,
                                     out_size=image_size)
            back = warp_patch(mid_content, mid_poly, patch.src_polygon,
                              np.linalg.inv(h), out_size=image_size)
            patch.homography = h
            patch.dst_polygon = patch.src_polygon
            patch.content = back
        except DegenerateHomographyError:
            patch.degenerate = True
            patch.content = None
    return ps


def symmetry_transfer(patches: PatchSet, visibility_src: Mapping[str, bool],
                      visibility_dst: Mapping[str, bool],
                      spec: PatchSpec) -> PatchSet:
    """Fill destination-visible patches occluded at the source from their mirror partner.

    The partner's warped content is re-warped by the homography fitted
    between mirrored and plain destination keypoints, which yields the
    horizontally mirrored texture. Patches with neither side visible stay
    dropped; everything already visible passes through untouched.
    """
    if patches.keypoints_dst is None:
        raise PatchSpecError("patch set carries no destination keypoints")
    out = PatchSet(image_size=patches.image_size,
                   patches={n: replace(p) for n, p in patches.patches.items()},
                   keypoints_src=patches.keypoints_src,
                   keypoints_dst=patches.keypoints_dst,
                   source_image=patches.source_image)
    dst_px = patches.keypoints_dst
    for name, patch in out.patches.items():
        if visibility_src.get(name, False) or not visibility_dst.get(name, False):
            continue
        partner_name = spec.mirror.get(name)
        if partner_name is None or partner_name == name:
            continue
        partner = out.patches.get(partner_name)
        if partner is None or not visibility_src.get(partner_name, False):
            continue
        if partner.content is None or partner.dst_polygon is None:
            continue
        kp_names = spec.patches[name]
        try:
            src_pts = np.stack([dst_px[spec.keypoint_mirror[k]] for k in kp_names])
            dst_pts = np.stack([dst_px[k] for k in kp_names])
            h = estimate_homography(src_pts, dst_pts)
            dst_poly = _map_polygon(h, partner.dst_polygon)
            if dst_poly is None or polygon_area(dst_poly) < MIN_PATCH_AREA:
                raise DegenerateHomographyError("mirrored polygon collapsed")
            patch.content = warp_patch(partner.content, partner.dst_polygon,
                                       dst_poly, h, out_size=patches.image_size)
            patch.dst_polygon = dst_poly
            patch.homography = h
            patch.visible = True
            patch.degenerate = False
            patch.mirrored_from = partner_name
        except DegenerateHomographyError:
            continue
    return out
