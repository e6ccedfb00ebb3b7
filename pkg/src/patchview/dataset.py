"""Dataset ingestion, viewpoint sampling, keypoint perturbation, color space.

A dataset root holds a single ``manifest.json`` index plus mesh/image assets:

    {"class": str,
     "cads": [{"id": int, "mesh": "path.obj", "keypoints3d": {name: [x,y,z]}}],
     "samples": [{"id": str, "image": "path.png",
                  "keypoints2d": {name: [u,v]},            # normalized [0,1]
                  "view": {"azimuth_deg":..,"elevation_deg":..,"radius":..}
                        | {"matrix": [16 floats, row-major world-to-camera]},
                  "cad_id": int}]}

Invalid samples are skipped with a logged reason; structural problems
(missing manifest, bad mesh) raise. The same schema serves real and
synthetic data, so mixtures are plain concatenations.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CadResolutionError, KeypointError, ManifestError
from .geometry import SphericalPose, Viewpoint
from .raster import Mesh, load_obj

logger = logging.getLogger(__name__)

__all__ = [
    "AnnotatedSample",
    "CadModel",
    "CadCatalog",
    "ViewpointSampler",
    "load_dataset",
    "sample_viewpoint",
    "perturb_keypoints",
    "rgb_to_lab",
    "lab_to_rgb",
    "lab_to_bytes",
    "bytes_to_lab",
    "load_image",
    "save_image",
]


@dataclass(frozen=True, eq=False)
class CadModel:
    id: int
    mesh: Mesh
    keypoints3d: dict[str, np.ndarray]
    name: str = ""


@dataclass(frozen=True, eq=False)
class CadCatalog:
    class_name: str
    models: dict[int, CadModel]

    def __getitem__(self, cad_id: int) -> CadModel:
        try:
            return self.models[cad_id]
        except KeyError:
            raise CadResolutionError(
                f"cad_id {cad_id} not in catalog (have {sorted(self.models)})") from None

    def __len__(self) -> int:
        return len(self.models)

    def ids(self) -> list[int]:
        return sorted(self.models)

    def keypoint_names(self) -> set[str]:
        first = next(iter(self.models.values()))
        return set(first.keypoints3d)


@dataclass(eq=False)
class AnnotatedSample:
    id: str
    image: np.ndarray  # (H, W, 3) uint8
    keypoints_2d: dict[str, np.ndarray]  # normalized [0,1]
    view: SphericalPose | Viewpoint
    cad_id: int
    class_name: str = ""


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image(array: np.ndarray, path, compress_level: int = 3) -> None:
    Image.fromarray(np.asarray(array)).save(path, compress_level=compress_level)


def _parse_view(data) -> SphericalPose | Viewpoint:
    if "matrix" in data:
        m = np.asarray(data["matrix"], dtype=np.float64)
        if m.size != 16:
            raise ManifestError(f"view matrix must have 16 entries, got {m.size}")
        return Viewpoint.from_matrix(m.reshape(4, 4))
    try:
        return SphericalPose(azimuth_deg=float(data["azimuth_deg"]),
                             elevation_deg=float(data["elevation_deg"]),
                             radius=float(data["radius"]))
    except KeyError as exc:
        raise ManifestError(f"view is missing field {exc}") from exc


def load_dataset(root, class_name: str | None = None):
    """Load (CadCatalog, list[AnnotatedSample]) from a dataset root.

    Samples failing validation (unresolvable cad_id, keypoint names not
    matching the catalog, unreadable image) are skipped and logged, echoing
    the usual practice of discarding unusable annotations. Ordering is
    stable (sorted by sample id).
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ManifestError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{manifest_path}: invalid JSON ({exc})") from exc

    cls = manifest.get("class")
    if cls is None:
        raise ManifestError(f"{manifest_path}: missing 'class'")
    if class_name is not None and cls != class_name:
        raise ManifestError(f"dataset class is '{cls}', expected '{class_name}'")

    models: dict[int, CadModel] = {}
    for entry in manifest.get("cads", []):
        cad_id = int(entry["id"])
        mesh = load_obj(root / entry["mesh"])
        kps3d = {k: np.asarray(v, dtype=np.float64)
                 for k, v in entry["keypoints3d"].items()}
        models[cad_id] = CadModel(id=cad_id, mesh=mesh, keypoints3d=kps3d,
                                  name=Path(entry["mesh"]).stem)
    if not models:
        raise ManifestError(f"{manifest_path}: no CAD models")
    catalog = CadCatalog(class_name=cls, models=models)
    kp_names = catalog.keypoint_names()
    for m in models.values():
        if set(m.keypoints3d) != kp_names:
            raise ManifestError(
                f"cad {m.id} keypoint names differ from the catalog's")

    samples: list[AnnotatedSample] = []
    for entry in manifest.get("samples", []):
        sid = str(entry.get("id"))
        try:
            cad_id = int(entry["cad_id"])
            if cad_id not in models:
                raise CadResolutionError(f"cad_id {cad_id} not in catalog")
            kps = {k: np.asarray(v, dtype=np.float64).reshape(2)
                   for k, v in entry["keypoints2d"].items()}
            if set(kps) != kp_names:
                missing = sorted(kp_names - set(kps))
                extra = sorted(set(kps) - kp_names)
                raise KeypointError(
                    f"keypoint names mismatch (missing={missing}, extra={extra})")
            bad = [k for k, v in kps.items() if not np.all(np.isfinite(v))]
            if bad:
                raise KeypointError(f"non-finite keypoints: {bad}")
            view = _parse_view(entry["view"])
            image = load_image(root / entry["image"])
            samples.append(AnnotatedSample(id=sid, image=image, keypoints_2d=kps,
                                           view=view, cad_id=cad_id, class_name=cls))
        except Exception as exc:  # noqa: BLE001 - skip-and-log is the contract
            logger.warning("skipping sample %s: %s", sid, exc)
    samples.sort(key=lambda s: s.id)
    return catalog, samples


# ---------------------------------------------------------------------------
# Viewpoint sampling


RING_AZIMUTHS = tuple(float(a) for a in range(0, 360, 30))


@dataclass
class ViewpointSampler:
    """Viewpoint distribution with three modes.

    * ``empirical``: draw (with replacement) from ``poses``.
    * ``uniform-hemisphere``: area-uniform directions on the upper
      hemisphere (azimuth uniform, elevation density proportional to
      cos(elevation)) at fixed ``radius``.
    * ``azimuth-ring``: cycle deterministically through 12 azimuths
      0, 30, ..., 330 at fixed ``elevation_deg``/``radius``.
    """

    mode: str = "uniform-hemisphere"
    seed: int = 0
    poses: list[SphericalPose] = field(default_factory=list)
    radius: float = 120.0
    elevation_deg: float = 10.0

    def __post_init__(self):
        if self.mode not in ("empirical", "uniform-hemisphere", "azimuth-ring"):
            raise ValueError(f"unknown sampler mode '{self.mode}'")
        if self.mode == "empirical" and not self.poses:
            raise ValueError("empirical mode needs a non-empty pose list")
        self._rng = np.random.default_rng(self.seed)
        self._ring_index = 0

    def draw(self, rng: np.random.Generator) -> SphericalPose:
        """One pose using the provided generator (ring mode ignores it)."""
        if self.mode == "empirical":
            return self.poses[int(rng.integers(len(self.poses)))]
        if self.mode == "azimuth-ring":
            az = RING_AZIMUTHS[self._ring_index % len(RING_AZIMUTHS)]
            self._ring_index += 1
            return SphericalPose(az, self.elevation_deg, self.radius)
        az = float(rng.uniform(0.0, 360.0))
        el = math.degrees(math.asin(float(rng.uniform(0.0, 1.0))))
        return SphericalPose(az, el, self.radius)

    def sample(self) -> SphericalPose:
        return self.draw(self._rng)


def sample_viewpoint(sampler: ViewpointSampler) -> SphericalPose:
    """Next pose from the sampler's own stream (reproducible per seed)."""
    return sampler.sample()


def perturb_keypoints(kps, sigma: float, seed: int) -> dict[str, np.ndarray]:
    """Add isotropic Gaussian noise to normalized keypoints, clamped to [0, 1]."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    out = {}
    for name, value in kps.items():
        v = np.asarray(value, dtype=np.float64).reshape(2)
        if sigma > 0:
            v = v + rng.normal(0.0, sigma, size=2)
        out[name] = np.clip(v, 0.0, 1.0)
    return out


# ---------------------------------------------------------------------------
# sRGB <-> CIELAB (D65, 2 degree observer)

_RGB_TO_XYZ = np.array([[0.4124564, 0.3575761, 0.1804375],
                        [0.2126729, 0.7151522, 0.0721750],
                        [0.0193339, 0.1191920, 0.9503041]])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


def rgb_to_lab(image) -> np.ndarray:
    """8-bit sRGB to float CIELAB (L in [0,100], a/b roughly [-128, 127])."""
    rgb = np.asarray(image, dtype=np.float64) / 255.0
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _WHITE_D65
    f = np.where(xyz > _DELTA ** 3, np.cbrt(xyz), xyz / (3 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab.astype(np.float32)


def lab_to_rgb(lab) -> np.ndarray:
    """Float CIELAB back to 8-bit sRGB (inverse of :func:`rgb_to_lab`)."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    xyz = np.where(f > _DELTA, f ** 3, 3 * _DELTA ** 2 * (f - 4.0 / 29.0))
    linear = (xyz * _WHITE_D65) @ _XYZ_TO_RGB.T
    linear = np.clip(linear, 0.0, 1.0)
    rgb = np.where(linear <= 0.0031308, linear * 12.92,
                   1.055 * linear ** (1.0 / 2.4) - 0.055)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def lab_to_bytes(lab) -> np.ndarray:
    """Quantize float LAB to 8-bit planes: L*255/100, a+128, b+128."""
    lab = np.asarray(lab, dtype=np.float64)
    out = np.empty(lab.shape, dtype=np.uint8)
    out[..., 0] = np.clip(np.rint(lab[..., 0] * 255.0 / 100.0), 0, 255)
    out[..., 1] = np.clip(np.rint(lab[..., 1] + 128.0), 0, 255)
    out[..., 2] = np.clip(np.rint(lab[..., 2] + 128.0), 0, 255)
    return out


def bytes_to_lab(data) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    lab = np.empty(data.shape, dtype=np.float32)
    lab[..., 0] = data[..., 0] * 100.0 / 255.0
    lab[..., 1] = data[..., 1] - 128.0
    lab[..., 2] = data[..., 2] - 128.0
    return lab
