"""End-to-end assembly: completion inputs, training pairs, novel-view synthesis.

The completion backend is pluggable; the bundled "baseline" backend is a
deterministic, non-learned stand-in that pastes warped patch pixels inside
the rendered silhouette and floods the remainder with the mean color of the
appearance prior. Learned backends can be registered under new names and
receive the exact same input tuple.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import weakref
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import (AnnotatedSample, CadModel, ViewpointSampler, lab_to_bytes,
                      rgb_to_lab, save_image)
from .errors import DegenerateSampleError, PatchviewError
from .geometry import Intrinsics, SphericalPose, Viewpoint, project_points, \
    viewpoint_from_spherical
from .raster import (SketchImage, patch_plane_samples, patch_visibility,
                     rasterize, render_sketch)
from .warp import PatchSet, PatchSpec, dewarp_roundtrip, extract_patches, \
    symmetry_transfer, warp_to_view

logger = logging.getLogger(__name__)

__all__ = [
    "PriorCrop",
    "ICNInput",
    "TrainingPair",
    "SynthesisResult",
    "appearance_prior",
    "assemble_input",
    "baseline_complete",
    "get_backend",
    "BACKENDS",
    "emit_training_pair",
    "synthesize_view",
    "save_training_pair",
    "emit_pairs",
    "derive_seed",
    "BACKGROUND",
]

BACKGROUND = (255, 255, 255)


@dataclass(frozen=True, eq=False)
class PriorCrop:
    """Centered square crop conveying coarse appearance."""

    pixels: np.ndarray
    side_fraction: float
    offset: tuple[int, int]

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    def mean_color(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels.reshape(-1, 3).mean(axis=0)), 0, 255) \
            .astype(np.uint8)


def appearance_prior(image, side_fraction: float = 0.10) -> PriorCrop:
    """Centered crop with side floor(side_fraction * S) of a square image."""
    img = np.asarray(image)
    h, w = img.shape[:2]
    if h != w:
        raise ValueError(f"appearance prior expects a square image, got {h}x{w}")
    side = int(np.floor(side_fraction * h))
    if side < 1:
        raise ValueError(
            f"image side {h} too small for a {side_fraction:.0%} crop")
    off = (h - side) // 2
    return PriorCrop(pixels=img[off:off + side, off:off + side].copy(),
                     side_fraction=side_fraction, offset=(off, off))


@dataclass
class ICNInput:
    """The completion backend's input tuple; all planes share one H x W."""

    patches_composite: np.ndarray  # (H, W, 4) uint8
    sketch: SketchImage
    prior: PriorCrop
    silhouette: np.ndarray  # (H, W) bool


def assemble_input(patches: PatchSet, sketch: SketchImage, prior: PriorCrop) -> ICNInput:
    """Composite the patch set (lexicographically later names on top) over the sketch's frame."""
    composite = patches.composite()
    if composite.shape[:2] != sketch.pixels.shape[:2]:
        raise ValueError(
            f"patch frame {composite.shape[:2]} != sketch frame {sketch.pixels.shape[:2]}")
    return ICNInput(patches_composite=composite, sketch=sketch, prior=prior,
                    silhouette=sketch.silhouette.copy())


def baseline_complete(icn: ICNInput, background=BACKGROUND) -> np.ndarray:
    """Deterministic completion: patch pixels where present, prior mean elsewhere
    inside the silhouette, background outside."""
    h, w = icn.silhouette.shape
    out = np.empty((h, w, 3), dtype=np.uint8)
    out[:] = np.asarray(background, dtype=np.uint8)
    fill = icn.prior.mean_color()
    sil = icn.silhouette
    out[sil] = fill
    covered = sil & (icn.patches_composite[..., 3] > 0)
    out[covered] = icn.patches_composite[covered][:, :3]
    return out


BACKENDS = {"baseline": baseline_complete}


def get_backend(backend):
    if callable(backend):
        return backend
    try:
        return BACKENDS[backend]
    except KeyError:
        raise PatchviewError(
            f"unknown backend '{backend}' (have {sorted(BACKENDS)})") from None


@dataclass
class TrainingPair:
    input: ICNInput
    target: np.ndarray  # (H, W, 3) uint8, background outside the silhouette
    metadata: dict


@dataclass
class SynthesisResult:
    image: np.ndarray
    icn_input: ICNInput
    patch_set: PatchSet
    visibility_src: dict[str, float]
    visibility_dst: dict[str, float]
    timings_ms: dict[str, float] = field(default_factory=dict)


def _as_viewpoint(view) -> Viewpoint:
    if isinstance(view, Viewpoint):
        return view
    if isinstance(view, SphericalPose):
        return viewpoint_from_spherical(view)
    raise TypeError(f"expected Viewpoint or SphericalPose, got {type(view)!r}")


def _pose_json(view) -> dict:
    if isinstance(view, SphericalPose):
        return {"azimuth_deg": view.azimuth_deg,
                "elevation_deg": view.elevation_deg,
                "radius": view.radius}
    return {"matrix": [float(x) for x in _as_viewpoint(view).matrix().ravel()]}


def derive_seed(seed: int, sample_id: str) -> int:
    """Stable per-sample seed from a global seed (platform independent)."""
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# Derived data that is a pure function of immutable inputs is memoized on
# those inputs (samples, CADs, and specs are treated as immutable once
# built). Plane-sample grids are view independent; source-view buffers and
# patch extraction depend only on the sample's own annotation.
_PLANE_SAMPLE_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_EXTRACT_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_SOURCE_VIEW_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _cad_plane_samples(cad: CadModel, spec: PatchSpec):
    per_cad = _PLANE_SAMPLE_CACHE.setdefault(cad, {})
    key = id(spec)
    if key not in per_cad:
        per_cad[key] = patch_plane_samples(cad.keypoints3d, spec)
    return per_cad[key]


def _clone_patch_set(ps: PatchSet) -> PatchSet:
    return PatchSet(image_size=ps.image_size,
                    patches={n: replace(p) for n, p in ps.patches.items()},
                    keypoints_src=ps.keypoints_src,
                    keypoints_dst=ps.keypoints_dst,
                    source_image=ps.source_image)


def _extract_cached(sample: AnnotatedSample, spec: PatchSpec) -> PatchSet:
    per_sample = _EXTRACT_CACHE.setdefault(sample, {})
    key = id(spec)
    if key not in per_sample:
        per_sample[key] = extract_patches(sample.keypoints_2d, spec,
                                          sample.image.shape[:2],
                                          image=sample.image)
    return _clone_patch_set(per_sample[key])


def _source_view_state(sample: AnnotatedSample, cad: CadModel, spec: PatchSpec,
                       k: Intrinsics, rel_tol: float):
    """(source Viewpoint, source RenderBuffers, source visibility fractions)."""
    per_sample = _SOURCE_VIEW_CACHE.setdefault(sample, {})
    key = (id(cad), id(spec), rel_tol)
    if key not in per_sample:
        src_view = _as_viewpoint(sample.view)
        buffers = rasterize(cad.mesh, src_view, k, sample.image.shape[:2])
        vis = patch_visibility(cad.mesh, cad.keypoints3d, spec, buffers,
                               src_view, k, rel_tol=rel_tol,
                               plane_samples=_cad_plane_samples(cad, spec))
        per_sample[key] = (src_view, buffers, vis)
    return per_sample[key]


def emit_training_pair(sample: AnnotatedSample, cad: CadModel, spec: PatchSpec,
                       seed: int, sampler: ViewpointSampler,
                       visibility_threshold: float = 0.5,
                       rel_tol: float = 0.01,
                       background=BACKGROUND) -> TrainingPair:
    """Build one self-supervised pair: dewarped patches in, masked source out.

    A fresh generator seeded with ``seed`` drives the intermediate-viewpoint
    draw, so identical arguments give byte-identical pairs. Patches occluded
    at either the source or the intermediate viewpoint are zeroed (the
    viewpoint-driven dropout). The 2.5D sketch is rendered at the source
    viewpoint; the target is the source image masked to the rendered
    silhouette.
    """
    size = sample.image.shape[:2]
    k = Intrinsics.for_image(size)
    rng = np.random.default_rng(seed)
    mid_pose = sampler.draw(rng)
    mid_view = viewpoint_from_spherical(mid_pose)

    planes = _cad_plane_samples(cad, spec)
    _, buffers_src, vis_src = _source_view_state(sample, cad, spec, k, rel_tol)
    buffers_mid = rasterize(cad.mesh, mid_view, k, size)
    vis_mid = patch_visibility(cad.mesh, cad.keypoints3d, spec, buffers_mid,
                               mid_view, k, rel_tol=rel_tol, plane_samples=planes)
    survives = {name: vis_src[name] >= visibility_threshold
                and vis_mid[name] >= visibility_threshold
                for name in spec.patches}

    kps_mid = project_points(cad.keypoints3d, mid_view, k, image_size=size)
    patch_set = dewarp_roundtrip(sample.image, sample.keypoints_2d, kps_mid,
                                 spec, survives, image_size=size)
    sketch = render_sketch(buffers_src)
    dropped = patch_set.dropped_names()
    if len(dropped) == len(spec.patches) and not sketch.silhouette.any():
        raise DegenerateSampleError(
            f"sample {sample.id}: every patch dropped and the silhouette is empty")

    prior = appearance_prior(sample.image)
    icn = assemble_input(patch_set, sketch, prior)
    target = sample.image.copy()
    target[~sketch.silhouette] = np.asarray(background, dtype=np.uint8)
    metadata = {
        "sample_id": sample.id,
        "src_view": _pose_json(sample.view),
        "mid_view": _pose_json(mid_pose),
        "dropped_patches": dropped,
        "seed": seed,
        "color_space": "rgb",
    }
    return TrainingPair(input=icn, target=target, metadata=metadata)


def synthesize_view(sample: AnnotatedSample, target_view, cad: CadModel,
                    spec: PatchSpec, backend="baseline",
                    symmetry: bool = True,
                    visibility_threshold: float = 0.5,
                    rel_tol: float = 0.01,
                    background=BACKGROUND) -> SynthesisResult:
    """Render the sample from an arbitrary viewpoint (optionally a different CAD).

    Projects the CAD keypoints into the target view, warps the source-visible
    patches, optionally fills occluded ones from their mirror partners,
    renders the target-view sketch, and hands everything to the backend.
    Passing a different ``cad`` performs shape transfer: the sketch and
    silhouette change while patch pixels still come from the sample's image.
    """
    size = sample.image.shape[:2]
    k = Intrinsics.for_image(size)
    complete = get_backend(backend)
    timings: dict[str, float] = {}

    tic = time.perf_counter()
    planes = _cad_plane_samples(cad, spec)
    dst_view = _as_viewpoint(target_view)
    _, _, vis_src = _source_view_state(sample, cad, spec, k, rel_tol)
    timings["visibility_src"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    buffers_dst = rasterize(cad.mesh, dst_view, k, size)
    vis_dst = patch_visibility(cad.mesh, cad.keypoints3d, spec, buffers_dst,
                               dst_view, k, rel_tol=rel_tol, plane_samples=planes)
    sketch = render_sketch(buffers_dst)
    timings["sketch"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    kps_dst = project_points(cad.keypoints3d, dst_view, k, image_size=size)
    patches = _extract_cached(sample, spec)
    patches.set_visibility(vis_src, visibility_threshold)
    warped = warp_to_view(patches, sample.keypoints_2d, kps_dst, spec)
    timings["warp"] = (time.perf_counter() - tic) * 1e3

    if symmetry:
        tic = time.perf_counter()
        vsrc = {n: vis_src[n] >= visibility_threshold for n in spec.patches}
        vdst = {n: vis_dst[n] >= visibility_threshold for n in spec.patches}
        warped = symmetry_transfer(warped, vsrc, vdst, spec)
        timings["symmetry"] = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    prior = appearance_prior(sample.image)
    icn = assemble_input(warped, sketch, prior)
    image = complete(icn)
    timings["complete"] = (time.perf_counter() - tic) * 1e3
    timings["total"] = sum(timings.values())
    return SynthesisResult(image=image, icn_input=icn, patch_set=warped,
                           visibility_src=vis_src, visibility_dst=vis_dst,
                           timings_ms=timings)


# ---------------------------------------------------------------------------
# Training-pair serialization


def _rgba_to_planes(rgba: np.ndarray, lab: bool) -> np.ndarray:
    if not lab:
        return rgba
    out = rgba.copy()
    out[..., :3] = lab_to_bytes(rgb_to_lab(rgba[..., :3]))
    return out


def save_training_pair(pair: TrainingPair, out_dir, lab: bool = False) -> Path:
    """Write the on-disk layout:

    patches.png (RGBA) / sketch.png / prior.png / target.png / mask.png /
    manifest.json. With ``lab`` the appearance planes (patches RGB, prior,
    target) are stored as 8-bit LAB; the sketch and mask encode geometry and
    are unaffected.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    icn = pair.input
    save_image(_rgba_to_planes(icn.patches_composite, lab), out_dir / "patches.png")
    save_image(icn.sketch.pixels, out_dir / "sketch.png")
    prior = icn.prior.pixels if not lab else lab_to_bytes(rgb_to_lab(icn.prior.pixels))
    save_image(prior, out_dir / "prior.png")
    target = pair.target if not lab else lab_to_bytes(rgb_to_lab(pair.target))
    save_image(target, out_dir / "target.png")
    save_image((icn.silhouette * np.uint8(255)), out_dir / "mask.png")
    metadata = dict(pair.metadata, color_space="lab" if lab else "rgb")
    (out_dir / "manifest.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True), encoding="utf-8")
    return out_dir


def default_sampler(samples, seed: int = 0) -> ViewpointSampler:
    """Empirical sampler over the dataset's annotated poses; uniform fallback."""
    poses = [s.view for s in samples if isinstance(s.view, SphericalPose)]
    if poses:
        return ViewpointSampler(mode="empirical", seed=seed, poses=poses)
    return ViewpointSampler(mode="uniform-hemisphere", seed=seed)


def emit_pairs(catalog, samples, spec: PatchSpec, out_root, seed: int,
               sampler: ViewpointSampler | None = None,
               limit: int | None = None, lab: bool = False,
               visibility_threshold: float = 0.5) -> dict:
    """Emit one training pair per sample into ``out_root``; returns a summary.

    Per-sample seeds derive from (seed, sample id), so trees are reproducible
    regardless of iteration order. Per-sample failures are logged and
    skipped, never abort the batch.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    if sampler is None:
        sampler = default_sampler(samples, seed=seed)
    chosen = samples[:limit] if limit is not None else samples
    dropout_counts: dict[str, int] = {name: 0 for name in spec.patches}
    emitted, skipped = [], []
    for sample in chosen:
        try:
            cad = catalog[sample.cad_id]
            pair = emit_training_pair(sample, cad, spec,
                                      seed=derive_seed(seed, sample.id),
                                      sampler=sampler,
                                      visibility_threshold=visibility_threshold)
            save_training_pair(pair, out_root / sample.id, lab=lab)
            for name in pair.metadata["dropped_patches"]:
                dropout_counts[name] += 1
            emitted.append(sample.id)
        except PatchviewError as exc:
            logger.warning("skipping sample %s: %s", sample.id, exc)
            skipped.append({"id": sample.id, "reason": str(exc)})
    summary = {
        "seed": seed,
        "emitted": emitted,
        "skipped": skipped,
        "dropout_counts": dropout_counts,
        "color_space": "lab" if lab else "rgb",
    }
    (out_root / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return summary
