"""patchview: semi-parametric novel-view synthesis for pictured rigid objects.

The package decomposes an object photo into keypoint-bounded planar patches,
warps them to arbitrary viewpoints through per-patch homographies with
visibility and mirror-symmetry handling, renders 2.5D normal sketches from
CAD meshes with a software rasterizer, and emits both composite renders and
self-supervised training pairs for image-completion models.
"""

from . import errors
from .dataset import (AnnotatedSample, CadCatalog, CadModel, ViewpointSampler,
                      lab_to_rgb, load_dataset, perturb_keypoints, rgb_to_lab,
                      sample_viewpoint)
from .geometry import (Intrinsics, SphericalPose, Viewpoint, project_points,
                       viewpoint_from_spherical)
from .metrics import GaussianStats, frechet_distance, gaussian_stats, psnr
from .pipeline import (ICNInput, PriorCrop, SynthesisResult, TrainingPair,
                       appearance_prior, assemble_input, baseline_complete,
                       emit_pairs, emit_training_pair, save_training_pair,
                       synthesize_view)
from .raster import (Mesh, RenderBuffers, SketchImage, load_obj,
                     patch_visibility, rasterize, render_sketch)
from .warp import (Patch, PatchSet, PatchSpec, convex_hull, default_patch_spec,
                   dewarp_roundtrip, estimate_homography, extract_patches,
                   symmetry_transfer, warp_patch, warp_to_view)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "AnnotatedSample", "CadCatalog", "CadModel", "ViewpointSampler",
    "lab_to_rgb", "load_dataset", "perturb_keypoints", "rgb_to_lab",
    "sample_viewpoint",
    "Intrinsics", "SphericalPose", "Viewpoint", "project_points",
    "viewpoint_from_spherical",
    "GaussianStats", "frechet_distance", "gaussian_stats", "psnr",
    "ICNInput", "PriorCrop", "SynthesisResult", "TrainingPair",
    "appearance_prior", "assemble_input", "baseline_complete", "emit_pairs",
    "emit_training_pair", "save_training_pair", "synthesize_view",
    "Mesh", "RenderBuffers", "SketchImage", "load_obj", "patch_visibility",
    "rasterize", "render_sketch",
    "Patch", "PatchSet", "PatchSpec", "convex_hull", "default_patch_spec",
    "dewarp_roundtrip", "estimate_homography", "extract_patches",
    "symmetry_transfer", "warp_patch", "warp_to_view",
    "__version__",
]
