"""Patch extraction, homography warping, and the dewarping round trip.

Requires demos/out/toy_vehicle (run 00_toy_dataset.py first). Saves side-by-
side images of the source crops, the patches warped to a rotated view, and
the dewarped set with its characteristic resampling softness.
"""

from pathlib import Path

import numpy as np

from patchview.dataset import load_dataset, save_image
from patchview.geometry import Intrinsics, SphericalPose, project_points, \
    viewpoint_from_spherical
from patchview.metrics import psnr
from patchview.raster import patch_visibility, rasterize
from patchview.toydata import TOY_RADIUS
from patchview.warp import default_patch_spec, dewarp_roundtrip, \
    extract_patches, warp_to_view

ROOT = Path(__file__).parent / "out" / "toy_vehicle"
OUT = Path(__file__).parent / "out"


def over_white(rgba):
    out = np.full((*rgba.shape[:2], 3), 255, dtype=np.uint8)
    mask = rgba[..., 3] > 0
    out[mask] = rgba[mask][:, :3]
    return out


def main():
    catalog, samples = load_dataset(ROOT)
    sample = samples[0]
    cad = catalog[sample.cad_id]
    spec = default_patch_spec("car")
    size = sample.image.shape[:2]
    k = Intrinsics.for_image(size)

    crops = extract_patches(sample.keypoints_2d, spec, size, image=sample.image)
    src_view = viewpoint_from_spherical(sample.view)
    buffers = rasterize(cad.mesh, src_view, k, size)
    vis = patch_visibility(cad.mesh, cad.keypoints3d, spec, buffers, src_view, k)
    crops.set_visibility(vis, 0.5)
    print("source visibility fractions:")
    for name, f in sorted(vis.items()):
        print(f"  {name:11s} {f:4.2f} {'(dropped)' if f < 0.5 else ''}")

    target = SphericalPose(sample.view.azimuth_deg + 60, 25, TOY_RADIUS)
    kps_dst = project_points(cad.keypoints3d,
                             viewpoint_from_spherical(target), k,
                             image_size=size)
    warped = warp_to_view(crops, sample.keypoints_2d, kps_dst, spec)

    mid = SphericalPose(sample.view.azimuth_deg + 140, 40, TOY_RADIUS)
    kps_mid = project_points(cad.keypoints3d,
                             viewpoint_from_spherical(mid), k, image_size=size)
    survive = {n: vis[n] >= 0.5 for n in spec.patches}
    dewarped = dewarp_roundtrip(sample.image, sample.keypoints_2d, kps_mid,
                                spec, survive)

    montage = np.concatenate([sample.image,
                              over_white(crops.composite()),
                              over_white(warped.composite()),
                              over_white(dewarped.composite())], axis=1)
    save_image(montage, OUT / "warping_montage.png")
    print(f"\nwrote {OUT / 'warping_montage.png'}")
    print("  panels: input photo | source crops | warped +60 deg | dewarped")

    kept = [n for n, p in dewarped.patches.items() if p.content is not None]
    for name in kept:
        alpha = dewarped[name].content[..., 3] > 0
        value = psnr(dewarped[name].content[alpha][:, :3], sample.image[alpha])
        print(f"  dewarped {name}: interior PSNR {value:.1f} dB vs source")


if __name__ == "__main__":
    main()
