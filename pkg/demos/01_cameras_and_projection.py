"""Orbit cameras and pinhole projection.

Walks a camera around the origin with spherical coordinates, projects the
sedan's 3D keypoints, and shows the fact the whole warping approach rests
on: projections of coplanar points under two cameras are related by one
homography, exactly.
"""

import numpy as np

from patchview.geometry import (Intrinsics, SphericalPose, project_points,
                                viewpoint_from_spherical)
from patchview.toydata import TOY_RADIUS, make_sedan
from patchview.warp import apply_homography, estimate_homography


def main():
    mesh, kps3d = make_sedan()
    k = Intrinsics.for_image((128, 128))

    print("camera centers on the orbit (radius 120, elevation 10):")
    for az in (0, 90, 180, 270):
        view = viewpoint_from_spherical(SphericalPose(az, 10, TOY_RADIUS))
        c = view.camera_center()
        print(f"  az {az:3d} -> ({c[0]:7.2f}, {c[1]:7.2f}, {c[2]:6.2f})")

    view = viewpoint_from_spherical(SphericalPose(30, 15, TOY_RADIUS))
    kps2d = project_points(kps3d, view, k, image_size=(128, 128))
    print("\nprojected keypoints at az=30, el=15 (normalized):")
    for name in sorted(kps2d)[:4]:
        u, v = kps2d[name]
        print(f"  {name:28s} ({u:.3f}, {v:.3f})")
    print("  ...")

    # the planarity license: the four left-side wheel/light/trunk keypoints
    # are coplanar in 3D, so one homography relates their images exactly
    names = ["left_front_wheel", "left_back_wheel", "left_front_light",
             "left_back_trunk", "upper_left_windshield", "upper_left_rearwindow"]
    va = viewpoint_from_spherical(SphericalPose(40, 10, TOY_RADIUS))
    vb = viewpoint_from_spherical(SphericalPose(110, 35, TOY_RADIUS))
    pa = project_points({n: kps3d[n] for n in names}, va, k)
    pb = project_points({n: kps3d[n] for n in names}, vb, k)
    src = np.stack([pa[n] for n in names])
    dst = np.stack([pb[n] for n in names])
    h = estimate_homography(src[:4], dst[:4])
    err = np.linalg.norm(apply_homography(h, src) - dst, axis=1).max()
    print(f"\nhomography fitted on 4 coplanar points transfers all {len(names)}"
          f" with max error {err:.2e} px")


if __name__ == "__main__":
    main()
