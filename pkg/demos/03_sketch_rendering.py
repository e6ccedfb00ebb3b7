"""Software rasterization and the 2.5D normal sketch.

Renders the sedan's depth, face-id, and encoded-normal buffers across an
azimuth sweep and saves a sketch filmstrip. The byte encoding maps a
camera-facing surface to (128, 128, 255), the familiar normal-map blue.
"""

from pathlib import Path

import numpy as np

from patchview.dataset import save_image
from patchview.geometry import Intrinsics, SphericalPose, viewpoint_from_spherical
from patchview.raster import rasterize, render_sketch
from patchview.toydata import TOY_RADIUS, make_sedan

OUT = Path(__file__).parent / "out"


def main():
    mesh, _ = make_sedan()
    k = Intrinsics.for_image((128, 128))
    frames = []
    for az in range(0, 360, 45):
        view = viewpoint_from_spherical(SphericalPose(az, 15, TOY_RADIUS))
        buffers = rasterize(mesh, view, k, (128, 128))
        sketch = render_sketch(buffers)
        frames.append(sketch.pixels)
        depth = buffers.depth[buffers.silhouette]
        print(f"az {az:3d}: {buffers.silhouette.sum():5d} px, "
              f"depth {depth.min():.1f}..{depth.max():.1f}, "
              f"{len(np.unique(buffers.face_id)) - 1} visible faces")
    save_image(np.concatenate(frames, axis=1), OUT / "sketch_filmstrip.png")
    print(f"\nwrote {OUT / 'sketch_filmstrip.png'}")


if __name__ == "__main__":
    main()
