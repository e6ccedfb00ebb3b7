"""Generate the bundled toy vehicle dataset every other demo builds on.

Creates demos/out/toy_vehicle/ with two hand-built low-poly CADs (a fastback
sedan and a van), six rendered photos with a position-keyed procedural
texture, exact 2D keypoint annotations, and the manifest.json index.
"""

from pathlib import Path

from patchview.dataset import load_dataset
from patchview.toydata import make_toy_dataset

OUT = Path(__file__).parent / "out"
ROOT = OUT / "toy_vehicle"


def main():
    make_toy_dataset(ROOT)
    catalog, samples = load_dataset(ROOT)
    print(f"dataset at {ROOT}")
    print(f"  {len(catalog)} CADs: "
          + ", ".join(f"{m.id}={m.name} ({m.mesh.face_count} faces)"
                      for m in catalog.models.values()))
    for s in samples:
        v = s.view
        print(f"  sample {s.id}: cad {s.cad_id}, az {v.azimuth_deg:.0f}, "
              f"el {v.elevation_deg:.0f}, r {v.radius:.0f}")


if __name__ == "__main__":
    main()
