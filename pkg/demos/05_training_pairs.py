"""Self-supervised training-pair emission.

Each pair feeds a completion model: dewarped patches (warped to a random
intermediate viewpoint and back, with occlusion dropout), the source-view
normal sketch, the small center appearance prior, and the silhouette-masked
source photo as the target. The whole tree is a pure function of the seed.
"""

import json
from pathlib import Path

from patchview.cli import main as cli_main

ROOT = Path(__file__).parent / "out" / "toy_vehicle"
OUT = Path(__file__).parent / "out" / "pairs_seed7"


def main():
    code = cli_main(["emit-pairs", "--data", str(ROOT), "--out", str(OUT),
                     "--seed", "7"])
    assert code == 0
    summary = json.loads((OUT / "summary.json").read_text())
    print(f"\nemitted {len(summary['emitted'])} pairs under {OUT}")
    print("per-patch dropout counts:", summary["dropout_counts"])
    one = OUT / summary["emitted"][0]
    print(f"\nlayout of {one.name}/:")
    for path in sorted(one.iterdir()):
        print(f"  {path.name:15s} {path.stat().st_size:6d} bytes")
    meta = json.loads((one / "manifest.json").read_text())
    print("\nmanifest:", json.dumps(meta, indent=2)[:400], "...")


if __name__ == "__main__":
    main()
