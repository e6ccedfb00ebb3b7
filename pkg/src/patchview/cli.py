"""Command-line entry points: render, emit-pairs, fid, serve, make-toy-data.

Failures print a machine-readable JSON object on stderr
(``{"error": kind, "message": ...}``) and exit nonzero: 2 for not-found
kinds, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DatasetError, PatchviewError
from .metrics import frechet_distance, gaussian_stats, read_features
from .service import RenderContext, RenderRequest

_NOT_FOUND_KINDS = {"sample_not_found", "cad_resolution", "manifest"}


def _fail(exc: Exception) -> int:
    kind = getattr(exc, "kind", "error")
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return 2 if kind in _NOT_FOUND_KINDS else 1


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset root (manifest.json inside)")
    p.add_argument("--threshold-visibility", type=float, default=0.5,
                   help="visibility fraction below which a patch is dropped")


def cmd_render(args) -> int:
    from .dataset import save_image

    ctx = RenderContext(args.data, visibility_threshold=args.threshold_visibility)
    req = RenderRequest(sample_id=args.sample, cad_id=args.cad,
                        azimuth_deg=args.azimuth, elevation_deg=args.elevation,
                        radius=args.radius, backend=args.backend,
                        output=args.output)
    layers = ctx.render(req)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = ("composite", "sketch", "patches", "prior") if args.output == "all" \
        else (args.output,)
    written = []
    for layer in wanted:
        path = out_dir / f"{layer}.png"
        save_image(layers[layer], path)
        written.append(str(path))
    for stage, ms in layers["_timings_ms"].items():
        print(f"{stage}: {ms:.2f} ms")
    print("wrote " + ", ".join(written))
    return 0


def cmd_emit_pairs(args) -> int:
    from .dataset import load_dataset
    from .pipeline import emit_pairs
    from .warp import PatchSpec, default_patch_spec

    catalog, samples = load_dataset(args.data)
    spec = PatchSpec.from_file(args.patch_spec) if args.patch_spec \
        else default_patch_spec(catalog.class_name)
    summary = emit_pairs(catalog, samples, spec, args.out, seed=args.seed,
                         limit=args.limit, lab=args.lab,
                         visibility_threshold=args.threshold_visibility)
    print(f"emitted {len(summary['emitted'])} pairs "
          f"({len(summary['skipped'])} skipped) into {args.out}")
    print("dropout counts: " + json.dumps(summary["dropout_counts"], sort_keys=True))
    return 0


def cmd_fid(args) -> int:
    a = gaussian_stats(read_features(args.features_a))
    b = gaussian_stats(read_features(args.features_b))
    print(f"{frechet_distance(a, b):.10g}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    host, _, port = args.bind.rpartition(":")
    serve(args.data, host=host or "127.0.0.1", port=int(port),
          visibility_threshold=args.threshold_visibility)
    return 0


def cmd_make_toy_data(args) -> int:
    from .toydata import make_toy_dataset

    root = make_toy_dataset(args.out, n_samples=args.samples,
                            size=(args.size, args.size))
    print(f"toy dataset written to {root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchview",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one sample from a requested viewpoint")
    _add_data_flags(p)
    p.add_argument("--sample", required=True, help="sample id")
    p.add_argument("--cad", type=int, default=None,
                   help="CAD id override (shape transfer); defaults to the sample's")
    p.add_argument("--azimuth", type=float, default=None)
    p.add_argument("--elevation", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--backend", default="baseline")
    p.add_argument("--output", default="composite",
                   choices=("composite", "sketch", "patches", "all"))
    p.add_argument("--out", default=".", help="output directory for PNGs")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("emit-pairs", help="emit self-supervised training pairs")
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--lab", action="store_true",
                   help="store appearance planes in 8-bit LAB")
    p.add_argument("--patch-spec", default=None,
                   help="JSON patch-spec file overriding the class default")
    p.set_defaults(func=cmd_emit_pairs)

    p = sub.add_parser("fid", help="Fréchet distance between two feature files")
    p.add_argument("features_a", help="CSV or binary feature matrix")
    p.add_argument("features_b")
    p.set_defaults(func=cmd_fid)

    p = sub.add_parser("serve", help="run the HTTP render service")
    _add_data_flags(p)
    p.add_argument("--bind", default="127.0.0.1:8600")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-toy-data", help="write the bundled toy vehicle dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=6)
    p.add_argument("--size", type=int, default=128)
    p.set_defaults(func=cmd_make_toy_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PatchviewError, DatasetError) as exc:
        return _fail(exc)
    except FileNotFoundError as exc:
        print(json.dumps({"error": "file_not_found", "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
