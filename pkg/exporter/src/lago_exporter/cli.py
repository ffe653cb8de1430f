"""Command line: export a directory of images to LAGO0001 feature bundles."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lago_exporter.encoders import make_encoder
from lago_exporter.export import ExportJob, export_bundle, find_images, load_class_specs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lago-export", description=__doc__)
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--classes", required=True, help="classes.json with per-class descriptions")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument("--grid", type=int, default=14, help="patch grid side length")
    parser.add_argument("--max-proposals", type=int, default=8)
    parser.add_argument("--encoder", choices=("stub", "clip"), default="stub")
    parser.add_argument("--model", default=None, help="model identifier for the clip encoder")
    parser.add_argument("--dim", type=int, default=32, help="embedding dim for the stub encoder")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        images = find_images(args.images)
        classes = load_class_specs(args.classes)
        job = ExportJob(
            images=images,
            classes=classes,
            out_dir=Path(args.out),
            grid=args.grid,
            max_proposals=args.max_proposals,
        )
        encoder = make_encoder(args.encoder, args.model, args.dim)
        written = export_bundle(job, encoder)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(written)} bundle(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
