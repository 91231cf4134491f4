"""priorgen: batch-upscale a directory of LR images to pseudo-HR PNGs."""

from __future__ import annotations

import argparse
import sys

from .job import PriorJob, generate_all
from .models import MODELS, ModelError


def build_parser():
    p = argparse.ArgumentParser(prog="priorgen", description=__doc__)
    p.add_argument("input_dir", help="directory of LR images")
    p.add_argument("output_dir", help="destination for <stem>_x<factor>.png files")
    p.add_argument("--factor", type=int, required=True, help="upscale factor")
    p.add_argument("--model", default="bicubic", dest="model_id",
                   help=f"model id (available: {', '.join(sorted(MODELS))})")
    p.add_argument("--force", action="store_true",
                   help="regenerate outputs that already exist")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = PriorJob(args.input_dir, args.output_dir, args.factor,
                       args.model_id, args.force)
        report = generate_all(job)
    except (ModelError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for src, dst in sorted(report.manifest.items()):
        print(f"{src} -> {dst}")
    print(f"{report.written} written, {report.skipped} skipped, "
          f"{len(report.errors)} failed (model {args.model_id!r}, "
          f"x{args.factor})")
    for src, msg in report.errors:
        print(f"failed: {src}: {msg}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
