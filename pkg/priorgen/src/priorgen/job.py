"""Run an upscaler over a directory of LR images.

Outputs follow the file-prior naming convention ``<stem>_x<factor>.png`` so
downstream trainers can consume them directly. Generation is idempotent:
existing outputs are skipped unless forced. A JSON manifest mapping inputs
to outputs (with the model id for provenance) is written at the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2

from .models import ModelError, get_model

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass
class PriorJob:
    input_dir: Path
    output_dir: Path
    factor: int
    model_id: str = "bicubic"
    force: bool = False

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.output_dir = Path(self.output_dir)
        if self.factor < 1:
            raise ValueError("factor must be >= 1")


@dataclass
class JobReport:
    written: int = 0
    skipped: int = 0
    manifest: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)  # (input path, message) pairs

    @property
    def ok(self) -> bool:
        return not self.errors


def _list_inputs(job: PriorJob):
    if not job.input_dir.is_dir():
        raise FileNotFoundError(f"input dir {job.input_dir} does not exist")
    return sorted(p for p in job.input_dir.iterdir()
                  if p.suffix.lower() in IMAGE_SUFFIXES)


def _process_one(job: PriorJob, model, src: Path, dst: Path):
    image = cv2.imread(str(src), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise ValueError("not a decodable image")
    h, w = image.shape[:2]
    out = model(image, job.factor)
    if out.shape[:2] != (h * job.factor, w * job.factor):
        raise ValueError(
            f"model produced {out.shape[:2]}, expected "
            f"{(h * job.factor, w * job.factor)} ({h}x{w} x{job.factor})")
    if not cv2.imwrite(str(dst), out):
        raise ValueError(f"failed to write {dst}")


def generate_all(job: PriorJob, model=None) -> JobReport:
    """Upscale every image in the input directory; returns a JobReport.

    Per-file failures are collected rather than raised, so one bad image
    does not abort the batch; ``report.ok`` is False if anything failed.
    """
    if model is None:
        model = get_model(job.model_id)
    inputs = _list_inputs(job)
    job.output_dir.mkdir(parents=True, exist_ok=True)
    report = JobReport()
    for src in inputs:
        dst = job.output_dir / f"{src.stem}_x{job.factor}.png"
        if dst.exists() and not job.force:
            report.skipped += 1
            report.manifest[src.name] = dst.name
            continue
        try:
            _process_one(job, model, src, dst)
        except (ValueError, ModelError) as e:
            report.errors.append((str(src), str(e)))
            continue
        report.written += 1
        report.manifest[src.name] = dst.name
    manifest = {
        "model_id": job.model_id,
        "factor": job.factor,
        "written": report.written,
        "skipped": report.skipped,
        "files": report.manifest,
        "errors": [{"input": p, "error": m} for p, m in report.errors],
    }
    with open(job.output_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return report
