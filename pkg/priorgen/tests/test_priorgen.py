import json

import cv2
import numpy as np
import pytest

from priorgen import PriorJob, generate_all, get_model
from priorgen.cli import main
from priorgen.models import ModelError


def _write_lr(path, h=8, w=8, seed=0):
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    assert cv2.imwrite(str(path), img)
    return img


def test_empty_input_dir(tmp_path):
    (tmp_path / "in").mkdir()
    job = PriorJob(tmp_path / "in", tmp_path / "out", factor=4)
    report = generate_all(job)
    assert report.ok and report.written == 0
    assert (tmp_path / "out" / "manifest.json").exists()


def test_dimension_contract(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png", 32, 32)
    job = PriorJob(src, tmp_path / "out", factor=4)
    report = generate_all(job)
    assert report.written == 1
    out = cv2.imread(str(tmp_path / "out" / "00000_x4.png"))
    assert out.shape == (128, 128, 3)


def test_naming_convention_and_manifest(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for i in range(3):
        _write_lr(src / f"{i:05d}.png", seed=i)
    job = PriorJob(src, tmp_path / "out", factor=2)
    report = generate_all(job)
    assert report.written == 3
    with open(tmp_path / "out" / "manifest.json") as f:
        manifest = json.load(f)
    assert manifest["model_id"] == "bicubic"
    assert manifest["files"]["00001.png"] == "00001_x2.png"
    for i in range(3):
        assert (tmp_path / "out" / f"{i:05d}_x2.png").exists()


def test_idempotent_rerun_and_force(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png")
    job = PriorJob(src, tmp_path / "out", factor=2)
    assert generate_all(job).written == 1
    rerun = generate_all(job)
    assert rerun.written == 0 and rerun.skipped == 1
    forced = generate_all(PriorJob(src, tmp_path / "out", 2, force=True))
    assert forced.written == 1


def test_bad_image_reported_not_fatal(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png")
    (src / "00001.png").write_bytes(b"not a png")
    report = generate_all(PriorJob(src, tmp_path / "out", factor=2))
    assert report.written == 1
    assert len(report.errors) == 1 and "00001" in report.errors[0][0]
    assert not report.ok


def test_model_dimension_violation_reported(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png")
    report = generate_all(PriorJob(src, tmp_path / "out", factor=2),
                          model=lambda img, f: img)  # wrong output size
    assert not report.ok
    assert "expected" in report.errors[0][1]


def test_unknown_model_raises():
    with pytest.raises(ModelError):
        get_model("swinir-large")


def test_cli_roundtrip(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png")
    assert main([str(src), str(tmp_path / "out"), "--factor", "4"]) == 0
    out = capsys.readouterr().out
    assert "00000.png -> 00000_x4.png" in out
    assert main([str(src / "missing"), str(tmp_path / "out2"),
                 "--factor", "4"]) == 1
    assert main([str(src), str(tmp_path / "out3"), "--factor", "4",
                 "--model", "nope"]) == 1


def test_cli_reports_partial_failure(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    _write_lr(src / "00000.png")
    (src / "broken.png").write_bytes(b"junk")
    assert main([str(src), str(tmp_path / "out"), "--factor", "2"]) == 1
