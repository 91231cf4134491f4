"""Command-line entry point.

Subcommands: generate, train, ablate, sweep, eval, render. A YAML config
file supplies defaults; CLI flags override file keys; the fully resolved
config is echoed into every output directory. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, fields

import numpy as np
import yaml

from . import harness
from .errors import DataError, NumericalError, UsageError
from .image_ops import read_png, write_png
from .objective import ModulationConfig, ObjectiveConfig
from .prior import PriorProvider
from .renderer import render
from .scene import load_cameras, load_scene, save_cameras, save_scene
from .trainer import TrainConfig, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dataclass_from(cls, data: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path=None, overrides=None):
    """Resolve {objective, train, dataset} config from file plus overrides."""
    data = {"objective": {}, "train": {}, "dataset": {}}
    if path:
        if not os.path.exists(path):
            raise DataError(f"config file not found: {path}")
        with open(path) as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise DataError(f"{path}: config root must be a mapping")
        for key in data:
            section = loaded.get(key, {})
            if not isinstance(section, dict):
                raise DataError(f"{path}: section {key!r} must be a mapping")
            data[key].update(section)
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise UsageError(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        if section not in data:
            raise UsageError(f"unknown config section {section!r}")
        data[section][key] = yaml.safe_load(str(value))
    mod = data["objective"].pop("modulation", {})
    objective = _dataclass_from(
        ObjectiveConfig,
        {**data["objective"], "modulation": _dataclass_from(ModulationConfig, mod)})
    train_cfg = _dataclass_from(TrainConfig, data["train"])
    dataset_cfg = {
        "num_views": 16, "hr_resolution": 128, "factor": 4, "seed": 0,
        "gaussian_count": 2000, "init_count": 2000, "background": [0.0, 0.0, 0.0],
        "antialias": True,
    }
    unknown = set(data["dataset"]) - set(dataset_cfg)
    if unknown:
        raise UsageError(f"unknown dataset keys: {sorted(unknown)}")
    dataset_cfg.update(data["dataset"])
    return objective, train_cfg, dataset_cfg


def echo_config(out_dir, objective, train_cfg, dataset_cfg, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    resolved = {"objective": asdict(objective), "train": asdict(train_cfg),
                "dataset": dataset_cfg}
    if extra:
        resolved.update(extra)
    with open(os.path.join(out_dir, "resolved_config.yaml"), "w") as f:
        yaml.safe_dump(resolved, f, sort_keys=True)


def _dataset_dir_write(ds, gt, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    save_cameras(ds.cameras, os.path.join(out_dir, "cameras.txt"))
    save_scene(gt, os.path.join(out_dir, "ground_truth.scene"))
    hr_dir = os.path.join(out_dir, "hr")
    lr_dir = os.path.join(out_dir, "lr")
    os.makedirs(hr_dir, exist_ok=True)
    os.makedirs(lr_dir, exist_ok=True)
    for v in range(ds.num_views):
        write_png(os.path.join(hr_dir, f"{v:05d}.png"), ds.hr_images[v], bit_depth=16)
        write_png(os.path.join(lr_dir, f"{v:05d}.png"), ds.lr_images[v], bit_depth=16)
    with open(os.path.join(out_dir, "meta.yaml"), "w") as f:
        yaml.safe_dump(ds.metadata, f, sort_keys=True)


def load_dataset_dir(path) -> harness.Dataset:
    meta_path = os.path.join(path, "meta.yaml")
    if not os.path.exists(meta_path):
        raise DataError(f"{path}: not a dataset directory (missing meta.yaml)")
    with open(meta_path) as f:
        meta = yaml.safe_load(f)
    cameras = load_cameras(os.path.join(path, "cameras.txt"))
    hr, lr = [], []
    for v in range(len(cameras)):
        hr_path = os.path.join(path, "hr", f"{v:05d}.png")
        lr_path = os.path.join(path, "lr", f"{v:05d}.png")
        if not os.path.exists(lr_path):
            raise DataError(f"{path}: missing LR image for view {v}")
        hr.append(read_png(hr_path) if os.path.exists(hr_path) else None)
        lr.append(read_png(lr_path))
    factor = int(meta["factor"])
    for v, (h_img, l_img) in enumerate(zip(hr, lr)):
        if h_img is not None and h_img.shape[0] != l_img.shape[0] * factor:
            raise DataError(f"view {v}: HR/LR dimensions inconsistent with "
                            f"factor {factor}")
    n = len(cameras)
    return harness.Dataset(
        cameras=cameras, hr_images=hr, lr_images=lr,
        train_indices=[v for v in range(n) if v % 8 != 0],
        test_indices=[v for v in range(n) if v % 8 == 0],
        factor=factor, antialias=bool(meta.get("antialias", True)), metadata=meta)


def _make_provider(args, ds) -> PriorProvider:
    if args.prior == "oracle":
        source = {v: ds.hr_images[v] for v in range(ds.num_views)
                  if ds.hr_images[v] is not None}
        return PriorProvider("oracle", ds.factor, source)
    if args.prior == "file":
        if not args.prior_dir:
            raise UsageError("--prior-dir is required with --prior file")
        return PriorProvider("file", ds.factor, args.prior_dir)
    return PriorProvider("bicubic", ds.factor)


def _add_common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key, e.g. --set train.iterations=500")
    p.add_argument("--out", required=True, help="output directory")


def _add_train_common(p):
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--prior", choices=["bicubic", "oracle", "file"], default="oracle")
    p.add_argument("--prior-dir", help="pseudo-HR directory for --prior file")
    p.add_argument("--init-scene", help="warm-start scene file instead of random init")


def build_parser():
    parser = _Parser(prog="splatsr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a multi-view dataset")
    _add_common(p)

    p = sub.add_parser("train", help="single training run")
    _add_common(p)
    _add_train_common(p)
    p.add_argument("--baseline", action="store_true",
                   help="LR-supervised baseline arm (render at LR scale)")

    p = sub.add_parser("ablate", help="baseline / prior-only / full comparison")
    _add_common(p)
    _add_train_common(p)

    p = sub.add_parser("sweep", help="PSNR vs lambda_e sweep")
    _add_common(p)
    _add_train_common(p)
    p.add_argument("--lambdas", default="0.2,0.35,0.5,0.65,0.8",
                   help="comma-separated lambda_e values")

    p = sub.add_parser("eval", help="evaluate a scene checkpoint on test views")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--scene", required=True, help="scene checkpoint file")

    p = sub.add_parser("render", help="dump rendered views of a scene")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    return parser


def _parse_overrides(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key] = value
    return out


def _initial_scene(args, ds, dataset_cfg):
    if getattr(args, "init_scene", None):
        return load_scene(args.init_scene)
    return harness.default_initial_scene(ds, int(dataset_cfg["init_count"]),
                                         int(dataset_cfg["seed"]) + 100)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    objective, train_cfg, dataset_cfg = load_config(
        args.config, _parse_overrides(args.set))
    os.makedirs(args.out, exist_ok=True)

    if args.command == "generate":
        ds, gt = harness.generate_synthetic_dataset(
            num_views=int(dataset_cfg["num_views"]),
            hr_resolution=int(dataset_cfg["hr_resolution"]),
            factor=int(dataset_cfg["factor"]), seed=int(dataset_cfg["seed"]),
            gaussian_count=int(dataset_cfg["gaussian_count"]),
            background=tuple(dataset_cfg["background"]),
            antialias=bool(dataset_cfg["antialias"]))
        _dataset_dir_write(ds, gt, args.out)
        echo_config(args.out, objective, train_cfg, dataset_cfg)
        print(f"wrote dataset with {ds.num_views} views to {args.out}")
        return 0

    ds = load_dataset_dir(args.dataset)

    if args.command == "eval":
        scene = load_scene(args.scene)
        report = harness.evaluate(scene, ds, "test")
        harness.write_report_csv([report], os.path.join(args.out, "eval.csv"))
        echo_config(args.out, objective, train_cfg, dataset_cfg)
        print(f"test PSNR {report.mean_psnr:.2f} dB, SSIM {report.mean_ssim:.4f}"
              + harness.report_sentinel_note(report))
        return 0

    if args.command == "render":
        scene = load_scene(args.scene)
        for v in range(ds.num_views):
            img = render(scene, ds.cameras[v], args.scale)
            write_png(os.path.join(args.out, f"{v:05d}.png"), img)
        print(f"rendered {ds.num_views} views to {args.out}")
        return 0

    provider = _make_provider(args, ds)
    init = _initial_scene(args, ds, dataset_cfg)

    if args.command == "train":
        rows = []
        scene = train(ds, provider, objective, train_cfg, init,
                      baseline=args.baseline, log_rows=rows)
        save_scene(scene, os.path.join(args.out, "final.scene"))
        harness.write_training_log(rows, os.path.join(args.out, "train.csv"))
        if all(img is not None for img in ds.hr_images):
            report = harness.evaluate(scene, ds, "test")
            harness.write_report_csv([report], os.path.join(args.out, "eval.csv"))
            print(f"test PSNR {report.mean_psnr:.2f} dB, SSIM {report.mean_ssim:.4f}")
        echo_config(args.out, objective, train_cfg, dataset_cfg,
                    {"prior": args.prior, "baseline": bool(args.baseline)})
        return 0

    if args.command == "ablate":
        reports = harness.run_ablation(ds, provider, objective, train_cfg, init,
                                       log_dir=args.out)
        harness.write_report_csv(reports, os.path.join(args.out, "ablation.csv"))
        echo_config(args.out, objective, train_cfg, dataset_cfg, {"prior": args.prior})
        for r in reports:
            print(f"{r.arm:<10} PSNR {r.mean_psnr:6.2f} dB  SSIM {r.mean_ssim:.4f}"
                  f"  ({r.runtime_seconds:.0f}s)")
        return 0

    if args.command == "sweep":
        try:
            lambdas = [float(v) for v in args.lambdas.split(",") if v.strip()]
        except ValueError as e:
            raise UsageError(f"bad --lambdas: {e}") from e
        rows = harness.sweep_lambda(ds, provider, objective, train_cfg, init, lambdas)
        harness.write_sweep_outputs(rows, args.out)
        echo_config(args.out, objective, train_cfg, dataset_cfg, {"prior": args.prior})
        for lam, value in rows:
            print(f"lambda_e={lam:.2f}  PSNR {value:6.2f} dB")
        return 0

    raise UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    try:
        return run(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
