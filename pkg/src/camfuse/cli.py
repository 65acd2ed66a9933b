"""Command-line surface: explain single images, benchmark methods.

Exit codes: 0 success, 1 bad arguments, 2 I/O failures, 3 model or shape
errors.  All inputs are located, loaded, and validated before the first
output file is written.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .fusion import ExplanationConfig, explain
from .gradcam import GradCamConfig
from .lrp import LrpConfig
from .metrics import METHODS, BenchmarkItem, MetricConfig, benchmark
from .model import Model, ModelFormatError, forward, load_model
from .containers import save_tensor
from .render import load_image, load_mask, render_heatmap
from .tensor import ShapeError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_MODEL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; this surface reserves 2 for
    # I/O, so parser errors are rethrown and mapped to exit 1.
    def error(self, message):
        raise _UsageError(message)


@dataclass(frozen=True)
class RunManifest:
    """Validated run inputs; building one proves the files exist and parse."""

    model_manifest: Path
    model_blob: Path
    image_paths: tuple
    mask_paths: tuple  # same length as image_paths, entries may be None
    class_index: Optional[int]
    explain_config: ExplanationConfig
    metric_config: MetricConfig
    out_dir: Path
    model: Model = field(repr=False, compare=False, default=None)
    items: tuple = field(repr=False, compare=False, default=())


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _build_explain_config(args, model: Model) -> ExplanationConfig:
    if args.layer is not None:
        spec = next((l for l in model.layers if l.name == args.layer), None)
        if spec is None:
            raise _UsageError(f"--layer {args.layer!r} is not a layer of this model")
        if spec.kind != "conv2d":
            raise _UsageError(f"--layer {args.layer!r} is {spec.kind}, not conv2d")
    try:
        return ExplanationConfig(
            tau=args.tau,
            sigma=args.sigma,
            gradcam=GradCamConfig(target_layer=args.layer),
            lrp=LrpConfig(epsilon=args.epsilon, alpha=args.alpha, beta=args.beta),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _load_model_checked(manifest_path: Path) -> tuple:
    blob_path = manifest_path.with_suffix(".bin")
    _require_file(manifest_path)
    _require_file(blob_path)
    return load_model(manifest_path, blob_path), blob_path


def _build_explain_manifest(args) -> RunManifest:
    model_path = Path(args.model)
    model, blob_path = _load_model_checked(model_path)
    image_path = _require_file(Path(args.image))
    image = load_image(image_path)
    expected = (model.in_channels,) + model.input_hw
    if image.shape != expected:
        raise ShapeError(
            f"{image_path}: image is {image.shape}, model expects {expected}"
        )
    if args.class_index is not None and not (
        0 <= args.class_index < model.class_count
    ):
        raise _UsageError(
            f"--class {args.class_index} out of range for "
            f"{model.class_count} classes"
        )
    return RunManifest(
        model_manifest=model_path,
        model_blob=blob_path,
        image_paths=((image_path.stem, image_path),),
        mask_paths=(None,),
        class_index=args.class_index,
        explain_config=_build_explain_config(args, model),
        metric_config=MetricConfig(),
        out_dir=Path(args.out),
        model=model,
        items=(BenchmarkItem(name=image_path.stem, image=image),),
    )


def cmd_explain(args) -> int:
    manifest = _build_explain_manifest(args)
    model = manifest.model
    item = manifest.items[0]

    trace = forward(model, item.image)
    predicted = int(np.argmax(trace.logits))
    cls = manifest.class_index if manifest.class_index is not None else predicted
    result = explain(model, item.image, cls, manifest.explain_config)

    out_dir = manifest.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    render_heatmap(result.final, out_dir / "final.png")
    save_tensor(out_dir / "final.json", result.final.values)
    if args.emit_intermediates:
        stages = {
            "gradcam": result.gradcam_raw,
            "mask": result.gradcam_mask,
            "lrp_avg": result.lrp_avg,
            "product": result.product,
        }
        for name, stage in stages.items():
            render_heatmap(stage, out_dir / f"{name}.png")
            save_tensor(out_dir / f"{name}.json", stage.values)

    print(f"predicted class {predicted}, logit {float(trace.logits[predicted]):.6g}")
    if cls != predicted:
        print(f"explained class {cls}, logit {float(trace.logits[cls]):.6g}")
    return EXIT_OK


def _collect_benchmark_paths(image_dir: Path) -> tuple:
    if not image_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {image_dir}")
    if (image_dir / "images").is_dir():
        png_dir = image_dir / "images"
        mask_dir = image_dir / "masks"
    else:
        png_dir = image_dir
        mask_dir = image_dir / "masks"
    image_paths = tuple(sorted(png_dir.glob("*.png")))
    if not image_paths:
        raise FileNotFoundError(f"no .png images under {png_dir}")
    mask_paths = tuple(
        p if (p := mask_dir / ip.name).is_file() else None for ip in image_paths
    )
    return image_paths, mask_paths


def _build_benchmark_manifest(args) -> RunManifest:
    model_path = Path(args.model)
    model, blob_path = _load_model_checked(model_path)
    image_paths, mask_paths = _collect_benchmark_paths(Path(args.image))

    expected = (model.in_channels,) + model.input_hw
    items = []
    for ip, mp in zip(image_paths, mask_paths):
        image = load_image(ip)
        if image.shape != expected:
            raise ShapeError(f"{ip}: image is {image.shape}, model expects {expected}")
        mask = load_mask(mp) if mp is not None else None
        if mask is not None and mask.shape != model.input_hw:
            raise ShapeError(
                f"{mp}: mask is {mask.shape}, model expects {model.input_hw}"
            )
        items.append(BenchmarkItem(name=ip.stem, image=image, mask=mask))

    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if not methods:
        raise _UsageError("--methods must name at least one method")
    for m in methods:
        if m not in METHODS:
            raise _UsageError(f"unknown method {m!r}, expected one of {METHODS}")

    return RunManifest(
        model_manifest=model_path,
        model_blob=blob_path,
        image_paths=tuple((p.stem, p) for p in image_paths),
        mask_paths=mask_paths,
        class_index=None,
        explain_config=_build_explain_config(args, model),
        metric_config=MetricConfig(seed=args.seed),
        out_dir=Path(args.out),
        model=model,
        items=tuple(items),
    )


def cmd_benchmark(args) -> int:
    manifest = _build_benchmark_manifest(args)
    methods = tuple(m.strip() for m in args.methods.split(","))
    report = benchmark(
        manifest.model,
        manifest.items,
        methods=methods,
        cfg=manifest.metric_config,
        explain_config=manifest.explain_config,
    )
    out_dir = manifest.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_obj(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'report.json'}")
    return EXIT_OK


def _add_pipeline_flags(sp):
    sp.add_argument("--model", required=True, help="path to model.json (model.bin beside it)")
    sp.add_argument("--tau", type=float, default=0.25, help="mask threshold in [0,1)")
    sp.add_argument("--sigma", type=float, default=2.0, help="blur stddev, 0 disables")
    sp.add_argument("--alpha", type=float, default=1.0, help="LRP alpha (conv layers)")
    sp.add_argument("--beta", type=float, default=0.0, help="LRP beta (conv layers)")
    sp.add_argument("--epsilon", type=float, default=1e-6, help="LRP z-rule stabilizer")
    sp.add_argument("--layer", default=None, help="target conv layer (default: last)")
    sp.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="camfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("explain", help="explain one image, write heatmaps")
    _add_pipeline_flags(pe)
    pe.add_argument("--image", required=True, help="8-bit RGB PNG")
    pe.add_argument(
        "--class", dest="class_index", type=int, default=None,
        help="class to explain (default: predicted class)",
    )
    pe.add_argument(
        "--emit-intermediates", action="store_true",
        help="also write gradcam, mask, lrp_avg, product stages",
    )
    pe.set_defaults(handler=cmd_explain)

    pb = sub.add_parser("benchmark", help="run the metric table over an image set")
    _add_pipeline_flags(pb)
    pb.add_argument(
        "--image", required=True,
        help="directory of PNGs (or a bundle dir with images/ and masks/)",
    )
    pb.add_argument(
        "--methods", default=",".join(METHODS),
        help="comma-separated subset of proposed,gradcam,lrp",
    )
    pb.add_argument("--seed", type=int, default=0, help="metric sampling seed")
    pb.set_defaults(handler=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModelFormatError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
