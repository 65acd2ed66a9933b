"""Shared builders: in-memory models, serialized bundles, PNG helpers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from PIL import Image

from camfuse.model import LayerSpec, Model, load_model

FIXTURES = Path(__file__).parent / "fixtures"
BUNDLE = FIXTURES / "bundle"
BUNDLE_BIASFREE = FIXTURES / "bundle_biasfree"

settings.register_profile(
    "camfuse",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("camfuse")


def freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float32)
    a.setflags(write=False)
    return a


def build_model(
    chain,
    seed=0,
    in_channels=3,
    input_hw=(12, 12),
    class_count=5,
    bias=True,
    mean=0.5,
    std=0.25,
):
    """Assemble an in-memory Model from a chain description.

    Chain entries: ("conv", out_c, k, s, p), ("relu",), ("pool", k, s),
    ("flatten",), ("dense",).  The dense layer maps whatever arrives to
    class_count outputs.  Weights are N(0, 1/sqrt(fan_in)).
    """
    rng = np.random.default_rng(seed)
    layers = []
    weights = {}
    biases = {}
    c, h, w = in_channels, *input_hw
    flat = None
    counts = {"conv": 0, "relu": 0, "pool": 0, "flatten": 0, "dense": 0}

    def init(shape, fan_in):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape).astype(np.float32)

    for entry in chain:
        kind = entry[0]
        counts[kind] += 1
        name = f"{kind}{counts[kind]}"
        if kind == "conv":
            _, out_c, k, s, p = entry
            spec = LayerSpec(
                kind="conv2d", name=name, out_channels=out_c, in_channels=c,
                kernel=(k, k), stride=(s, s), padding=(p, p),
                weights_offset=0, bias_offset=0,
            )
            weights[name] = freeze(init((out_c, c, k, k), c * k * k))
            biases[name] = freeze(
                init((out_c,), c * k * k) if bias else np.zeros(out_c)
            )
            h = (h + 2 * p - k) // s + 1
            w = (w + 2 * p - k) // s + 1
            c = out_c
        elif kind == "relu":
            spec = LayerSpec(kind="relu", name=name)
        elif kind == "pool":
            _, k, s = entry
            spec = LayerSpec(kind="maxpool2d", name=name, kernel=(k, k), stride=(s, s))
            h = (h - k) // s + 1
            w = (w - k) // s + 1
        elif kind == "flatten":
            spec = LayerSpec(kind="flatten", name=name)
            flat = c * h * w
        elif kind == "dense":
            spec = LayerSpec(
                kind="dense", name=name, out_features=class_count, in_features=flat,
                weights_offset=0, bias_offset=0,
            )
            weights[name] = freeze(init((class_count, flat), flat))
            biases[name] = freeze(
                init((class_count,), flat) if bias else np.zeros(class_count)
            )
        else:
            raise AssertionError(f"unknown chain entry {entry}")
        layers.append(spec)

    return Model(
        layers=tuple(layers),
        weights=weights,
        biases=biases,
        in_channels=in_channels,
        input_hw=input_hw,
        mean=freeze(np.full(in_channels, mean)),
        std=freeze(np.full(in_channels, std)),
        class_count=class_count,
    )


TWO_CONV = (
    ("conv", 5, 3, 1, 1), ("relu",), ("pool", 2, 2),
    ("conv", 6, 3, 1, 1), ("relu",), ("flatten",), ("dense",),
)
LINEAR = (("flatten",), ("dense",))


def small_model(seed=0, **kw):
    return build_model(TWO_CONV, seed=seed, **kw)


def linear_model(seed=0, bias=False, **kw):
    kw.setdefault("mean", 0.0)
    kw.setdefault("std", 1.0)
    return build_model(LINEAR, seed=seed, bias=bias, **kw)


def random_image(seed, model):
    rng = np.random.default_rng(seed)
    shape = (model.in_channels,) + model.input_hw
    return rng.uniform(0.0, 1.0, shape).astype(np.float32)


def save_model_files(model: Model, out_dir) -> tuple:
    """Serialize a Model to the manifest + blob pair.

    Independent of the exporter package: offsets are assigned here, weights
    first then bias per parameterized layer, in chain order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    segments = []
    offset = 0

    def put(arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype="<f4")
        segments.append(arr)
        here = offset
        offset += arr.size
        return here

    layers_json = []
    for spec in model.layers:
        entry = {"kind": spec.kind, "name": spec.name}
        if spec.kind == "conv2d":
            entry.update(
                out_channels=spec.out_channels, in_channels=spec.in_channels,
                kernel=list(spec.kernel), stride=list(spec.stride),
                padding=list(spec.padding),
                weights_offset=put(model.weights[spec.name]),
                bias_offset=put(model.biases[spec.name]),
            )
        elif spec.kind == "maxpool2d":
            entry.update(kernel=list(spec.kernel), stride=list(spec.stride))
        elif spec.kind == "dense":
            entry.update(
                out_features=spec.out_features, in_features=spec.in_features,
                weights_offset=put(model.weights[spec.name]),
                bias_offset=put(model.biases[spec.name]),
            )
        layers_json.append(entry)

    manifest = {
        "format_version": 1,
        "input": {
            "channels": model.in_channels,
            "height": model.input_hw[0],
            "width": model.input_hw[1],
            "mean": [float(v) for v in model.mean],
            "std": [float(v) for v in model.std],
        },
        "class_count": model.class_count,
        "layers": layers_json,
    }
    json_path = out_dir / "model.json"
    bin_path = out_dir / "model.bin"
    json_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    bin_path.write_bytes(b"".join(s.tobytes() for s in segments))
    return json_path, bin_path


def write_image_png(path, image_chw) -> np.ndarray:
    """Write a [C,H,W] float image in [0,1] as 8-bit RGB; return the
    quantized array that load_image will reproduce exactly."""
    arr = np.asarray(image_chw, dtype=np.float64)
    u8 = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")
    return (u8.astype(np.float32) / np.float32(255.0)).astype(np.float32)


def write_mask_png(path, mask_hw) -> None:
    u8 = np.where(np.asarray(mask_hw).astype(bool), 255, 0).astype(np.uint8)
    Image.fromarray(u8, mode="L").save(path, format="PNG")


def _load_bundle(bundle_dir: Path):
    from camfuse.render import load_image, load_mask

    if not bundle_dir.is_dir():
        pytest.fail(
            f"fixture bundle missing at {bundle_dir}; "
            "regenerate it with exporter/scripts/build_fixtures.py"
        )
    model = load_model(bundle_dir / "model.json", bundle_dir / "model.bin")
    reference = json.loads((bundle_dir / "reference.json").read_text(encoding="utf-8"))
    images = {}
    masks = {}
    for p in sorted((bundle_dir / "images").glob("*.png")):
        images[p.stem] = load_image(p)
        mask_path = bundle_dir / "masks" / p.name
        masks[p.stem] = load_mask(mask_path) if mask_path.is_file() else None
    return model, images, masks, reference


@pytest.fixture(scope="session")
def bundle():
    return _load_bundle(BUNDLE)


@pytest.fixture(scope="session")
def bundle_biasfree():
    return _load_bundle(BUNDLE_BIASFREE)
