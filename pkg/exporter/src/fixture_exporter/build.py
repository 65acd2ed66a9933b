"""End-to-end fixture bundle construction.

A bundle directory is the complete exchange surface with the inference
side: model.json + model.bin, images/*.png with matching masks/*.png,
and reference.json holding logits, argmax and gradient spot-checks for
every image.  The PNG files are the ground truth, so references are
computed from re-decoded pixel data and the build ends with a self-check
that re-reads everything from disk.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .dataset import CLASS_NAMES, make_dataset, render_example
from .export import export_model
from .net import make_net, normalize, train
from .references import record_references, write_references

BUNDLE_CLASSES = 8


@dataclasses.dataclass(frozen=True)
class FixtureBundle:
    root: Path
    manifest_path: Path
    blob_path: Path
    reference_path: Path
    image_paths: tuple
    train_accuracy: float


def _write_image(path: Path, image_chw: np.ndarray) -> np.ndarray:
    """Save as RGB PNG; return the decoded float32 array the file encodes."""
    u8 = np.clip(np.rint(np.asarray(image_chw, dtype=np.float64) * 255.0),
                 0, 255).astype(np.uint8)
    Image.fromarray(u8.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")
    return (u8.astype(np.float32) / np.float32(255.0)).astype(np.float32)


def _write_mask(path: Path, mask_hw: np.ndarray):
    u8 = np.where(np.asarray(mask_hw).astype(bool), 255, 0).astype(np.uint8)
    Image.fromarray(u8, mode="L").save(path, format="PNG")


def _self_check(net, out_dir: Path):
    """Re-read the bundle from disk and confirm reference.json regenerates."""
    reference = json.loads((out_dir / "reference.json").read_text(encoding="utf-8"))
    net.eval()
    for name, entry in reference["images"].items():
        raw = np.asarray(Image.open(out_dir / "images" / f"{name}.png").convert("RGB"))
        decoded = (raw.transpose(2, 0, 1).astype(np.float32)
                   / np.float32(255.0)).astype(np.float32)
        with torch.no_grad():
            logits = net(normalize(decoded[None]))[0].numpy()
        got = [round(float(v), 6) for v in logits]
        if got != entry["logits"]:
            raise RuntimeError(
                f"self-check failed for {name}: disk logits {got} "
                f"!= recorded {entry['logits']}"
            )
        if int(np.argmax(logits)) != entry["argmax"]:
            raise RuntimeError(f"self-check failed for {name}: argmax drifted")


def build_bundle(
    out_dir,
    bias: bool = True,
    train_seed: int = 0,
    data_seed: int = 1,
    eval_seed: int = 2,
    n_per_class: int = 200,
    epochs: int = 8,
) -> FixtureBundle:
    """Train a net, serialize it, and emit the image/mask/reference set.

    Deterministic for fixed seeds on a fixed torch build; the committed
    files, not the seeds, are the contract.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    images, labels, _ = make_dataset(n_per_class, data_seed)
    # weight init draws from the global torch RNG, so seed before construction
    torch.manual_seed(train_seed)
    net = make_net(bias=bias)
    accuracy = train(net, images, labels, epochs=epochs, seed=train_seed)
    net.eval()

    decoded = {}
    image_paths = []
    for class_idx in range(BUNDLE_CLASSES):
        rng = np.random.default_rng([eval_seed, class_idx])
        image, mask = render_example(class_idx, rng)
        name = CLASS_NAMES[class_idx]
        image_path = out_dir / "images" / f"{name}.png"
        decoded[name] = _write_image(image_path, image)
        _write_mask(out_dir / "masks" / f"{name}.png", mask)
        image_paths.append(image_path)

    manifest_path, blob_path = export_model(net, out_dir)
    reference_path = write_references(record_references(net, decoded), out_dir)
    _self_check(net, out_dir)
    return FixtureBundle(
        root=out_dir,
        manifest_path=manifest_path,
        blob_path=blob_path,
        reference_path=reference_path,
        image_paths=tuple(image_paths),
        train_accuracy=accuracy,
    )
