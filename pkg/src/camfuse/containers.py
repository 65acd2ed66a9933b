"""Tensor container: a JSON manifest next to a raw float32 blob.

The same two-file pattern as the weight container, reduced to a single
tensor, so attribution exports need no extra parser downstream.  The blob
sits next to the manifest with a ``.bin`` suffix.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor import DTYPE, f32

FORMAT_VERSION = 1


class ContainerError(ValueError):
    """Malformed tensor container manifest or blob."""


def blob_path_for(manifest_path) -> Path:
    return Path(manifest_path).with_suffix(".bin")


def save_tensor(manifest_path, values: np.ndarray) -> None:
    values = f32(values)
    manifest_path = Path(manifest_path)
    manifest = {
        "format_version": FORMAT_VERSION,
        "dtype": "float32",
        "byte_order": "little",
        "shape": list(values.shape),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    blob_path_for(manifest_path).write_bytes(
        np.ascontiguousarray(values, dtype="<f4").tobytes()
    )


def load_tensor(manifest_path) -> np.ndarray:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{manifest_path}: not valid JSON: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(
            f"{manifest_path}: unsupported format_version "
            f"{manifest.get('format_version')!r}"
        )
    if manifest.get("dtype") != "float32":
        raise ContainerError(f"{manifest_path}: unsupported dtype {manifest.get('dtype')!r}")
    shape = manifest.get("shape")
    if (
        not isinstance(shape, list)
        or not shape
        or not all(isinstance(e, int) and e > 0 for e in shape)
    ):
        raise ContainerError(f"{manifest_path}: bad shape {shape!r}")
    blob = np.frombuffer(blob_path_for(manifest_path).read_bytes(), dtype="<f4")
    expected = int(np.prod(shape))
    if blob.size != expected:
        raise ContainerError(
            f"{blob_path_for(manifest_path)}: holds {blob.size} elements "
            f"but the manifest declares {expected}"
        )
    return blob.reshape(shape).astype(DTYPE)
