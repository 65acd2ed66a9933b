"""PNG input/output: image and mask loading, heatmap rendering."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .attribution import map_values
from .tensor import DTYPE


def load_image(path) -> np.ndarray:
    """8-bit RGB PNG to a [3, H, W] float32 array in [0, 1]."""
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=DTYPE) / DTYPE(255.0)
    return np.ascontiguousarray(rgb.transpose(2, 0, 1))


def load_mask(path) -> np.ndarray:
    """8-bit grayscale PNG to a [H, W] bool array, nonzero = foreground."""
    with Image.open(path) as img:
        gray = np.asarray(img.convert("L"))
    return gray != 0


def heatmap_rgb(attribution) -> np.ndarray:
    """Symmetric diverging colormap as a [H, W, 3] uint8 array.

    Values are scaled by max|v|: positive ramps white to red, negative white
    to blue, zero is white.  An all-zero map renders mid-gray so it cannot
    be mistaken for a uniformly irrelevant-but-valid result.
    """
    v = map_values(attribution).astype(np.float64)
    peak = np.abs(v).max()
    if peak == 0:
        return np.full(v.shape + (3,), 128, dtype=np.uint8)
    t = v / peak
    ramp = np.rint(255.0 * (1.0 - np.abs(t))).astype(np.uint8)
    rgb = np.empty(v.shape + (3,), dtype=np.uint8)
    pos = t >= 0
    rgb[..., 0] = np.where(pos, 255, ramp)
    rgb[..., 1] = ramp
    rgb[..., 2] = np.where(pos, ramp, 255)
    return rgb


def render_heatmap(attribution, out_path) -> None:
    """Write the diverging-colormap PNG at the map's own resolution."""
    out_path = Path(out_path)
    Image.fromarray(heatmap_rgb(attribution), mode="RGB").save(out_path, format="PNG")
