"""Synthetic 10-class shape dataset: colored silhouettes on plain
backgrounds, 32x32 RGB, with exact foreground masks for localisation
tests."""

from __future__ import annotations

import numpy as np

SIZE = 32
CLASS_NAMES = (
    "square", "disk", "triangle", "plus", "ring",
    "hbar", "vbar", "diamond", "checker", "saltire",
)


def _silhouette(class_idx: int, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    name = CLASS_NAMES[class_idx]
    if name == "square":
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if name == "disk":
        return dx**2 + dy**2 <= r**2
    if name == "triangle":
        return (dy >= -r) & (dy <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    if name == "plus":
        return ((np.abs(dx) <= r / 3) & (np.abs(dy) <= r)) | (
            (np.abs(dy) <= r / 3) & (np.abs(dx) <= r)
        )
    if name == "ring":
        d2 = dx**2 + dy**2
        return (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
    if name == "hbar":
        return (np.abs(dy) <= r / 2.5) & (np.abs(dx) <= r)
    if name == "vbar":
        return (np.abs(dx) <= r / 2.5) & (np.abs(dy) <= r)
    if name == "diamond":
        return np.abs(dx) + np.abs(dy) <= r
    if name == "checker":
        cell = ((xx // 4).astype(int) + (yy // 4).astype(int)) % 2 == 0
        return cell & (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if name == "saltire":
        return ((np.abs(dx - dy) <= r / 3) | (np.abs(dx + dy) <= r / 3)) & (
            (np.abs(dx) <= r) & (np.abs(dy) <= r)
        )
    raise ValueError(f"no class {class_idx}")


def render_example(class_idx: int, rng: np.random.Generator):
    """One image+mask pair: [3,32,32] float32 in [0,1] and [32,32] bool."""
    cx = rng.uniform(12.0, 20.0)
    cy = rng.uniform(12.0, 20.0)
    r = rng.uniform(7.0, 10.0)
    mask = _silhouette(class_idx, cx, cy, r)

    bg = rng.uniform(0.05, 0.35, size=3)
    fg = rng.uniform(0.6, 0.95, size=3)
    img = np.empty((3, SIZE, SIZE), dtype=np.float64)
    for c in range(3):
        img[c] = np.where(mask, fg[c], bg[c])
    img += rng.normal(0.0, 0.02, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32), mask


def make_dataset(n_per_class: int, seed: int):
    """Stacked images [N,3,32,32], labels [N], masks [N,32,32]."""
    rng = np.random.default_rng(seed)
    images, labels, masks = [], [], []
    for class_idx in range(len(CLASS_NAMES)):
        for _ in range(n_per_class):
            img, mask = render_example(class_idx, rng)
            images.append(img)
            labels.append(class_idx)
            masks.append(mask)
    order = rng.permutation(len(images))
    return (
        np.stack(images)[order],
        np.asarray(labels, dtype=np.int64)[order],
        np.stack(masks)[order],
    )
