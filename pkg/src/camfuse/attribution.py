"""Signed per-pixel relevance maps with a provenance tag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE

KINDS = ("gradcam", "lrp", "fused")


@dataclass(frozen=True)
class AttributionMap:
    """2-D signed relevance field over input pixels.

    ``kind`` records which stage produced the map: a GradCAM-style
    localization map, a channel-averaged LRP map, or their fused product.
    """

    values: np.ndarray  # float32 [H, W]
    kind: str

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=DTYPE)
        if v.ndim != 2:
            raise ValueError(f"attribution map must be 2-D, got shape {v.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown attribution kind {self.kind!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def map_values(attribution) -> np.ndarray:
    """Accept an AttributionMap or a bare array; return the value array."""
    return np.asarray(getattr(attribution, "values", attribution))
