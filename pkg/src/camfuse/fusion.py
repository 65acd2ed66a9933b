"""Fused GradCAM++/LRP explanations.

The GradCAM++ map is upsampled to pixel resolution and turned into a
"bounding figure": a user threshold is subtracted, negatives are clipped,
and the rest is min-max renormalized.  The channel-averaged LRP map is then
multiplied elementwise by that mask, so LRP noise outside the localized
region is zeroed exactly, and the signed product is finally smoothed with a
Gaussian filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attribution import AttributionMap, map_values
from .gradcam import GradCamConfig, gradcam_pp
from .lrp import LrpConfig, channel_average, lrp_composite
from .model import Model, forward
from .tensor import DTYPE, ShapeError, bilinear_resize, gaussian_blur


@dataclass(frozen=True)
class ExplanationConfig:
    """Pipeline hyperparameters: mask threshold, blur width, stage configs."""

    tau: float = 0.25
    sigma: float = 2.0
    gradcam: GradCamConfig = field(default_factory=GradCamConfig)
    lrp: LrpConfig = field(default_factory=LrpConfig)

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class Explanation:
    """Final fused map plus every intermediate, all at input resolution."""

    final: AttributionMap
    gradcam_raw: AttributionMap
    gradcam_mask: AttributionMap
    lrp_avg: AttributionMap
    product: AttributionMap
    class_index: int
    config: ExplanationConfig


def threshold_mask(gradcam_map, tau: float) -> AttributionMap:
    """Bounding figure from a [0, 1] localization map.

    Subtracts ``tau``, clips at zero, and min-max renormalizes so the mask
    again spans [0, 1].  A map left constant by the clip becomes all ones
    when the constant is positive and all zeros otherwise.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    g = map_values(gradcam_map).astype(DTYPE)
    m = np.maximum(g - DTYPE(tau), 0)
    lo = float(m.min())
    hi = float(m.max())
    if hi > lo:
        m = (m - lo) / (hi - lo)
    elif hi > 0:
        m = np.ones_like(m)
    else:
        m = np.zeros_like(m)
    return AttributionMap(values=m.astype(DTYPE), kind="gradcam")


def fuse(mask, lrp_avg) -> AttributionMap:
    """Elementwise product; the mask is nonnegative so the sign is LRP's."""
    mv = map_values(mask)
    lv = map_values(lrp_avg)
    if mv.shape != lv.shape:
        raise ShapeError(f"extent mismatch: mask {mv.shape} vs lrp {lv.shape}")
    return AttributionMap(values=(mv * lv).astype(DTYPE), kind="fused")


def explain(
    model: Model,
    image: np.ndarray,
    class_index: int,
    config: ExplanationConfig = ExplanationConfig(),
) -> Explanation:
    """Run the full fusion pipeline for one image and class.

    Stages: GradCAM++ at the target conv layer, bilinear upsampling to the
    input extents, threshold mask, composite LRP averaged over channels,
    elementwise fusion, Gaussian blur.  All intermediates are retained.
    """
    trace = forward(model, image)
    h, w = model.input_hw

    cam = gradcam_pp(model, trace, class_index, config.gradcam)
    cam_px = AttributionMap(
        values=bilinear_resize(cam.values, h, w), kind="gradcam"
    )
    mask = threshold_mask(cam_px, config.tau)

    relevance = lrp_composite(model, trace, class_index, config.lrp)
    lrp_avg = channel_average(relevance)

    product = fuse(mask, lrp_avg)
    final = AttributionMap(
        values=gaussian_blur(product.values, config.sigma), kind="fused"
    )
    return Explanation(
        final=final,
        gradcam_raw=cam_px,
        gradcam_mask=mask,
        lrp_avg=lrp_avg,
        product=product,
        class_index=class_index,
        config=config,
    )
