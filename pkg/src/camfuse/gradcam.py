"""GradCAM++ class localization maps.

The map for class ``c`` at a conv layer weights each feature map ``A^k`` by
a combination of the *positive* partial derivatives of the class logit.
With ``g`` the first-order gradient of the logit w.r.t. the layer output,
higher-order terms are realized as elementwise powers of ``g`` (the usual
closed-form shortcut for relu networks):

    alpha_ij = g_ij^2 / (2 g_ij^2 + sum_ab(A_ab) * g_ij^3 + eps)
    w_k      = sum_ij alpha_ij * relu(g_ij)
    L        = relu(sum_k w_k A^k),  min-max normalized to [0, 1]

``alpha`` is forced to zero wherever ``g`` is exactly zero, so locally
flat logits cannot produce 0/0 artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attribution import AttributionMap
from .model import ForwardTrace, Model, grad_wrt_layer
from .tensor import DTYPE


@dataclass(frozen=True)
class GradCamConfig:
    """Target conv layer (default: last conv in the chain) and stabilizer."""

    target_layer: Optional[str] = None
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def normalize_unit_range(m: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1].

    A constant map has no range to stretch: it becomes all ones when the
    constant is positive and all zeros otherwise, mirroring the threshold
    convention downstream.
    """
    lo = float(m.min())
    hi = float(m.max())
    if hi > lo:
        return ((m - lo) / (hi - lo)).astype(DTYPE)
    if hi > 0:
        return np.ones_like(m, dtype=DTYPE)
    return np.zeros_like(m, dtype=DTYPE)


def gradcam_pp(
    model: Model,
    trace: ForwardTrace,
    class_index: int,
    config: GradCamConfig = GradCamConfig(),
) -> AttributionMap:
    """GradCAM++ map for one class at conv-layer resolution, values in [0, 1]."""
    layer_name = config.target_layer or model.last_conv_layer()
    idx = model.layer_index(layer_name)
    if model.layers[idx].kind != "conv2d":
        raise ValueError(f"layer {layer_name!r} is not a conv2d layer")

    acts = trace.outputs[idx]  # [K, h, w]
    grads = grad_wrt_layer(model, trace, class_index, layer_name)

    g2 = grads * grads
    sum_acts = acts.sum(axis=(1, 2), dtype=DTYPE)[:, None, None]
    denom = 2.0 * g2 + sum_acts * g2 * grads + DTYPE(config.epsilon)
    alpha = np.where(grads != 0, g2 / denom, DTYPE(0.0))

    weights = (alpha * np.maximum(grads, 0)).sum(axis=(1, 2), dtype=DTYPE)
    cam = np.maximum(np.tensordot(weights, acts, axes=1), 0)
    return AttributionMap(values=normalize_unit_range(cam), kind="gradcam")
