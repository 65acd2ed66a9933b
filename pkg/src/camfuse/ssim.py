"""Windowed structural similarity between two 2-D maps.

Mean SSIM over all fully contained ``window x window`` patches, computed
with the standard stabilizing constants C1 = (0.01 L)^2 and C2 = (0.03 L)^2
for data range L = 1.  Statistics use the unbiased (N-1) normalization, as
in the reference formulation.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError

K1 = 0.01
K2 = 0.03


def mean_ssim(a: np.ndarray, b: np.ndarray, window: int = 7) -> float:
    """Mean local SSIM of two equally sized maps with values in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"maps must share a 2-D shape, got {a.shape} and {b.shape}")
    h, w = a.shape
    if window < 2 or window > min(h, w):
        raise ShapeError(f"window {window} does not fit maps of shape {a.shape}")

    wa = np.lib.stride_tricks.sliding_window_view(a, (window, window))
    wb = np.lib.stride_tricks.sliding_window_view(b, (window, window))
    n = window * window
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    # unbiased variance / covariance per window
    var_a = (wa * wa).mean(axis=(2, 3)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    corr = n / (n - 1)
    var_a, var_b, cov = corr * var_a, corr * var_b, corr * cov

    c1 = K1 * K1
    c2 = K2 * K2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
