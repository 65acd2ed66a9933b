"""Dense float32 tensor kernels.

Tensors are plain C-contiguous ``numpy.float32`` arrays; shape metadata and
bounds-checked element access come from numpy itself.  Every kernel in this
module is a pure function: identical inputs produce bit-identical outputs,
and nothing is mutated in place.  Spatial tensors are laid out ``[C, H, W]``
row-major (last axis fastest).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

DTYPE = np.float32


class ShapeError(ValueError):
    """Inconsistent tensor extents passed to a kernel."""


def f32(x) -> np.ndarray:
    """Coerce array-like input to a C-contiguous float32 array."""
    return np.ascontiguousarray(x, dtype=DTYPE)


def tensor(data, shape=None) -> np.ndarray:
    """Build a float32 tensor from nested lists or a flat buffer plus shape."""
    arr = f32(data)
    if shape is not None:
        if arr.size != int(np.prod(shape)):
            raise ShapeError(
                f"buffer of {arr.size} elements cannot fill shape {tuple(shape)}"
            )
        arr = arr.reshape(shape)
    return arr


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    a, b = v
    return (int(a), int(b))


@dataclass(frozen=True)
class ArgmaxIndices:
    """Winning input positions of a max-pool call.

    ``flat`` holds, for every pooled output cell, the row-major index of the
    window maximum into the flattened ``[C, H, W]`` input.  Ties are broken
    by first (row-major) occurrence inside the window, so the winner is
    deterministic.
    """

    flat: np.ndarray  # int64, shape [C, H', W']
    input_shape: tuple[int, int, int]


def conv2d_forward(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    stride=(1, 1),
    padding=(0, 0),
) -> np.ndarray:
    """2-D cross-correlation with zero padding.

    Parameters
    ----------
    x : float32 [C_in, H, W]
    weights : float32 [C_out, C_in, kH, kW]
    bias : float32 [C_out]
    stride, padding : int or (int, int)

    Returns
    -------
    float32 [C_out, H', W'] with H' = (H + 2*padH - kH) / strideH + 1.
    The output extent must be integral; fractional extents are rejected.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if x.ndim != 3 or weights.ndim != 4 or bias.ndim != 1:
        raise ShapeError(
            f"conv2d expects x[C,H,W], weights[O,C,kH,kW], bias[O]; got "
            f"{x.shape}, {weights.shape}, {bias.shape}"
        )
    c_out, c_in, kh, kw = weights.shape
    if x.shape[0] != c_in:
        raise ShapeError(f"input has {x.shape[0]} channels, kernel expects {c_in}")
    if bias.shape[0] != c_out:
        raise ShapeError(f"bias has {bias.shape[0]} entries, expected {c_out}")
    if sh < 1 or sw < 1:
        raise ShapeError(f"stride must be positive, got {(sh, sw)}")
    h, w = x.shape[1], x.shape[2]
    hp, wp = h + 2 * ph, w + 2 * pw
    if hp < kh or wp < kw:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    if (hp - kh) % sh != 0 or (wp - kw) % sw != 0:
        raise ShapeError(
            f"non-integral output extent for input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {(sh, sw)}, padding {(ph, pw)}"
        )
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1

    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::sh, ::sw]  # [C_in, oh, ow, kh, kw]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c_in * kh * kw)
    out = cols @ weights.reshape(c_out, -1).T + bias
    return np.ascontiguousarray(out.T.reshape(c_out, oh, ow), dtype=DTYPE)


def conv2d_input_grad(
    grad_out: np.ndarray,
    weights: np.ndarray,
    stride=(1, 1),
    padding=(0, 0),
    input_hw=(0, 0),
) -> np.ndarray:
    """Gradient of ``conv2d_forward`` with respect to its input.

    ``grad_out`` is [C_out, H', W']; the result is [C_in, H, W] for the
    stated input extents.  Kernel offsets are visited in fixed row-major
    order so the accumulation is deterministic.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    h, w = _pair(input_hw)
    c_out, c_in, kh, kw = weights.shape
    if grad_out.ndim != 3 or grad_out.shape[0] != c_out:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match {c_out} output channels"
        )
    oh, ow = grad_out.shape[1], grad_out.shape[2]
    gp = np.zeros((c_in, h + 2 * ph, w + 2 * pw), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            # [C_in, oh, ow] contribution of kernel tap (i, j)
            contrib = np.tensordot(weights[:, :, i, j], grad_out, axes=([0], [0]))
            gp[:, i : i + sh * oh : sh, j : j + sw * ow : sw] += contrib
    if ph or pw:
        gp = gp[:, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(gp, dtype=DTYPE)


def maxpool2d_forward(
    x: np.ndarray, k, stride
) -> tuple[np.ndarray, ArgmaxIndices]:
    """Per-window maximum over non-padded windows.

    Returns the pooled map and the flat argmax index of each window winner
    (first row-major occurrence on ties).  Trailing rows/columns that do not
    fill a window are dropped.
    """
    kh, kw = _pair(k)
    sh, sw = _pair(stride)
    if x.ndim != 3:
        raise ShapeError(f"maxpool expects x[C,H,W], got shape {x.shape}")
    c, h, w = x.shape
    if kh > h or kw > w:
        raise ShapeError(f"pool window {kh}x{kw} larger than input {h}x{w}")
    if sh < 1 or sw < 1:
        raise ShapeError(f"stride must be positive, got {(sh, sw)}")
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1

    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    win = win[:, ::sh, ::sw].reshape(c, oh, ow, kh * kw)
    local = np.argmax(win, axis=3)  # first occurrence wins ties
    out = np.take_along_axis(win, local[..., None], axis=3)[..., 0]

    wi, wj = local // kw, local % kw
    gy = np.arange(oh, dtype=np.int64)[None, :, None] * sh + wi
    gx = np.arange(ow, dtype=np.int64)[None, None, :] * sw + wj
    gc = np.arange(c, dtype=np.int64)[:, None, None]
    flat = (gc * h + gy) * w + gx
    return (
        np.ascontiguousarray(out, dtype=DTYPE),
        ArgmaxIndices(flat=flat, input_shape=(c, h, w)),
    )


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map ``weights @ x + bias`` with weights laid out [out, in]."""
    if x.ndim != 1 or weights.ndim != 2 or bias.ndim != 1:
        raise ShapeError(
            f"dense expects x[N], weights[M,N], bias[M]; got "
            f"{x.shape}, {weights.shape}, {bias.shape}"
        )
    m, n = weights.shape
    if x.shape[0] != n or bias.shape[0] != m:
        raise ShapeError(
            f"dense shapes inconsistent: x[{x.shape[0]}], weights[{m},{n}], "
            f"bias[{bias.shape[0]}]"
        )
    return np.ascontiguousarray(weights @ x + bias, dtype=DTYPE)


def bilinear_resize(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear interpolation of a 2-D map (align-corners-false convention).

    Source coordinates are ``(dst + 0.5) * in/out - 0.5``, clamped to the
    valid range, so constant maps stay constant and resizing to the same
    extents is the identity.
    """
    if m.ndim != 2:
        raise ShapeError(f"resize expects a 2-D map, got shape {m.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"target extents must be positive, got {out_h}x{out_w}")
    h, w = m.shape
    if (out_h, out_w) == (h, w):
        return m.copy()

    def axis_coords(n_in: int, n_out: int):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        lo = np.minimum(lo, max(n_in - 2, 0))
        frac = (src - lo).astype(DTYPE)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, frac

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    top = m[y0] * (1.0 - fy[:, None]) + m[y1] * fy[:, None]
    out = top[:, x0] * (1.0 - fx[None, :]) + top[:, x1] * fx[None, :]
    return np.ascontiguousarray(out, dtype=DTYPE)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return (k / k.sum()).astype(DTYPE)


def gaussian_blur(m: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with reflected borders.

    The kernel radius is ceil(3*sigma) and the taps are normalized to sum
    to one, so constant maps are preserved exactly; sigma = 0 is the
    identity.  Borders reflect with the edge sample included, which avoids
    the dark halo zero padding would create.
    """
    if m.ndim != 2:
        raise ShapeError(f"blur expects a 2-D map, got shape {m.shape}")
    if sigma < 0:
        raise ShapeError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return m.copy()
    k = gaussian_kernel_1d(sigma)
    r = (k.size - 1) // 2

    def blur_axis(a: np.ndarray, axis: int) -> np.ndarray:
        pad = [(0, 0), (0, 0)]
        pad[axis] = (r, r)
        ap = np.pad(a, pad, mode="symmetric")
        win = np.lib.stride_tricks.sliding_window_view(ap, k.size, axis=axis)
        return win @ k

    return np.ascontiguousarray(blur_axis(blur_axis(m, 0), 1), dtype=DTYPE)
