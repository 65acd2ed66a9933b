"""Independent reference implementations used only by the tests.

Everything here is written on a deliberately different route from the
library: quadruple loops instead of im2col, tap-by-tap einsum instead of
window matmul, direct per-window evaluation for SSIM, the pairwise
mean-absolute-difference identity for the Gini index.  Nothing imports
the package under test.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------- kernels


def conv2d_loops(x, w, b, stride=(1, 1), padding=(0, 0)):
    """Quadruple-loop cross-correlation in float64.  Small shapes only."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c_out, c_in, kh, kw = w.shape
    sh, sw = stride
    ph, pw = padding
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    h_out = (xp.shape[1] - kh) // sh + 1
    w_out = (xp.shape[2] - kw) // sw + 1
    out = np.zeros((c_out, h_out, w_out))
    for o in range(c_out):
        for i in range(h_out):
            for j in range(w_out):
                acc = b[o]
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            acc += xp[c, i * sh + u, j * sw + v] * w[o, c, u, v]
                out[o, i, j] = acc
    return out


def maxpool2d_loops(x, k, stride):
    """Loop max-pool; argmax is the flat index into the [C,H,W] input,
    first row-major occurrence on ties."""
    x = np.asarray(x, dtype=np.float64)
    c_in, h, w = x.shape
    kh, kw = k
    sh, sw = stride
    h_out = (h - kh) // sh + 1
    w_out = (w - kw) // sw + 1
    out = np.zeros((c_in, h_out, w_out))
    arg = np.zeros((c_in, h_out, w_out), dtype=np.int64)
    for c in range(c_in):
        for i in range(h_out):
            for j in range(w_out):
                best = -math.inf
                best_pos = -1
                for u in range(kh):
                    for v in range(kw):
                        r, s = i * sh + u, j * sw + v
                        if x[c, r, s] > best:
                            best = x[c, r, s]
                            best_pos = (c * h + r) * w + s
                out[c, i, j] = best
                arg[c, i, j] = best_pos
    return out, arg


def dense_loops(W, x, b):
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros(W.shape[0])
    for m in range(W.shape[0]):
        acc = b[m]
        for n in range(W.shape[1]):
            acc += W[m, n] * x[n]
        out[m] = acc
    return out


def bilinear_loops(m, out_h, out_w):
    """Per-output-pixel align-corners-false interpolation."""
    m = np.asarray(m, dtype=np.float64)
    in_h, in_w = m.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        sy = (i + 0.5) * in_h / out_h - 0.5
        sy = min(max(sy, 0.0), in_h - 1.0)
        y0 = min(int(math.floor(sy)), max(in_h - 2, 0))
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = (j + 0.5) * in_w / out_w - 0.5
            sx = min(max(sx, 0.0), in_w - 1.0)
            x0 = min(int(math.floor(sx)), max(in_w - 2, 0))
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            top = m[y0, x0] * (1 - fx) + m[y0, x1] * fx
            bot = m[y1, x0] * (1 - fx) + m[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


def gaussian_kernel_2d(sigma):
    """Directly sampled, normalized 2-D Gaussian with radius ceil(3 sigma)."""
    radius = int(math.ceil(3.0 * sigma))
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    k = np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))
    return k / k.sum()


# ---------------------------------------------------------------- metrics


def gini_mad(v):
    """Gini via the pairwise mean absolute difference identity:
    G = sum_ij |a_i - a_j| / (2 n^2 mean)."""
    a = np.abs(np.asarray(v, dtype=np.float64).ravel())
    n = a.size
    mean = a.mean()
    if mean == 0:
        return 0.0
    mad = np.abs(a[:, None] - a[None, :]).sum()
    return float(mad / (2.0 * n * n * mean))


def pearson(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    return float((xc * yc).sum() / math.sqrt((xc**2).sum() * (yc**2).sum()))


def ssim_direct(a, b, window):
    """Per-window loop evaluation, unbiased statistics, C1/C2 from the
    standard constants at data range 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c1 = 0.01**2
    c2 = 0.03**2
    h, w = a.shape
    n = window * window
    vals = []
    for i in range(h - window + 1):
        for j in range(w - window + 1):
            pa = a[i : i + window, j : j + window].ravel()
            pb = b[i : i + window, j : j + window].ravel()
            mu_a, mu_b = pa.mean(), pb.mean()
            va = ((pa - mu_a) ** 2).sum() / (n - 1)
            vb = ((pb - mu_b) ** 2).sum() / (n - 1)
            cov = ((pa - mu_a) * (pb - mu_b)).sum() / (n - 1)
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
            )
    return float(np.mean(vals))


# ------------------------------------------------- float64 forward replay


class Net64:
    """Float64 replay of a layer chain for finite-difference gradient checks.

    Convolution goes tap by tap through einsum with an explicit batch axis,
    so a whole block of perturbed activations evaluates in one pass.
    """

    def __init__(self, layers, weights, biases, mean, std):
        self.layers = layers
        self.weights = {k: np.asarray(v, dtype=np.float64) for k, v in weights.items()}
        self.biases = {k: np.asarray(v, dtype=np.float64) for k, v in biases.items()}
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    def _apply(self, spec, x):
        # x carries a leading batch axis throughout
        if spec.kind == "conv2d":
            w = self.weights[spec.name]
            b = self.biases[spec.name]
            sh, sw = spec.stride
            ph, pw = spec.padding
            xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
            kh, kw = spec.kernel
            h_out = (xp.shape[2] - kh) // sh + 1
            w_out = (xp.shape[3] - kw) // sw + 1
            out = np.zeros((x.shape[0], w.shape[0], h_out, w_out))
            for u in range(kh):
                for v in range(kw):
                    patch = xp[:, :, u : u + h_out * sh : sh, v : v + w_out * sw : sw]
                    out += np.einsum("bchw,oc->bohw", patch, w[:, :, u, v])
            return out + b[None, :, None, None]
        if spec.kind == "relu":
            return np.maximum(x, 0.0)
        if spec.kind == "maxpool2d":
            kh, kw = spec.kernel
            sh, sw = spec.stride
            h_out = (x.shape[2] - kh) // sh + 1
            w_out = (x.shape[3] - kw) // sw + 1
            out = np.full((x.shape[0], x.shape[1], h_out, w_out), -np.inf)
            for u in range(kh):
                for v in range(kw):
                    out = np.maximum(
                        out, x[:, :, u : u + h_out * sh : sh, v : v + w_out * sw : sw]
                    )
            return out
        if spec.kind == "flatten":
            return x.reshape(x.shape[0], -1)
        if spec.kind == "dense":
            return x @ self.weights[spec.name].T + self.biases[spec.name][None, :]
        raise AssertionError(f"unsupported kind {spec.kind}")

    def forward_from(self, layer_idx, activations):
        """Logits for a batch of activations fed to layer layer_idx + 1."""
        x = np.asarray(activations, dtype=np.float64)
        for spec in self.layers[layer_idx + 1 :]:
            x = self._apply(spec, x)
        return x

    def logits(self, image):
        x = np.asarray(image, dtype=np.float64)[None]
        x = (x - self.mean[None, :, None, None]) / self.std[None, :, None, None]
        for spec in self.layers:
            x = self._apply(spec, x)
        return x[0]


def fd_grad_wrt_layer(net, anchor, layer_idx, class_index, h=1e-3, batch=256):
    """Central finite differences of logit[class] w.r.t. one layer's output,
    evaluated at the given anchor activations."""
    anchor = np.asarray(anchor, dtype=np.float64)
    flat = anchor.ravel()
    n = flat.size
    grad = np.zeros(n)
    for start in range(0, n, batch):
        idx = np.arange(start, min(start + batch, n))
        block = np.repeat(flat[None, :], 2 * idx.size, axis=0)
        block[np.arange(idx.size), idx] += h
        block[idx.size + np.arange(idx.size), idx] -= h
        logits = net.forward_from(layer_idx, block.reshape((-1,) + anchor.shape))
        plus = logits[: idx.size, class_index]
        minus = logits[idx.size :, class_index]
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad.reshape(anchor.shape)


def relative_match_fraction(got, want, rel_tol=1e-3, abs_floor=1e-8):
    """Fraction of coordinates where got matches want within rel_tol
    (absolute floor for near-zero pairs)."""
    got = np.asarray(got, dtype=np.float64).ravel()
    want = np.asarray(want, dtype=np.float64).ravel()
    diff = np.abs(got - want)
    scale = np.maximum(np.abs(got), np.abs(want))
    ok = (diff <= abs_floor) | (diff <= rel_tol * scale)
    return float(ok.mean())
