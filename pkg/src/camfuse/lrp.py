"""Composite layer-wise relevance propagation.

Relevance seeded at the target logit is redistributed backward with a rule
per layer kind: the z-rule (epsilon-stabilized) for dense layers, the
alpha/beta rule for conv layers, winner-take-all routing through max
pooling, and identity pass-through for relu and flatten.  The result is a
signed per-channel relevance field over the network input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import AttributionMap
from .model import ForwardTrace, Model
from .tensor import (
    DTYPE,
    ArgmaxIndices,
    ShapeError,
    conv2d_forward,
    conv2d_input_grad,
)

# Denominator guard for the alpha/beta rule; keeps the split positive and
# negative parts safely away from zero without visibly shifting relevance.
STABILIZER = DTYPE(1e-9)


@dataclass(frozen=True)
class LrpConfig:
    """z-rule stabilizer and alpha/beta split weights (alpha - beta = 1)."""

    epsilon: float = 1e-6
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if abs(self.alpha - self.beta - 1.0) > 1e-9:
            raise ValueError(
                f"alpha - beta must equal 1, got {self.alpha} - {self.beta}"
            )


def _safe_div(num: np.ndarray, denom: np.ndarray) -> np.ndarray:
    """Elementwise num/denom with 0 wherever the denominator is exactly 0."""
    out = np.zeros_like(num)
    np.divide(num, denom, out=out, where=denom != 0)
    return out


def lrp_dense_z(
    a: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    r_out: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """z-rule for an affine layer.

    With z_k = sum_j a_j w_kj + b_k, each input takes
    R_j = sum_k a_j w_kj / (z_k + eps * sign(z_k)) * R_k, where sign(0) is
    treated as +1.  Outputs with zero stabilized denominator contribute
    nothing (their relevance is necessarily zero in a consistent pass).
    """
    if weights.ndim != 2 or a.shape != weights.shape[1:] or r_out.shape != bias.shape:
        raise ShapeError(
            f"z-rule shapes inconsistent: a{a.shape}, weights{weights.shape}, "
            f"bias{bias.shape}, r_out{r_out.shape}"
        )
    z = weights @ a + bias
    sign = np.where(z >= 0, DTYPE(1.0), DTYPE(-1.0))
    s = _safe_div(r_out, z + DTYPE(epsilon) * sign)
    return (a * (weights.T @ s)).astype(DTYPE)


def lrp_conv_alphabeta(
    a: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    r_out: np.ndarray,
    alpha: float,
    beta: float,
    stride=(1, 1),
    padding=(0, 0),
) -> np.ndarray:
    """alpha/beta rule for a conv layer.

    Pre-activations are split into a positive part z+ (positive
    weight-activation products plus the positive bias part) and a negative
    part z-; relevance flows as

        R_j = sum_k [ alpha * (a_j w_jk)+ / z+_k  -  beta * (a_j w_jk)- / z-_k ] R_k

    with each denominator nudged away from zero by a tiny stabilizer.
    """
    if abs(alpha - beta - 1.0) > 1e-9:
        raise ValueError(f"alpha - beta must equal 1, got {alpha} - {beta}")
    ap = np.maximum(a, 0)
    an = np.minimum(a, 0)
    wp = np.maximum(weights, 0)
    wn = np.minimum(weights, 0)
    zero_bias = np.zeros_like(bias)

    z_pos = (
        conv2d_forward(ap, wp, zero_bias, stride, padding)
        + conv2d_forward(an, wn, zero_bias, stride, padding)
        + np.maximum(bias, 0)[:, None, None]
    )
    z_neg = (
        conv2d_forward(ap, wn, zero_bias, stride, padding)
        + conv2d_forward(an, wp, zero_bias, stride, padding)
        + np.minimum(bias, 0)[:, None, None]
    )
    if r_out.shape != z_pos.shape:
        raise ShapeError(
            f"r_out shape {r_out.shape} does not match layer output {z_pos.shape}"
        )

    s_pos = DTYPE(alpha) * r_out / (z_pos + STABILIZER)
    s_neg = DTYPE(beta) * r_out / (z_neg - STABILIZER)
    hw = a.shape[1:]
    r_in = (
        ap * conv2d_input_grad(s_pos, wp, stride, padding, hw)
        + an * conv2d_input_grad(s_pos, wn, stride, padding, hw)
        - ap * conv2d_input_grad(s_neg, wn, stride, padding, hw)
        - an * conv2d_input_grad(s_neg, wp, stride, padding, hw)
    )
    return r_in.astype(DTYPE)


def lrp_maxpool(argmax: ArgmaxIndices, r_out: np.ndarray) -> np.ndarray:
    """Winner-take-all: each pooled cell's relevance lands on its argmax."""
    if r_out.shape != argmax.flat.shape:
        raise ShapeError(
            f"r_out shape {r_out.shape} does not match pooled shape "
            f"{argmax.flat.shape}"
        )
    flat = np.zeros(int(np.prod(argmax.input_shape)), dtype=DTYPE)
    np.add.at(flat, argmax.flat.ravel(), r_out.ravel())
    return flat.reshape(argmax.input_shape)


def lrp_composite(
    model: Model,
    trace: ForwardTrace,
    class_index: int,
    config: LrpConfig = LrpConfig(),
) -> np.ndarray:
    """Propagate the target logit back to the input as per-channel relevance.

    The seed at the logits layer is one-hot at ``class_index`` scaled by the
    logit value; dense layers apply the z-rule, conv layers the alpha/beta
    rule, max pooling routes to the recorded winners, relu and flatten pass
    relevance through unchanged (flatten only reshapes).
    """
    if not 0 <= class_index < model.class_count:
        raise IndexError(
            f"class index {class_index} out of range for {model.class_count} classes"
        )
    r = np.zeros_like(trace.logits)
    r[class_index] = trace.logits[class_index]

    for i in range(len(model.layers) - 1, -1, -1):
        spec = model.layers[i]
        a = trace.input_of(i)
        if spec.kind == "dense":
            r = lrp_dense_z(
                a,
                model.weights[spec.name],
                model.biases[spec.name],
                r,
                config.epsilon,
            )
        elif spec.kind == "conv2d":
            r = lrp_conv_alphabeta(
                a,
                model.weights[spec.name],
                model.biases[spec.name],
                r,
                config.alpha,
                config.beta,
                spec.stride,
                spec.padding,
            )
        elif spec.kind == "maxpool2d":
            r = lrp_maxpool(trace.pool_argmax[i], r)
        elif spec.kind == "flatten":
            r = r.reshape(a.shape)
        elif spec.kind == "relu":
            pass  # relevance passes through unchanged
        else:
            raise ValueError(f"unsupported layer kind {spec.kind!r} in chain")
    return r


def channel_average(relevance: np.ndarray) -> AttributionMap:
    """Mean over the channel axis; sign is preserved, nothing is normalized."""
    if relevance.ndim != 3:
        raise ShapeError(f"expected [C,H,W] relevance, got shape {relevance.shape}")
    return AttributionMap(
        values=relevance.mean(axis=0, dtype=np.float64).astype(DTYPE), kind="lrp"
    )
