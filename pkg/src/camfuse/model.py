"""Sequential CNN container: loading, traced forward passes, backprop.

A network is stored as two files.  ``model.json`` describes the layer chain
and preprocessing; ``model.bin`` is one little-endian float32 blob holding
the concatenated parameter tensors (conv weights ``[out, in, kh, kw]``
row-major, dense weights ``[out, in]``), addressed by *element* offsets
from the manifest.  Layer kinds are ``conv2d``, ``relu``, ``maxpool2d``,
``flatten`` and ``dense``; the chain is strictly sequential and the last
layer must emit the pre-softmax logit vector.

Models are immutable after loading (parameter arrays are write-protected)
and safe to share across threads; each forward pass owns its trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tensor import (
    DTYPE,
    ArgmaxIndices,
    ShapeError,
    conv2d_forward,
    conv2d_input_grad,
    dense_forward,
    maxpool2d_forward,
)

FORMAT_VERSION = 1
LAYER_KINDS = ("conv2d", "relu", "maxpool2d", "flatten", "dense")


class ModelFormatError(ValueError):
    """Malformed or inconsistent manifest/blob pair."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the sequential chain.

    Geometry fields are populated per kind: conv2d uses channels, kernel,
    stride, padding and both offsets; maxpool2d uses kernel and stride;
    dense uses feature counts and both offsets; relu/flatten carry only
    their name.
    """

    kind: str
    name: str
    out_channels: Optional[int] = None
    in_channels: Optional[int] = None
    kernel: Optional[tuple[int, int]] = None
    stride: Optional[tuple[int, int]] = None
    padding: Optional[tuple[int, int]] = None
    out_features: Optional[int] = None
    in_features: Optional[int] = None
    weights_offset: Optional[int] = None
    bias_offset: Optional[int] = None


@dataclass(frozen=True)
class Model:
    """Loaded network: layer chain, parameters, preprocessing constants."""

    layers: tuple[LayerSpec, ...]
    weights: dict  # layer name -> float32 weight tensor
    biases: dict  # layer name -> float32 bias vector
    in_channels: int
    input_hw: tuple[int, int]
    mean: np.ndarray  # per-channel, applied before the first layer
    std: np.ndarray
    class_count: int

    def layer_index(self, name: str) -> int:
        for i, spec in enumerate(self.layers):
            if spec.name == name:
                return i
        raise KeyError(f"no layer named {name!r}")

    def last_conv_layer(self) -> str:
        for spec in reversed(self.layers):
            if spec.kind == "conv2d":
                return spec.name
        raise KeyError("model has no conv2d layer")


@dataclass(frozen=True)
class ForwardTrace:
    """Cached activations of one forward pass.

    ``outputs[i]`` is the output of layer ``i``; the raw input image sits
    conceptually at index -1 (``image``), with its normalized counterpart
    (``normalized``) being what the first layer actually consumed.  Pool
    layers additionally record their argmax indices for winner-take-all
    relevance routing.
    """

    image: np.ndarray
    normalized: np.ndarray
    outputs: tuple
    pool_argmax: dict = field(default_factory=dict)  # layer index -> ArgmaxIndices

    @property
    def logits(self) -> np.ndarray:
        return self.outputs[-1]

    def input_of(self, layer_index: int) -> np.ndarray:
        """Activation consumed by layer ``layer_index``."""
        if layer_index == 0:
            return self.normalized
        return self.outputs[layer_index - 1]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=DTYPE)
    a.flags.writeable = False
    return a


def _require(manifest_entry: dict, key: str, name: str):
    if key not in manifest_entry:
        raise ModelFormatError(f"layer {name!r}: missing field {key!r}")
    return manifest_entry[key]


def _int_pair(v, name: str, key: str) -> tuple[int, int]:
    try:
        a, b = v
        return (int(a), int(b))
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"layer {name!r}: field {key!r} must be a pair") from exc


def _parse_layer(entry: dict, position: int) -> LayerSpec:
    if not isinstance(entry, dict):
        raise ModelFormatError(f"layer #{position}: entry is not an object")
    kind = entry.get("kind")
    name = entry.get("name")
    if not isinstance(name, str) or not name:
        raise ModelFormatError(f"layer #{position}: missing or empty name")
    if kind not in LAYER_KINDS:
        raise ModelFormatError(
            f"layer {name!r}: unknown kind {kind!r}, expected one of {LAYER_KINDS}"
        )
    if kind == "conv2d":
        return LayerSpec(
            kind=kind,
            name=name,
            out_channels=int(_require(entry, "out_channels", name)),
            in_channels=int(_require(entry, "in_channels", name)),
            kernel=_int_pair(_require(entry, "kernel", name), name, "kernel"),
            stride=_int_pair(_require(entry, "stride", name), name, "stride"),
            padding=_int_pair(_require(entry, "padding", name), name, "padding"),
            weights_offset=int(_require(entry, "weights_offset", name)),
            bias_offset=int(_require(entry, "bias_offset", name)),
        )
    if kind == "maxpool2d":
        return LayerSpec(
            kind=kind,
            name=name,
            kernel=_int_pair(_require(entry, "kernel", name), name, "kernel"),
            stride=_int_pair(_require(entry, "stride", name), name, "stride"),
        )
    if kind == "dense":
        return LayerSpec(
            kind=kind,
            name=name,
            out_features=int(_require(entry, "out_features", name)),
            in_features=int(_require(entry, "in_features", name)),
            weights_offset=int(_require(entry, "weights_offset", name)),
            bias_offset=int(_require(entry, "bias_offset", name)),
        )
    return LayerSpec(kind=kind, name=name)


def _take_segment(
    blob: np.ndarray, offset: int, shape: tuple, layer: str, what: str
) -> np.ndarray:
    n = int(np.prod(shape))
    if offset < 0 or offset + n > blob.size:
        raise ModelFormatError(
            f"layer {layer!r}: {what} expects elements "
            f"[{offset}, {offset + n}) but blob holds {blob.size}"
        )
    return _freeze(blob[offset : offset + n].reshape(shape))


def _validate_chain(layers, in_channels, input_hw, class_count):
    """Walk the declared geometry and reject inconsistent chains."""
    shape: tuple = (in_channels,) + tuple(input_hw)
    for spec in layers:
        if spec.kind == "conv2d":
            if len(shape) != 3:
                raise ModelFormatError(
                    f"layer {spec.name!r}: conv2d needs a [C,H,W] input, "
                    f"chain provides {shape}"
                )
            c, h, w = shape
            if c != spec.in_channels:
                raise ModelFormatError(
                    f"layer {spec.name!r}: expects {spec.in_channels} input "
                    f"channels, chain provides {c}"
                )
            kh, kw = spec.kernel
            sh, sw = spec.stride
            ph, pw = spec.padding
            if (h + 2 * ph - kh) % sh or (w + 2 * pw - kw) % sw:
                raise ModelFormatError(
                    f"layer {spec.name!r}: non-integral output extent for "
                    f"input {h}x{w}"
                )
            shape = (
                spec.out_channels,
                (h + 2 * ph - kh) // sh + 1,
                (w + 2 * pw - kw) // sw + 1,
            )
        elif spec.kind == "maxpool2d":
            if len(shape) != 3:
                raise ModelFormatError(
                    f"layer {spec.name!r}: maxpool2d needs a [C,H,W] input"
                )
            c, h, w = shape
            kh, kw = spec.kernel
            sh, sw = spec.stride
            if kh > h or kw > w:
                raise ModelFormatError(
                    f"layer {spec.name!r}: pool window {kh}x{kw} larger than "
                    f"input {h}x{w}"
                )
            shape = (c, (h - kh) // sh + 1, (w - kw) // sw + 1)
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind == "dense":
            if len(shape) != 1:
                raise ModelFormatError(
                    f"layer {spec.name!r}: dense needs a flat input, "
                    f"chain provides {shape}"
                )
            if shape[0] != spec.in_features:
                raise ModelFormatError(
                    f"layer {spec.name!r}: expects {spec.in_features} input "
                    f"features, chain provides {shape[0]}"
                )
            shape = (spec.out_features,)
        # relu keeps the shape
    if shape != (class_count,):
        raise ModelFormatError(
            f"chain ends with shape {shape}, expected logits of length {class_count}"
        )


def load_model(manifest_path, blob_path) -> Model:
    """Load and fully validate a manifest + blob pair.

    Raises ``ModelFormatError`` naming the offending layer for unknown
    kinds, shape/offset inconsistencies, truncated blobs, and version
    mismatches.  File-system errors propagate as ``OSError``.
    """
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"manifest is not valid JSON: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"format version mismatch: expected {FORMAT_VERSION}, got {version!r}"
        )
    inp = manifest.get("input")
    if not isinstance(inp, dict):
        raise ModelFormatError("manifest missing 'input' section")
    channels = int(inp.get("channels", 0))
    height = int(inp.get("height", 0))
    width = int(inp.get("width", 0))
    if channels < 1 or height < 1 or width < 1:
        raise ModelFormatError(
            f"invalid input geometry {channels}x{height}x{width}"
        )
    mean = np.asarray(inp.get("mean"), dtype=DTYPE)
    std = np.asarray(inp.get("std"), dtype=DTYPE)
    if mean.shape != (channels,) or std.shape != (channels,):
        raise ModelFormatError(
            f"mean/std must each have {channels} entries, got "
            f"{mean.shape} and {std.shape}"
        )
    if np.any(std == 0):
        raise ModelFormatError("std contains zero entries")
    class_count = int(manifest.get("class_count", 0))
    if class_count < 1:
        raise ModelFormatError(f"invalid class_count {manifest.get('class_count')!r}")

    entries = manifest.get("layers")
    if not isinstance(entries, list) or not entries:
        raise ModelFormatError("manifest declares no layers")
    layers = tuple(_parse_layer(e, i) for i, e in enumerate(entries))
    names = [spec.name for spec in layers]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ModelFormatError(f"duplicate layer names: {dup}")

    blob = np.fromfile(blob_path, dtype="<f4")

    weights: dict = {}
    biases: dict = {}
    declared = 0
    for spec in layers:
        if spec.kind == "conv2d":
            wshape = (spec.out_channels, spec.in_channels) + spec.kernel
            weights[spec.name] = _take_segment(
                blob, spec.weights_offset, wshape, spec.name, "weights"
            )
            biases[spec.name] = _take_segment(
                blob, spec.bias_offset, (spec.out_channels,), spec.name, "bias"
            )
            declared += int(np.prod(wshape)) + spec.out_channels
        elif spec.kind == "dense":
            wshape = (spec.out_features, spec.in_features)
            weights[spec.name] = _take_segment(
                blob, spec.weights_offset, wshape, spec.name, "weights"
            )
            biases[spec.name] = _take_segment(
                blob, spec.bias_offset, (spec.out_features,), spec.name, "bias"
            )
            declared += int(np.prod(wshape)) + spec.out_features
    if declared != blob.size:
        raise ModelFormatError(
            f"blob holds {blob.size} elements but the manifest declares "
            f"{declared} (last layer {layers[-1].name!r})"
        )

    _validate_chain(layers, channels, (height, width), class_count)
    return Model(
        layers=layers,
        weights=weights,
        biases=biases,
        in_channels=channels,
        input_hw=(height, width),
        mean=_freeze(mean),
        std=_freeze(std),
        class_count=class_count,
    )


def forward(model: Model, image: np.ndarray) -> ForwardTrace:
    """Run the network on a raw [C,H,W] image with pixel values in [0, 1].

    Per-channel mean/std normalization is applied internally before the
    first layer.  The returned trace holds every layer's output; the final
    entry is the logit vector.
    """
    image = np.asarray(image, dtype=DTYPE)
    expected = (model.in_channels,) + model.input_hw
    if image.shape != expected:
        raise ShapeError(f"image shape {image.shape} does not match {expected}")
    x = (image - model.mean[:, None, None]) / model.std[:, None, None]
    normalized = _freeze(x)

    outputs = []
    pool_argmax: dict[int, ArgmaxIndices] = {}
    for i, spec in enumerate(model.layers):
        if spec.kind == "conv2d":
            x = conv2d_forward(
                x,
                model.weights[spec.name],
                model.biases[spec.name],
                spec.stride,
                spec.padding,
            )
        elif spec.kind == "relu":
            x = np.maximum(x, 0)
        elif spec.kind == "maxpool2d":
            x, argmax = maxpool2d_forward(x, spec.kernel, spec.stride)
            pool_argmax[i] = argmax
        elif spec.kind == "flatten":
            x = x.reshape(-1)
        elif spec.kind == "dense":
            x = dense_forward(x, model.weights[spec.name], model.biases[spec.name])
        outputs.append(_freeze(x))
    return ForwardTrace(
        image=_freeze(image),
        normalized=normalized,
        outputs=tuple(outputs),
        pool_argmax=pool_argmax,
    )


def _backward_through(
    model: Model, trace: ForwardTrace, layer_index: int, grad: np.ndarray
) -> np.ndarray:
    """Map a gradient w.r.t. layer ``layer_index``'s output to its input."""
    spec = model.layers[layer_index]
    if spec.kind == "conv2d":
        a = trace.input_of(layer_index)
        return conv2d_input_grad(
            grad, model.weights[spec.name], spec.stride, spec.padding, a.shape[1:]
        )
    if spec.kind == "relu":
        out = trace.outputs[layer_index]
        return np.where(out > 0, grad, DTYPE(0.0))
    if spec.kind == "maxpool2d":
        argmax = trace.pool_argmax[layer_index]
        flat = np.zeros(int(np.prod(argmax.input_shape)), dtype=DTYPE)
        np.add.at(flat, argmax.flat.ravel(), grad.ravel())
        return flat.reshape(argmax.input_shape)
    if spec.kind == "flatten":
        return grad.reshape(trace.input_of(layer_index).shape)
    if spec.kind == "dense":
        return np.ascontiguousarray(model.weights[spec.name].T @ grad, dtype=DTYPE)
    raise ModelFormatError(f"layer {spec.name!r}: unsupported kind {spec.kind!r}")


def backprop_seed(
    model: Model, trace: ForwardTrace, seed: np.ndarray, layer_name: str
) -> np.ndarray:
    """Reverse-mode propagation of an arbitrary logit-space seed vector."""
    target = model.layer_index(layer_name)
    grad = np.asarray(seed, dtype=DTYPE)
    if grad.shape != trace.logits.shape:
        raise ShapeError(
            f"seed shape {grad.shape} does not match logits {trace.logits.shape}"
        )
    for i in range(len(model.layers) - 1, target, -1):
        grad = _backward_through(model, trace, i, grad)
    return grad


def grad_wrt_layer(
    model: Model, trace: ForwardTrace, class_index: int, layer_name: str
) -> np.ndarray:
    """Gradient of one pre-softmax logit w.r.t. a layer's output activations.

    Uses the cached trace: relu gates come from stored signs, pooling routes
    through recorded argmax positions, conv/dense apply their transpose
    rules.  The trace itself is never mutated.
    """
    if not 0 <= class_index < model.class_count:
        raise IndexError(
            f"class index {class_index} out of range for {model.class_count} classes"
        )
    seed = np.zeros(model.class_count, dtype=DTYPE)
    seed[class_index] = 1.0
    return backprop_seed(model, trace, seed, layer_name)
