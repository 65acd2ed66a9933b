"""Serialize a torch Sequential to the engine's manifest+blob pair.

Layout contract: ``model.json`` describes input geometry, preprocessing,
class count and the layer chain; ``model.bin`` is little-endian float32,
conv weights [out, in, kh, kw] row-major, dense weights [out, in], each
tensor addressed by its element offset.  Bias-free layers are written as
explicit zero bias vectors so the reader needs no optional-bias branch.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .net import MEAN, STD

FORMAT_VERSION = 1


class ExportError(ValueError):
    """A checkpoint contains something the weight format cannot express."""


def _pair(v) -> tuple:
    if isinstance(v, (tuple, list)):
        return (int(v[0]), int(v[1]))
    return (int(v), int(v))


def layer_names(net: nn.Sequential) -> list:
    """Stable names by kind: conv1, relu1, pool1, conv2, ..."""
    prefixes = {
        nn.Conv2d: "conv", nn.ReLU: "relu", nn.MaxPool2d: "pool",
        nn.Flatten: "flatten", nn.Linear: "dense",
    }
    counts: dict = {}
    names = []
    for child in net:
        prefix = prefixes.get(type(child))
        if prefix is None:
            prefix = type(child).__name__.lower()
        counts[prefix] = counts.get(prefix, 0) + 1
        names.append(f"{prefix}{counts[prefix]}")
    return names


def _check_supported(position: int, name: str, layer: nn.Module):
    if isinstance(layer, nn.Conv2d):
        if layer.groups != 1:
            raise ExportError(f"layer {position} ({name}): grouped conv unsupported")
        if _pair(layer.dilation) != (1, 1):
            raise ExportError(f"layer {position} ({name}): dilation unsupported")
        if layer.padding_mode != "zeros":
            raise ExportError(
                f"layer {position} ({name}): padding mode "
                f"{layer.padding_mode!r} unsupported"
            )
        return
    if isinstance(layer, nn.MaxPool2d):
        if _pair(layer.padding) != (0, 0):
            raise ExportError(f"layer {position} ({name}): padded pooling unsupported")
        if _pair(layer.dilation) != (1, 1):
            raise ExportError(f"layer {position} ({name}): dilation unsupported")
        if layer.ceil_mode:
            raise ExportError(f"layer {position} ({name}): ceil_mode unsupported")
        return
    if isinstance(layer, nn.Flatten):
        if layer.start_dim != 1 or layer.end_dim != -1:
            raise ExportError(
                f"layer {position} ({name}): partial flatten unsupported"
            )
        return
    if isinstance(layer, (nn.ReLU, nn.Linear)):
        return
    raise ExportError(
        f"layer {position} ({type(layer).__name__}): unsupported kind"
    )


def export_model(
    net: nn.Sequential,
    out_dir,
    input_hw=(32, 32),
    in_channels=3,
    mean=MEAN,
    std=STD,
) -> tuple:
    """Write model.json + model.bin for a trained Sequential.

    Refuses checkpoints containing unsupported layer kinds or options,
    naming the offending layer.  Returns (manifest_path, blob_path).
    """
    if not isinstance(net, nn.Sequential):
        raise ExportError(f"expected nn.Sequential, got {type(net).__name__}")
    names = layer_names(net)
    for position, (name, child) in enumerate(zip(names, net)):
        _check_supported(position, name, child)

    last_linear = None
    for child in net:
        if isinstance(child, nn.Linear):
            last_linear = child
    if last_linear is None:
        raise ExportError("checkpoint has no Linear layer; no logits to export")

    segments = []
    offset = 0

    def put(tensor: torch.Tensor) -> int:
        nonlocal offset
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype="<f4")
        segments.append(arr)
        here = offset
        offset += arr.size
        return here

    def put_bias(layer, out_features: int) -> int:
        if layer.bias is None:
            return put(torch.zeros(out_features))
        return put(layer.bias)

    layers_json = []
    for name, child in zip(names, net):
        if isinstance(child, nn.Conv2d):
            layers_json.append({
                "kind": "conv2d", "name": name,
                "out_channels": child.out_channels,
                "in_channels": child.in_channels,
                "kernel": list(_pair(child.kernel_size)),
                "stride": list(_pair(child.stride)),
                "padding": list(_pair(child.padding)),
                "weights_offset": put(child.weight),
                "bias_offset": put_bias(child, child.out_channels),
            })
        elif isinstance(child, nn.ReLU):
            layers_json.append({"kind": "relu", "name": name})
        elif isinstance(child, nn.MaxPool2d):
            stride = child.stride if child.stride is not None else child.kernel_size
            layers_json.append({
                "kind": "maxpool2d", "name": name,
                "kernel": list(_pair(child.kernel_size)),
                "stride": list(_pair(stride)),
            })
        elif isinstance(child, nn.Flatten):
            layers_json.append({"kind": "flatten", "name": name})
        elif isinstance(child, nn.Linear):
            layers_json.append({
                "kind": "dense", "name": name,
                "out_features": child.out_features,
                "in_features": child.in_features,
                "weights_offset": put(child.weight),
                "bias_offset": put_bias(child, child.out_features),
            })

    manifest = {
        "format_version": FORMAT_VERSION,
        "input": {
            "channels": in_channels,
            "height": int(input_hw[0]),
            "width": int(input_hw[1]),
            "mean": [float(v) for v in mean],
            "std": [float(v) for v in std],
        },
        "class_count": last_linear.out_features,
        "layers": layers_json,
    }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "model.json"
    blob_path = out_dir / "model.bin"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    blob_path.write_bytes(b"".join(s.tobytes() for s in segments))
    return manifest_path, blob_path
