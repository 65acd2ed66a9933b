"""Reference vectors recorded at export time.

For every bundled image we store the logits, the argmax class, and a
sketch of the top-logit gradient at the last conv output: an absolute-sum
checksum plus the ten largest-magnitude entries with their coordinates.
Enough to pin a reimplementation without shipping whole gradient tensors.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .export import layer_names
from .net import normalize

SPOT_COUNT = 10


def last_conv(net: nn.Sequential) -> tuple:
    """(index, name) of the final Conv2d in the chain."""
    found = None
    for idx, (name, child) in enumerate(zip(layer_names(net), net)):
        if isinstance(child, nn.Conv2d):
            found = (idx, name)
    if found is None:
        raise ValueError("net has no Conv2d layer")
    return found


def _grad_at_layer(net: nn.Sequential, layer_idx: int, image: np.ndarray) -> tuple:
    """Gradient of the top logit w.r.t. the output of net[layer_idx].

    Returns (logits, grad) as float32 arrays, batch dimension stripped.
    """
    x = normalize(image[None])
    captured = {}

    def hook(_module, _inputs, output):
        output.retain_grad()
        captured["out"] = output

    handle = net[layer_idx].register_forward_hook(hook)
    try:
        net.zero_grad(set_to_none=True)
        logits = net(x)
        top = logits[0].argmax()
        logits[0, top].backward()
    finally:
        handle.remove()
    grad = captured["out"].grad[0].detach().numpy().astype(np.float32)
    return logits[0].detach().numpy().astype(np.float32), grad


def record_references(net: nn.Sequential, images: dict) -> dict:
    """Build the reference.json payload for {name: [3,H,W] float32} images.

    Images must be the decoded PNG arrays, not the pre-quantization ones,
    so a consumer reading the bundled files reproduces these bits.
    """
    net.eval()
    layer_idx, layer_name = last_conv(net)
    entries = {}
    for name in sorted(images):
        logits, grad = _grad_at_layer(net, layer_idx, images[name])
        flat = np.abs(grad).ravel()
        order = np.argsort(flat, kind="stable")[::-1][:SPOT_COUNT]
        spots = []
        for flat_idx in order:
            c, r, col = np.unravel_index(int(flat_idx), grad.shape)
            spots.append({
                "channel": int(c), "row": int(r), "col": int(col),
                "value": float(grad[c, r, col]),
            })
        entries[name] = {
            "logits": [round(float(v), 6) for v in logits],
            "argmax": int(np.argmax(logits)),
            "grad": {"abs_sum": float(flat.sum()), "spots": spots},
        }
    return {"target_layer": layer_name, "images": entries}


def write_references(payload: dict, out_dir) -> Path:
    path = Path(out_dir) / "reference.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
