"""Walk through the fusion pipeline on one fixture image.

Loads the committed bundle, explains the predicted class, and writes a
heatmap PNG for every stage so you can see what each one contributes:
the coarse GradCAM++ localization, the thresholded mask, the pixel-level
LRP map, their product, and the blurred final map.

Run from the repository root:

    python3 demos/explain_one_image.py [image_name]
"""

import sys
from pathlib import Path

import numpy as np

from camfuse import ExplanationConfig, explain, forward, load_image, load_model
from camfuse.render import render_heatmap

BUNDLE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "bundle"
OUT = Path(__file__).resolve().parent / "out"


def main() -> int:
    name = sys.argv[1] if len(sys.argv) > 1 else "triangle"
    model = load_model(BUNDLE / "model.json", BUNDLE / "model.bin")
    image = load_image(BUNDLE / "images" / f"{name}.png")

    # The model ships with its preprocessing; forward() applies it.
    trace = forward(model, image)
    cls = int(np.argmax(trace.logits))
    print(f"{name}: predicted class {cls}, logit {trace.logits[cls]:.4f}")

    # Defaults: tau=0.25 mask threshold, sigma=2.0 final blur,
    # alpha/beta=1/0 for conv LRP, epsilon=1e-6 for dense LRP.
    result = explain(model, image, cls, ExplanationConfig())

    OUT.mkdir(exist_ok=True)
    stages = {
        "gradcam_raw": result.gradcam_raw,
        "gradcam_mask": result.gradcam_mask,
        "lrp_avg": result.lrp_avg,
        "product": result.product,
        "final": result.final,
    }
    for stage, attribution in stages.items():
        path = OUT / f"{name}_{stage}.png"
        render_heatmap(attribution, path)
        values = attribution.values
        print(f"  {stage:13s} range [{values.min():+.4f}, {values.max():+.4f}]"
              f" -> {path.name}")

    # The mask bounds the product: wherever the mask is zero the fused
    # map is exactly zero, which is what concentrates the explanation.
    zero = result.gradcam_mask.values == 0
    print(f"  {int(zero.sum())} pixels masked out; "
          f"product is zero on all of them: "
          f"{bool(np.all(result.product.values[zero] == 0))}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
