"""Evaluate one explanation with each of the six metrics.

Shows the metrics as plain library calls, outside the benchmark harness,
so the inputs and conventions are visible: which ones need the model,
which need an explainer function, and which only need the map itself.

    python3 demos/metric_tour.py
"""

from pathlib import Path

import numpy as np

from camfuse import load_image, load_mask, load_model
from camfuse.metrics import (
    MetricConfig,
    avg_sensitivity,
    faithfulness_correlation,
    infidelity,
    make_explainer,
    random_logit,
    relevance_rank_accuracy,
    sparseness,
)
from camfuse.model import forward

BUNDLE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "bundle"


def main() -> int:
    model = load_model(BUNDLE / "model.json", BUNDLE / "model.bin")
    image = load_image(BUNDLE / "images" / "disk.png")
    mask = load_mask(BUNDLE / "masks" / "disk.png")
    cls = int(np.argmax(forward(model, image).logits))
    config = MetricConfig(seed=0)

    # An explainer is just callable(image, class) -> AttributionMap.
    # make_explainer wraps the three built-in methods that way; it takes
    # an ExplanationConfig, not the metric sampling config.
    explainer = make_explainer(model, "proposed")
    attribution = explainer(image, cls).values

    # Perturbation metrics re-run the model, so they take it explicitly.
    print(f"class {cls}, attribution extents {attribution.shape}")
    print(f"infidelity              {infidelity(model, image, cls, attribution, config):.6f}")
    print(f"faithfulness correlation {faithfulness_correlation(model, image, cls, attribution, config):+.6f}")

    # Sensitivity perturbs the input and re-explains, so it takes the
    # explainer rather than a fixed map.  Lower is more robust.
    print(f"avg sensitivity         {avg_sensitivity(explainer, model, image, cls, config):.6f}")

    # Random logit compares this class's explanation against a randomly
    # drawn other class; near 0 means the method ignores the class.
    print(f"random logit            {random_logit(explainer, model, image, cls, config):.6f}")

    # The last two need no model at all.
    print(f"sparseness              {sparseness(attribution):.6f}")
    print(f"rank accuracy vs mask   {relevance_rank_accuracy(attribution, mask):.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
