"""camfuse: hybrid GradCAM++ x LRP attribution on a self-contained CNN core.

The pipeline thresholds a GradCAM++ localization map into a bounding mask,
multiplies it into a channel-averaged composite-LRP relevance map, and
smooths the product with a Gaussian filter.  A benchmark harness scores
the fused method against plain GradCAM++ and plain LRP on five
attribution-quality metrics.
"""

from .attribution import AttributionMap, map_values
from .containers import ContainerError, load_tensor, save_tensor
from .fusion import Explanation, ExplanationConfig, explain, fuse, threshold_mask
from .gradcam import GradCamConfig, gradcam_pp
from .lrp import LrpConfig, channel_average, lrp_composite
from .metrics import (
    METHODS,
    METRIC_COLUMNS,
    BenchmarkItem,
    FaithfulnessSettings,
    InfidelitySettings,
    MetricConfig,
    MetricError,
    MetricReport,
    RandomLogitSettings,
    SensitivitySettings,
    avg_sensitivity,
    benchmark,
    faithfulness_correlation,
    infidelity,
    make_explainer,
    random_logit,
    relevance_rank_accuracy,
    sparseness,
)
from .model import (
    ForwardTrace,
    LayerSpec,
    Model,
    ModelFormatError,
    forward,
    grad_wrt_layer,
    load_model,
)
from .render import heatmap_rgb, load_image, load_mask, render_heatmap
from .ssim import mean_ssim
from .tensor import (
    ShapeError,
    bilinear_resize,
    conv2d_forward,
    dense_forward,
    gaussian_blur,
    maxpool2d_forward,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionMap",
    "BenchmarkItem",
    "ContainerError",
    "Explanation",
    "ExplanationConfig",
    "FaithfulnessSettings",
    "ForwardTrace",
    "GradCamConfig",
    "InfidelitySettings",
    "LayerSpec",
    "LrpConfig",
    "METHODS",
    "METRIC_COLUMNS",
    "MetricConfig",
    "MetricError",
    "MetricReport",
    "Model",
    "ModelFormatError",
    "RandomLogitSettings",
    "SensitivitySettings",
    "ShapeError",
    "avg_sensitivity",
    "benchmark",
    "bilinear_resize",
    "channel_average",
    "conv2d_forward",
    "dense_forward",
    "explain",
    "faithfulness_correlation",
    "forward",
    "fuse",
    "gaussian_blur",
    "grad_wrt_layer",
    "gradcam_pp",
    "heatmap_rgb",
    "infidelity",
    "load_image",
    "load_mask",
    "load_model",
    "load_tensor",
    "lrp_composite",
    "make_explainer",
    "map_values",
    "maxpool2d_forward",
    "mean_ssim",
    "random_logit",
    "relevance_rank_accuracy",
    "render_heatmap",
    "save_tensor",
    "sparseness",
    "threshold_mask",
]
