"""Attribution-quality metrics and the method-comparison harness.

Five measures drive the benchmark table: average sensitivity (robustness,
lower is better), faithfulness correlation, relevance rank accuracy
(localisation), sparseness via the Gini index (complexity), and the random
logit distance (randomisation).  Infidelity is available as an optional
sixth column.  Every Monte-Carlo estimate draws from a generator derived
from (seed, image, method, metric), so results are independent of
evaluation order and safe to parallelize across images or methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .attribution import AttributionMap, map_values
from .fusion import ExplanationConfig, explain
from .gradcam import gradcam_pp
from .lrp import channel_average, lrp_composite
from .model import Model, forward
from .ssim import mean_ssim
from .tensor import ShapeError, bilinear_resize

METHODS = ("proposed", "gradcam", "lrp")
METRIC_COLUMNS = (
    "robustness",
    "faithfulness",
    "localisation",
    "complexity",
    "randomisation",
)
INFIDELITY_COLUMN = "infidelity"

# An explainer maps (raw image, class index) to an attribution map.
Explainer = Callable[[np.ndarray, int], AttributionMap]


class MetricError(ValueError):
    """A metric could not be evaluated for the given inputs."""


@dataclass(frozen=True)
class InfidelitySettings:
    samples: int = 128
    perturb_scale: float = 0.2


@dataclass(frozen=True)
class FaithfulnessSettings:
    subsets: int = 100
    subset_size: int = 56
    baseline: float = 0.0


@dataclass(frozen=True)
class SensitivitySettings:
    samples: int = 16
    radius: float = 0.05


@dataclass(frozen=True)
class RandomLogitSettings:
    ssim_window: int = 7


@dataclass(frozen=True)
class MetricConfig:
    """Seed plus per-metric sample counts and perturbation scales."""

    seed: int = 0
    infidelity: InfidelitySettings = field(default_factory=InfidelitySettings)
    faithfulness: FaithfulnessSettings = field(default_factory=FaithfulnessSettings)
    sensitivity: SensitivitySettings = field(default_factory=SensitivitySettings)
    random_logit: RandomLogitSettings = field(default_factory=RandomLogitSettings)

    def __post_init__(self):
        counts = (
            self.infidelity.samples,
            self.faithfulness.subsets,
            self.faithfulness.subset_size,
            self.sensitivity.samples,
            self.random_logit.ssim_window,
        )
        if any(c < 1 for c in counts):
            raise ValueError(f"all counts must be positive, got {counts}")
        if self.sensitivity.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.sensitivity.radius}")


def _rng_or_seed(rng, seed: int) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(seed)


def _class_logit(model: Model, image: np.ndarray, class_index: int) -> float:
    return float(forward(model, image).logits[class_index])


def _check_extents(phi: np.ndarray, image: np.ndarray):
    if phi.shape != image.shape[1:]:
        raise ShapeError(
            f"attribution {phi.shape} does not match image pixels {image.shape[1:]}"
        )


def infidelity(
    model: Model,
    image: np.ndarray,
    class_index: int,
    attribution,
    cfg: MetricConfig = MetricConfig(),
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Expected squared gap between perturbation-times-attribution and the
    actual drop of the class logit under that perturbation.

    Perturbations are iid per-pixel Gaussians (scale
    ``cfg.infidelity.perturb_scale``) subtracted equally from all channels.
    Lower is better; an explanation equal to the exact input gradient of a
    linear model scores zero.
    """
    phi = map_values(attribution).astype(np.float64)
    _check_extents(phi, image)
    rng = _rng_or_seed(rng, cfg.seed)
    scale = cfg.infidelity.perturb_scale
    f0 = _class_logit(model, image, class_index)
    total = 0.0
    for _ in range(cfg.infidelity.samples):
        noise = rng.normal(0.0, scale, size=phi.shape)
        drop = f0 - _class_logit(model, image - noise[None, :, :], class_index)
        dot = float(np.sum(noise * phi))
        total += (dot - drop) ** 2
    return total / cfg.infidelity.samples


def faithfulness_correlation(
    model: Model,
    image: np.ndarray,
    class_index: int,
    attribution,
    cfg: MetricConfig = MetricConfig(),
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Pearson correlation between attribution sums over random pixel
    subsets and the logit drop when those pixels are set to the baseline.
    """
    phi = map_values(attribution).astype(np.float64)
    _check_extents(phi, image)
    n_pixels = phi.size
    if cfg.faithfulness.subset_size >= n_pixels:
        raise MetricError(
            f"subset size {cfg.faithfulness.subset_size} must be smaller "
            f"than the pixel count {n_pixels}"
        )
    rng = _rng_or_seed(rng, cfg.seed)
    baseline = cfg.faithfulness.baseline
    f0 = _class_logit(model, image, class_index)

    sums = np.empty(cfg.faithfulness.subsets)
    drops = np.empty(cfg.faithfulness.subsets)
    flat_phi = phi.ravel()
    for t in range(cfg.faithfulness.subsets):
        idx = rng.choice(n_pixels, size=cfg.faithfulness.subset_size, replace=False)
        perturbed = np.array(image)
        view = perturbed.reshape(image.shape[0], -1)
        view[:, idx] = baseline
        sums[t] = flat_phi[idx].sum()
        drops[t] = f0 - _class_logit(model, perturbed, class_index)
    if np.std(sums) == 0 or np.std(drops) == 0:
        raise MetricError("degenerate correlation: a series has zero variance")
    return float(np.corrcoef(sums, drops)[0, 1])


def avg_sensitivity(
    explainer: Explainer,
    model: Model,
    image: np.ndarray,
    class_index: int,
    cfg: MetricConfig = MetricConfig(),
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Mean relative change of the explanation under small uniform input
    noise; low values mean the explanation is locally stable.
    """
    rng = _rng_or_seed(rng, cfg.seed)
    radius = cfg.sensitivity.radius
    base = map_values(explainer(image, class_index)).astype(np.float64)
    base_norm = float(np.linalg.norm(base))
    if base_norm == 0:
        raise MetricError("zero-norm base explanation")
    total = 0.0
    for _ in range(cfg.sensitivity.samples):
        delta = rng.uniform(-radius, radius, size=base.shape)
        shifted = map_values(explainer(image + delta[None, :, :], class_index))
        total += float(np.linalg.norm(base - shifted.astype(np.float64))) / base_norm
    return total / cfg.sensitivity.samples


def sparseness(attribution) -> float:
    """Gini index of the absolute attribution values.

    0 for a perfectly uniform vector, approaching 1 as the mass concentrates
    on few pixels; invariant under permutation and nonzero scaling.  An
    all-zero vector scores 0 by convention.
    """
    a = np.abs(map_values(attribution).astype(np.float64).ravel())
    n = a.size
    if n == 0:
        raise MetricError("empty attribution")
    total = a.sum()
    if total == 0:
        return 0.0
    a = np.sort(a)
    k = np.arange(1, n + 1, dtype=np.float64)
    return float(((2.0 * k - n - 1.0) * a).sum() / (n * total))


def relevance_rank_accuracy(attribution, gt_mask) -> float:
    """Fraction of the top-|GT| attributed pixels that fall inside the
    ground-truth mask (ties broken by row-major order)."""
    phi = map_values(attribution)
    mask = np.asarray(gt_mask).astype(bool)
    if mask.shape != phi.shape:
        raise ShapeError(
            f"mask shape {mask.shape} does not match attribution {phi.shape}"
        )
    k = int(mask.sum())
    if k == 0:
        raise MetricError("empty ground-truth mask")
    order = np.argsort(-phi.ravel(), kind="stable")
    top_k = order[:k]
    return float(mask.ravel()[top_k].sum()) / k


def random_logit(
    explainer: Explainer,
    model: Model,
    image: np.ndarray,
    class_index: int,
    cfg: MetricConfig = MetricConfig(),
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Structural dissimilarity between the explanation for the target
    class and for a uniformly drawn non-target class.

    Both maps are min-max scaled jointly to [0, 1]; the result is
    1 - SSIM clipped into [0, 1], so class-sensitive explainers score high.
    """
    if model.class_count < 2:
        raise MetricError("random-logit needs at least 2 classes")
    rng = _rng_or_seed(rng, cfg.seed)
    other = int(rng.integers(0, model.class_count - 1))
    if other >= class_index:
        other += 1
    a = map_values(explainer(image, class_index)).astype(np.float64)
    b = map_values(explainer(image, other)).astype(np.float64)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 0.0  # both maps are one identical constant
    a = (a - lo) / (hi - lo)
    b = (b - lo) / (hi - lo)
    ssim = mean_ssim(a, b, cfg.random_logit.ssim_window)
    return float(np.clip(1.0 - ssim, 0.0, 1.0))


def make_explainer(
    model: Model, method: str, config: ExplanationConfig = ExplanationConfig()
) -> Explainer:
    """Explainer callable for one of the benchmark methods."""
    h, w = model.input_hw
    if method == "proposed":
        return lambda image, cls: explain(model, image, cls, config).final
    if method == "gradcam":

        def run_gradcam(image, cls):
            trace = forward(model, image)
            cam = gradcam_pp(model, trace, cls, config.gradcam)
            return AttributionMap(
                values=bilinear_resize(cam.values, h, w), kind="gradcam"
            )

        return run_gradcam
    if method == "lrp":

        def run_lrp(image, cls):
            trace = forward(model, image)
            return channel_average(lrp_composite(model, trace, cls, config.lrp))

        return run_lrp
    raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")


@dataclass(frozen=True)
class BenchmarkItem:
    """One evaluation image with an optional ground-truth mask."""

    name: str
    image: np.ndarray
    mask: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MetricReport:
    """Per-method metric table: per-image values plus aggregate means."""

    methods: tuple
    metrics: tuple
    image_names: tuple
    per_image: dict  # method -> metric -> list of float | None
    means: dict  # method -> metric -> float | None
    seed: int

    def to_csv(self) -> str:
        lines = ["method," + ",".join(self.metrics)]
        for method in self.methods:
            cells = []
            for metric in self.metrics:
                v = self.means[method][metric]
                cells.append("" if v is None else f"{v:.6g}")
            lines.append(method + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "images": list(self.image_names),
            "metrics": list(self.metrics),
            "results": {
                method: {
                    "mean": dict(self.means[method]),
                    "per_image": {
                        metric: list(self.per_image[method][metric])
                        for metric in self.metrics
                    },
                }
                for method in self.methods
            },
        }


def _stream(seed: int, image_idx: int, method: str, metric: str):
    metric_ids = METRIC_COLUMNS + (INFIDELITY_COLUMN,)
    return np.random.default_rng(
        [seed, image_idx, METHODS.index(method), metric_ids.index(metric)]
    )


def benchmark(
    model: Model,
    items: Sequence[BenchmarkItem],
    methods: Sequence[str] = METHODS,
    cfg: MetricConfig = MetricConfig(),
    explain_config: ExplanationConfig = ExplanationConfig(),
    include_infidelity: bool = False,
) -> MetricReport:
    """Evaluate each method on each image and aggregate by mean.

    The explained class is the model's predicted class per image.  A metric
    failure on one image leaves a missing cell; the aggregate averages the
    remaining images.  Identical seeds give identical reports regardless of
    evaluation order.
    """
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    columns = METRIC_COLUMNS + ((INFIDELITY_COLUMN,) if include_infidelity else ())

    per_image: dict = {m: {c: [] for c in columns} for m in methods}
    for image_idx, item in enumerate(items):
        cls = int(np.argmax(forward(model, item.image).logits))
        for method in methods:
            explainer = make_explainer(model, method, explain_config)
            attribution = explainer(item.image, cls)
            row = per_image[method]

            def run(metric: str, fn):
                try:
                    row[metric].append(fn())
                except MetricError:
                    row[metric].append(None)

            run(
                "robustness",
                lambda: avg_sensitivity(
                    explainer, model, item.image, cls, cfg,
                    _stream(cfg.seed, image_idx, method, "robustness"),
                ),
            )
            run(
                "faithfulness",
                lambda: faithfulness_correlation(
                    model, item.image, cls, attribution, cfg,
                    _stream(cfg.seed, image_idx, method, "faithfulness"),
                ),
            )
            if item.mask is None:
                row["localisation"].append(None)
            else:
                run(
                    "localisation",
                    lambda: relevance_rank_accuracy(attribution, item.mask),
                )
            run("complexity", lambda: sparseness(attribution))
            run(
                "randomisation",
                lambda: random_logit(
                    explainer, model, item.image, cls, cfg,
                    _stream(cfg.seed, image_idx, method, "randomisation"),
                ),
            )
            if include_infidelity:
                run(
                    INFIDELITY_COLUMN,
                    lambda: infidelity(
                        model, item.image, cls, attribution, cfg,
                        _stream(cfg.seed, image_idx, method, INFIDELITY_COLUMN),
                    ),
                )

    means: dict = {}
    for method in methods:
        means[method] = {}
        for metric in columns:
            present = [v for v in per_image[method][metric] if v is not None]
            means[method][metric] = float(np.mean(present)) if present else None
    return MetricReport(
        methods=tuple(methods),
        metrics=columns,
        image_names=tuple(item.name for item in items),
        per_image=per_image,
        means=means,
        seed=cfg.seed,
    )
