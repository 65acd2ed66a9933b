"""Fixture exporter: trains small CNNs, serializes them to the engine's
manifest+blob weight format, and records framework-side reference vectors
(logits, gradients) for cross-implementation checks.

This package never imports the inference engine; the two meet only at the
documented file formats.
"""

from .dataset import CLASS_NAMES, make_dataset, render_example
from .export import ExportError, export_model
from .net import make_net
from .references import record_references
from .build import build_bundle

__all__ = [
    "CLASS_NAMES",
    "ExportError",
    "build_bundle",
    "export_model",
    "make_dataset",
    "make_net",
    "record_references",
    "render_example",
]
