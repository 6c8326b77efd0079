"""Compact CNN training/evaluation core for 4-class retinal image work.

The heavy lifting lives in the compiled ``_octnet`` module; this wrapper
keeps the numpy-facing functions as-is and turns JSON-string results into
plain dicts.
"""

import json as _json

from ._octnet import (
    Model,
    OctnetError,
    __version__,
    arch_names,
    class_names,
    conv2d,
    load_image,
    max_pool2d,
    separable_conv2d,
)
from . import _octnet as _c

__all__ = [
    "Model",
    "OctnetError",
    "__version__",
    "arch_names",
    "class_names",
    "conv2d",
    "load_image",
    "max_pool2d",
    "separable_conv2d",
    "generate_fixture",
    "metrics_report",
    "peek_checkpoint",
    "reproduce_metrics",
    "scan_dataset",
]


def scan_dataset(root):
    """Scan a train/val/test directory tree into a manifest dict."""
    return _json.loads(_c.scan_dataset_json(str(root)))


def generate_fixture(out_dir, images_per_class=32, image_size=150, seed=1):
    """Write a deterministic synthetic dataset; returns its manifest dict."""
    return _json.loads(
        _c.generate_fixture_json(str(out_dir), images_per_class, image_size, seed)
    )


def peek_checkpoint(path):
    """Checkpoint header (arch, shapes, config) without loading the payload."""
    return _json.loads(_c.peek_checkpoint_json(str(path)))


def metrics_report(y_true, y_pred, num_classes, class_names=()):
    """Confusion matrix plus per-class/micro/macro metrics as a dict."""
    return _json.loads(
        _c.metrics_report_json(list(y_true), list(y_pred), num_classes, list(class_names))
    )


def reproduce_metrics(tables_path=None, tolerance=0.005):
    """Recompute accuracies from the bundled confusion matrices."""
    path = None if tables_path is None else str(tables_path)
    return _json.loads(_c.reproduce_metrics_json(path, tolerance))
