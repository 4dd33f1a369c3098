"""Optical flow evaluation with AEPE and motion edge structure difference (MESD)."""

__version__ = "0.1.0"

from .exceptions import FlowMesdError
from .io import (
    ColorImage,
    FlowField,
    GrayImage,
    load_flow,
    load_image,
    read_flo,
    read_image,
    read_kitti_png,
    save_flow,
    write_flo,
    write_kitti_png,
    write_png,
)
from .metrics import (
    FieldStats,
    GradientField,
    MetricReport,
    aepe,
    ess,
    ess_components,
    evaluate,
    field_stats,
    gradient,
    mesd,
)
from .refine import EdgeRefiner, ErConfig, edge_refine, er_weight
from .validation import EvalRegion
from .viz import flow_to_color, gradient_difference_map, gradient_magnitude_map

__all__ = [
    "ColorImage", "EdgeRefiner", "ErConfig", "EvalRegion", "FieldStats", "FlowField",
    "FlowMesdError", "GradientField", "GrayImage", "MetricReport", "aepe", "edge_refine",
    "er_weight", "ess", "ess_components", "evaluate", "field_stats", "flow_to_color",
    "gradient", "gradient_difference_map", "gradient_magnitude_map", "load_flow",
    "load_image", "mesd", "read_flo", "read_image", "read_kitti_png", "save_flow",
    "write_flo", "write_kitti_png", "write_png",
]
