"""Depth-aware virtual-light relighting: parametric shading, parameter
fitting, temporal smoothing, and a live studio service."""

from .albedo import apply_albedo, estimate_illumination_mask
from .errors import (
    CorruptDataError,
    DataError,
    MissingFileError,
    RelightError,
    SchemaError,
    UnsupportedFormatError,
)
from .fit import (
    FitConfig,
    FitResult,
    LossConfig,
    auto_target,
    fit,
    pixel_loss,
    roi_loss,
    total_loss,
)
from .geometry import box_downsample, normals_from_depth, pixel_positions, resize_area
from .lights import (
    LightingParams,
    ParamBounds,
    ParamStats,
    VirtualLight,
    default_stats,
    denormalize,
    flatten,
    neutral_params,
    param_dim,
    project_valid,
    regularization_loss,
    unflatten,
)
from .render import ShadingConfig, compose, light_map, light_map_reference, light_map_vjp
from .temporal import (
    FrameTiming,
    KeyframeSchedule,
    SmootherState,
    enhance_sequence,
    flicker_index,
    smooth_step,
)

__version__ = "0.1.0"

__all__ = [
    "LightingParams", "VirtualLight", "ParamStats", "ParamBounds",
    "flatten", "unflatten", "denormalize", "project_valid", "regularization_loss",
    "neutral_params", "default_stats", "param_dim",
    "pixel_positions", "normals_from_depth", "box_downsample", "resize_area",
    "ShadingConfig", "light_map", "light_map_reference", "light_map_vjp", "compose",
    "estimate_illumination_mask", "apply_albedo",
    "LossConfig", "FitConfig", "FitResult", "pixel_loss", "roi_loss", "total_loss",
    "fit", "auto_target",
    "SmootherState", "KeyframeSchedule", "smooth_step", "flicker_index",
    "enhance_sequence", "FrameTiming",
    "RelightError", "DataError", "MissingFileError", "UnsupportedFormatError",
    "CorruptDataError", "SchemaError",
]
