"""Dense correspondence fields for large-displacement optical flow."""
__version__ = "0.1.0"

from .image import bilinear_sample, build_smoothed, read_image, srgb_to_cielab
from .matcher import FlowField, MatcherConfig, compute_flow
from .pipeline import PRESETS, preset, run_pipeline

__all__ = ["FlowField", "MatcherConfig", "PRESETS", "bilinear_sample", "build_smoothed",
           "compute_flow", "preset", "read_image", "run_pipeline", "srgb_to_cielab"]
