from .config import RunConfig, ValidationError, read_config_file, resolve
from .metrics import SUBSETS, Accumulator, MetricsReport, ReportBuilder, class_iou, intersection_union, pixel_iou
from .evaluate import (
    CONTROLS, MODALITIES, ZeroShotMap, geometric_maps, modality_maps, predict_maps, rectangle_maps, score,
    semantic_maps, write_panel,
)
from .experiments import (
    SMOKE, SmokeProfile, baseline, cached_dataset, dataset, evaluation_set, held_out, trained_model, zero_shot,
)
from .main import COMMANDS, build_parser, main, theorem_check

__all__ = [
    "RunConfig", "ValidationError", "read_config_file", "resolve",
    "SUBSETS", "Accumulator", "MetricsReport", "ReportBuilder", "class_iou", "intersection_union", "pixel_iou",
    "CONTROLS", "MODALITIES", "ZeroShotMap", "geometric_maps", "modality_maps", "predict_maps", "rectangle_maps",
    "score", "semantic_maps", "write_panel", "SMOKE", "SmokeProfile", "baseline", "cached_dataset", "dataset", "evaluation_set", "held_out",
    "trained_model", "zero_shot", "COMMANDS", "build_parser", "main", "theorem_check",
]
