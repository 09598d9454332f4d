"""Codec and evaluation toolkit for arbitrary-shape scene-text regions.

Encodes polygonal word annotations into Gaussian text-region heatmaps,
decodes heatmaps back into tight word polygons, computes the training loss
terms on heatmap pairs, and scores detections with polygon-matching
precision/recall/F-measure.
"""

from .datasets import (AnnotatedImage, CanonicalFormatError, Corpus, ParseResult,
                       make_synthetic_corpus, parse_ctw1500, parse_msra_td500,
                       parse_totaltext, read_canonical, write_canonical)
from .evaluation import (EvalReport, MatchResult, match, merge_multiscale,
                         polygon_iou, polygon_nms, report)
from .geometry import (PolygonError, SkeletonError, SkeletonRaster, TextPolygon,
                       TextSkeleton, VertexPairs, build_skeleton, center_points,
                       pair_vertices, radii, rasterize_skeleton, subdivide,
                       trim_skeleton)
from .heatmap import (Heatmap, HeatmapFormatError, LossBreakdown, RenderResult,
                      loss_dice, loss_reg, loss_total, read_pgm16, read_uhth,
                      render_groundtruth, write_pgm16, write_uhth)
from .textfill import (Detection, TextfillConfig, PRESETS, decode, dilation_kernel,
                       extract_peaks, flood_region, judge_flow, read_detections,
                       write_detections)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedImage", "CanonicalFormatError", "Corpus", "Detection", "EvalReport",
    "Heatmap", "HeatmapFormatError", "LossBreakdown", "MatchResult", "ParseResult",
    "PolygonError", "PRESETS", "RenderResult", "SkeletonError", "SkeletonRaster",
    "TextPolygon", "TextSkeleton", "TextfillConfig", "VertexPairs",
    "build_skeleton", "center_points", "decode", "dilation_kernel", "extract_peaks",
    "flood_region", "judge_flow", "loss_dice", "loss_reg", "loss_total",
    "make_synthetic_corpus", "match", "merge_multiscale", "pair_vertices",
    "parse_ctw1500", "parse_msra_td500", "parse_totaltext", "polygon_iou",
    "polygon_nms", "radii", "rasterize_skeleton", "read_canonical",
    "read_detections", "read_pgm16", "read_uhth", "render_groundtruth", "report",
    "subdivide", "trim_skeleton", "write_canonical", "write_detections",
    "write_pgm16", "write_uhth",
]
