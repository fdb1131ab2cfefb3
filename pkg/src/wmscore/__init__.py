"""Watermark distraction scoring from segmentation masks."""

from .errors import WmscoreError
from .masks import (
    AnnotationSet,
    BinaryMask,
    ImageDecision,
    LikelihoodMap,
    classify_image,
    hybrid_combine,
    hybrid_labels,
    rasterize_polygons,
    threshold_likelihood,
)
from .scoring import ScoringParams, WeightMap, distraction_score, gaussian_weights, weighted_area

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "BinaryMask",
    "ImageDecision",
    "LikelihoodMap",
    "ScoringParams",
    "WeightMap",
    "WmscoreError",
    "classify_image",
    "distraction_score",
    "gaussian_weights",
    "hybrid_combine",
    "hybrid_labels",
    "rasterize_polygons",
    "threshold_likelihood",
    "weighted_area",
]
