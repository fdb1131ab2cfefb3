"""Mask-level data types and the transforms between them.

Grids are stored as ``(height, width)`` numpy arrays in row-major order, so
``values[y, x]`` addresses the pixel in column ``x`` and row ``y``.  Pixel
``(x, y)`` has its center at ``(x + 0.5, y + 0.5)`` in annotation
coordinates.

The pipeline is::

    LikelihoodMap --threshold_likelihood--> BinaryMask (S)
    BinaryMask    --classify_image-------> ImageDecision (w)
    (w, S)        --hybrid_combine-------> BinaryMask (L = w * S)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidAnnotationError,
    InvalidDimensionsError,
    InvalidParameterError,
)

Point = Tuple[float, float]

DEFAULT_LIKELIHOOD_THRESHOLD = 0.75
DEFAULT_COUNT_FRACTION = 0.001


def _check_dims(width: int, height: int) -> None:
    if int(width) < 1 or int(height) < 1:
        raise InvalidDimensionsError(f"dimensions must be positive, got {width}x{height}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    if arr.base is not None or arr.flags.writeable:
        arr = arr.copy()
    arr.flags.writeable = False
    return arr


class _Grid:
    values: np.ndarray

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((type(self).__name__, self.values.shape, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class LikelihoodMap(_Grid):
    """Per-pixel watermark likelihood in ``[0, 1]``."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidDimensionsError(f"likelihood map must be 2-D, got shape {values.shape}")
        _check_dims(values.shape[1], values.shape[0])
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise InvalidParameterError("likelihood values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def filled(cls, width: int, height: int, value: float) -> "LikelihoodMap":
        _check_dims(width, height)
        return cls(np.full((height, width), float(value)))


@dataclass(frozen=True, eq=False)
class BinaryMask(_Grid):
    """Per-pixel watermark labels in ``{0, 1}``, one byte per pixel."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise InvalidDimensionsError(f"mask must be 2-D, got shape {values.shape}")
        _check_dims(values.shape[1], values.shape[0])
        if values.dtype == np.bool_:
            values = values.astype(np.uint8)
        elif not np.all((values == 0) | (values == 1)):
            raise InvalidParameterError("mask values must be 0 or 1")
        object.__setattr__(self, "values", _frozen(values.astype(np.uint8, copy=False)))

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        _check_dims(width, height)
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def ones(cls, width: int, height: int) -> "BinaryMask":
        _check_dims(width, height)
        return cls(np.ones((height, width), dtype=np.uint8))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.values))

    def is_empty(self) -> bool:
        return not self.values.any()


@dataclass(frozen=True)
class AnnotationSet:
    """Rater polygons for a single image.  No polygons means no watermark."""

    image_id: str
    width: int
    height: int
    polygons: Tuple[Tuple[Point, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        _check_dims(self.width, self.height)
        polys = []
        for k, poly in enumerate(self.polygons):
            pts = tuple((float(x), float(y)) for x, y in poly)
            if len(pts) < 3:
                raise InvalidAnnotationError(
                    f"{self.image_id}: polygon {k} has {len(pts)} vertices, need at least 3"
                )
            if not all(math.isfinite(c) for p in pts for c in p):
                raise InvalidAnnotationError(f"{self.image_id}: polygon {k} has non-finite vertices")
            polys.append(pts)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "polygons", tuple(polys))

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "polygons": [[[x, y] for x, y in poly] for poly in self.polygons],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnnotationSet":
        try:
            return cls(
                image_id=str(data["image_id"]),
                width=int(data["width"]),
                height=int(data["height"]),
                polygons=tuple(tuple((p[0], p[1]) for p in poly) for poly in data["polygons"]),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise InvalidAnnotationError(f"malformed annotation record: {exc!r}") from exc


@dataclass(frozen=True)
class ImageDecision:
    """Image-level classification ``w`` from a pixel-count threshold."""

    w: int
    watermark_pixel_count: int
    threshold_used: int

    def __post_init__(self):
        if self.watermark_pixel_count < 0 or self.threshold_used < 0:
            raise InvalidParameterError("pixel counts must be non-negative")
        if self.w != int(self.watermark_pixel_count > self.threshold_used):
            raise InvalidParameterError("w must equal [watermark_pixel_count > threshold_used]")


def _edge_crossings(poly: np.ndarray, yc: np.ndarray) -> list:
    """For each scanline center in ``yc``, sorted x positions where the outline crosses it."""
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = []
    for y in yc:
        # half-open rule: an edge counts if exactly one endpoint lies strictly above y
        hit = (y0 > y) != (y1 > y)
        if not hit.any():
            out.append(np.empty(0))
            continue
        xa, ya, xb, yb = x0[hit], y0[hit], x1[hit], y1[hit]
        xs = xa + (y - ya) * (xb - xa) / (yb - ya)
        out.append(np.sort(xs))
    return out


def rasterize_polygons(ann: AnnotationSet) -> BinaryMask:
    """Even-odd fill of the annotation polygons, sampled at pixel centers.

    Each polygon is filled on its own and the results are OR-ed, so
    overlapping polygons never cancel each other out.
    """
    _check_dims(ann.width, ann.height)
    out = np.zeros((ann.height, ann.width), dtype=np.uint8)
    xc = np.arange(ann.width) + 0.5
    for poly in ann.polygons:
        if len(poly) < 3:
            raise InvalidAnnotationError(f"{ann.image_id}: polygon with {len(poly)} vertices")
        pts = np.asarray(poly, dtype=np.float64)
        lo = max(int(math.floor(pts[:, 1].min() - 0.5)), 0)
        hi = min(int(math.ceil(pts[:, 1].max() + 0.5)), ann.height)
        if lo >= hi:
            continue
        rows = np.arange(lo, hi)
        for row, xs in zip(rows, _edge_crossings(pts, rows + 0.5)):
            if xs.size == 0:
                continue
            # a center is inside iff an odd number of crossings lies strictly to its right
            right = xs.size - np.searchsorted(xs, xc, side="right")
            out[row] |= (right & 1).astype(np.uint8)
    return BinaryMask(out)


def threshold_likelihood(lmap: LikelihoodMap, p: float = DEFAULT_LIKELIHOOD_THRESHOLD) -> BinaryMask:
    """Pixels with likelihood ``>= p`` become watermark pixels."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"likelihood threshold must be in [0, 1], got {p}")
    return BinaryMask(lmap.values >= p)


def count_threshold(width: int, height: int, t_frac: float) -> int:
    return int(math.floor(t_frac * width * height))


def classify_image(mask: BinaryMask, t_frac: float = DEFAULT_COUNT_FRACTION) -> ImageDecision:
    """Image is positive when its watermark pixel count exceeds ``floor(t_frac * N)``."""
    if not 0.0 <= t_frac <= 1.0:
        raise InvalidParameterError(f"t_frac must be in [0, 1], got {t_frac}")
    threshold = count_threshold(mask.width, mask.height, t_frac)
    count = mask.count
    return ImageDecision(w=int(count > threshold), watermark_pixel_count=count, threshold_used=threshold)


def hybrid_combine(decision: ImageDecision, seg: BinaryMask) -> BinaryMask:
    """Gate the segmentation labels by the image decision: ``L = w * S``."""
    if decision.w:
        return seg
    return BinaryMask.zeros(seg.width, seg.height)


def hybrid_labels(
    lmap: LikelihoodMap,
    p: float = DEFAULT_LIKELIHOOD_THRESHOLD,
    t_frac: float = DEFAULT_COUNT_FRACTION,
    classifier_map: LikelihoodMap | None = None,
) -> Tuple[ImageDecision, BinaryMask]:
    """Run threshold -> classify -> combine on one image.

    ``classifier_map`` is the likelihood output of a separate classification
    tower; when omitted the segmentation map drives both branches.
    """
    seg = threshold_likelihood(lmap, p)
    if classifier_map is None:
        cls_mask = seg
    else:
        if classifier_map.shape != lmap.shape:
            raise DimensionMismatchError(
                f"classifier map {classifier_map.shape} vs segmentation map {lmap.shape}"
            )
        cls_mask = threshold_likelihood(classifier_map, p)
    decision = classify_image(cls_mask, t_frac)
    return decision, hybrid_combine(decision, seg)

