"""Pixel, image and ranking metrics for watermark detection and scoring.

Ratios with a zero denominator are reported as ``None`` ("undefined") and
left out of any aggregate rather than being coerced to 0 or 1.  Dataset-level
pixel metrics are micro-averaged: confusions are summed first.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError
from .masks import BinaryMask

LEVELS = (0, 1, 2, 3)


def _ratio(num: float, den: float) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class PixelConfusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "PixelConfusion") -> "PixelConfusion":
        return PixelConfusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class PixelMetrics:
    precision: Optional[float]
    recall: Optional[float]
    iou: Optional[float]


@dataclass(frozen=True)
class ImageConfusion:
    itp: int = 0
    ifp: int = 0
    ifn: int = 0
    itn: int = 0

    def __post_init__(self):
        if min(self.itp, self.ifp, self.ifn, self.itn) < 0:
            raise InvalidParameterError("image counts must be non-negative")

    def __add__(self, other: "ImageConfusion") -> "ImageConfusion":
        return ImageConfusion(
            self.itp + other.itp, self.ifp + other.ifp, self.ifn + other.ifn, self.itn + other.itn
        )

    @property
    def iprecision(self) -> Optional[float]:
        return _ratio(self.itp, self.itp + self.ifp)

    @property
    def irecall(self) -> Optional[float]:
        return _ratio(self.itp, self.itp + self.ifn)

    def as_dict(self) -> dict:
        return {"itp": self.itp, "ifp": self.ifp, "ifn": self.ifn, "itn": self.itn}


def pixel_confusion(pred: BinaryMask, truth: BinaryMask) -> PixelConfusion:
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"prediction {pred.shape} vs truth {truth.shape}")
    p = pred.values.astype(bool)
    t = truth.values.astype(bool)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return PixelConfusion(tp, fp, fn, p.size - tp - fp - fn)


def dataset_pixel_confusion(pairs: Iterable[Tuple[BinaryMask, BinaryMask]]) -> PixelConfusion:
    total = PixelConfusion()
    for pred, truth in pairs:
        total = total + pixel_confusion(pred, truth)
    return total


def pixel_metrics(c: PixelConfusion) -> PixelMetrics:
    """Watermark-class precision, recall and IOU."""
    return PixelMetrics(
        precision=_ratio(c.tp, c.tp + c.fp),
        recall=_ratio(c.tp, c.tp + c.fn),
        iou=_ratio(c.tp, c.tp + c.fp + c.fn),
    )


def background_iou(c: PixelConfusion) -> Optional[float]:
    """IOU of the non-watermark class: its true positives are ``tn``."""
    return _ratio(c.tn, c.tn + c.fn + c.fp)


def mean_iou(
    watermark_iou: float, background_iou: float, weights: Optional[Tuple[float, float]] = None
) -> float:
    """Mean of the two class IOUs, or ``w_wm * iou_wm + w_bg * iou_bg`` when weighted."""
    for v in (watermark_iou, background_iou):
        if not 0.0 <= v <= 1.0:
            raise InvalidParameterError(f"IOU must be in [0, 1], got {v}")
    if weights is None:
        return (watermark_iou + background_iou) / 2.0
    w_wm, w_bg = (float(w) for w in weights)
    if w_wm < 0 or w_bg < 0 or abs(w_wm + w_bg - 1.0) > 1e-9:
        raise InvalidParameterError(f"class weights must be non-negative and sum to 1, got {weights}")
    return w_wm * watermark_iou + w_bg * background_iou


def image_confusion(decisions: Iterable[Tuple[bool, bool]]) -> ImageConfusion:
    """Count ``(predicted_positive, truly_positive)`` pairs.

    For a label map, "predicted positive" means it has at least one
    watermark pixel.
    """
    itp = ifp = ifn = itn = 0
    for predicted, actual in decisions:
        predicted, actual = bool(predicted), bool(actual)
        if predicted and actual:
            itp += 1
        elif predicted:
            ifp += 1
        elif actual:
            ifn += 1
        else:
            itn += 1
    return ImageConfusion(itp, ifp, ifn, itn)


def e_precision(itp: float, ifp: float, beta: float) -> Optional[float]:
    """Image precision extrapolated to a population with positive fraction ``beta``.

    ``itp`` and ``ifp`` must be counted on a balanced (50% positive) set.
    """
    if not 0.0 < beta < 1.0:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")
    if itp < 0 or ifp < 0:
        raise InvalidParameterError("counts must be non-negative")
    return _ratio(beta * itp, beta * itp + (1.0 - beta) * ifp)


@dataclass(frozen=True)
class RankingCell:
    correct: int
    total: int

    @property
    def percentage(self) -> float:
        return 100.0 * self.correct / self.total


@dataclass(frozen=True)
class RankingTable:
    """Pairwise accuracy per ``(higher, lower)`` ground-truth level pair.

    Only pairs with at least one cross-level image pair are present.
    """

    cells: Mapping[Tuple[int, int], RankingCell]

    def accuracy(self, high: int, low: int) -> Optional[float]:
        cell = self.cells.get((high, low))
        return None if cell is None else cell.percentage

    def as_dict(self) -> dict:
        return {
            f"{a}>{b}": {"correct": c.correct, "total": c.total, "percentage": c.percentage}
            for (a, b), c in sorted(self.cells.items(), key=lambda kv: (kv[0][1], -kv[0][0]))
        }

    def to_csv(self, levels: Sequence[int] = LEVELS) -> str:
        """Rows are the lower level, columns the higher level, descending."""
        levels = sorted(levels)
        cols = levels[:0:-1]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + [str(c) for c in cols])
        for low in levels[:-1]:
            row = [str(low)]
            for high in cols:
                acc = self.accuracy(high, low) if high > low else None
                row.append("N/A" if acc is None else f"{acc:.2f}")
            writer.writerow(row)
        return buf.getvalue()


def pairwise_ranking_table(
    items: Sequence[Tuple[float, int]], include_levels: Optional[Iterable[int]] = None
) -> RankingTable:
    """Fraction of cross-level pairs ordered correctly by predicted score.

    A pair (higher-level item, lower-level item) is correct only when the
    higher-level item's score is strictly greater; ties count as wrong.
    """
    keep = None if include_levels is None else set(include_levels)
    by_level: Dict[int, list] = {}
    for score, level in items:
        level = int(level)
        if level not in LEVELS:
            raise InvalidParameterError(f"ground-truth level must be in {LEVELS}, got {level}")
        if keep is not None and level not in keep:
            continue
        by_level.setdefault(level, []).append(float(score))
    if len(by_level) < 2:
        raise InvalidParameterError("ranking needs items from at least two ground-truth levels")

    sorted_scores = {lv: np.sort(np.asarray(s)) for lv, s in by_level.items()}
    cells = {}
    for high in sorted(by_level):
        for low in sorted(by_level):
            if high <= low:
                continue
            lows = sorted_scores[low]
            # for each high-level score, how many low-level scores are strictly smaller
            below = np.searchsorted(lows, sorted_scores[high], side="left")
            cells[(high, low)] = RankingCell(int(below.sum()), lows.size * sorted_scores[high].size)
    return RankingTable(cells)
