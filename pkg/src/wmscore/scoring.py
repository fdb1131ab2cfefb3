"""Gaussian location weighting and the sigmoid distraction score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionsError, InvalidParameterError
from .masks import BinaryMask

# sigmoid argument is clipped here: e^-700 stays a normal float and 1/(1+e^-700) rounds to 1.0
EXPONENT_CLAMP = 700.0


@dataclass(frozen=True)
class ScoringParams:
    """Sigmoid steepness ``lam``, Gaussian width ``sigma`` and bias ``alpha``.

    ``sigma`` is measured in normalized image units where each axis spans
    ``[-0.5, 0.5]``; ``alpha`` is in weighted-area units.
    """

    lam: float
    sigma: float
    alpha: float

    def __post_init__(self):
        for name in ("lam", "sigma", "alpha"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.sigma <= 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        if self.lam <= 0:
            raise InvalidParameterError(f"lambda must be positive, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must be in [0, 1], got {self.alpha}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, data: dict) -> "ScoringParams":
        return cls(lam=data["lambda"], sigma=data["sigma"], alpha=data["alpha"])


@dataclass(frozen=True, eq=False)
class WeightMap:
    weights: np.ndarray

    @property
    def height(self) -> int:
        return int(self.weights.shape[0])

    @property
    def width(self) -> int:
        return int(self.weights.shape[1])


def axis_coords(n: int) -> np.ndarray:
    """Pixel-center coordinates of one axis mapped onto ``[-0.5, 0.5]``.

    Written as ``(2i + 1 - n) / 2n`` so that mirrored pixels get exactly
    negated coordinates.
    """
    i = np.arange(n, dtype=np.float64)
    return (2.0 * i + 1.0 - n) / (2.0 * n)


@lru_cache(maxsize=64)
def _weights(width: int, height: int, sigma: float) -> np.ndarray:
    gx = np.exp(-axis_coords(width) ** 2 / (2.0 * sigma * sigma))
    gy = np.exp(-axis_coords(height) ** 2 / (2.0 * sigma * sigma))
    # separable: exp(-(x^2+y^2)/2s^2) = gx * gy
    w = np.outer(gy, gx)
    w /= w.sum()
    w.flags.writeable = False
    return w


def gaussian_weights(width: int, height: int, sigma: float) -> WeightMap:
    """Isotropic Gaussian centered on the image, normalized to sum to one.

    Results are cached per ``(width, height, sigma)`` and shared read-only.
    """
    if width < 1 or height < 1:
        raise InvalidDimensionsError(f"dimensions must be positive, got {width}x{height}")
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    return WeightMap(_weights(int(width), int(height), float(sigma)))


def weighted_area(labels: BinaryMask, weights: WeightMap) -> float:
    """Gaussian-weighted sum of the labels; ``G`` in ``[0, 1]``."""
    if labels.shape != weights.weights.shape:
        raise DimensionMismatchError(
            f"mask is {labels.width}x{labels.height}, weights are {weights.width}x{weights.height}"
        )
    # fsum is correctly rounded, so adding pixels can never lower G
    g = math.fsum(weights.weights[labels.values.astype(bool)])
    return min(max(g, 0.0), 1.0)


def sigmoid(t):
    """Logistic function, overflow-free for any finite input."""
    t = np.clip(np.asarray(t, dtype=np.float64), -EXPONENT_CLAMP, EXPONENT_CLAMP)
    e = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def score_from_area(g: float, params: ScoringParams) -> float:
    """Sigmoid response for a weighted area ``g`` (no empty-mask override)."""
    return sigmoid(params.lam * (g - params.alpha))


def distraction_score(labels: BinaryMask, params: ScoringParams) -> float:
    """Distraction score in ``[0, 1]``; an empty label map scores exactly 0."""
    if labels.is_empty():
        return 0.0
    g = weighted_area(labels, gaussian_weights(labels.width, labels.height, params.sigma))
    return score_from_area(g, params)


def score_with_area(labels: BinaryMask, params: ScoringParams) -> tuple[float, float]:
    """Return ``(G, score)`` for one label map."""
    if labels.is_empty():
        return 0.0, 0.0
    g = weighted_area(labels, gaussian_weights(labels.width, labels.height, params.sigma))
    return g, score_from_area(g, params)
