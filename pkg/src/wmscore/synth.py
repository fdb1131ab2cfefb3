"""Deterministic synthetic datasets for exercising the whole pipeline.

Randomness comes from ``numpy.random.Generator(numpy.random.Philox(seed))``:
the Philox4x64-10 counter-based bit generator, keyed through numpy's
``SeedSequence`` from the integer seed.  Draw order per image is fixed
(positive flag, shape count, then per shape: kind, area, log-aspect, center x,
center y; then likelihood noise; then rater noise), so fixtures only change
if that order changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import NormalDist
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InfeasibleSpecError, InvalidParameterError
from .io import quantize_likelihood, write_annotation, write_jsonl, write_likelihood_png, write_mask_png
from .masks import AnnotationSet, BinaryMask, LikelihoodMap, rasterize_polygons
from .metrics import ImageConfusion
from .scoring import ScoringParams, distraction_score

RNG_NAME = "numpy Philox4x64-10 via SeedSequence(seed)"
ELLIPSE_VERTICES = 32
RATERS = 3
PLACEMENTS = ("uniform", "center")
# spread of center-biased placement, as a fraction of the image side
CENTER_SPREAD = 0.15
_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    image_count: int = 100
    width: int = 64
    height: int = 64
    positive_fraction: float = 0.625
    watermark_area_range: Tuple[float, float] = (0.005, 0.15)
    placement: str = "uniform"
    likelihood_noise: float = 0.0
    rater_noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "watermark_area_range", tuple(float(v) for v in self.watermark_area_range))
        if self.image_count < 0:
            raise InvalidParameterError("image_count must be non-negative")
        if self.width < 1 or self.height < 1:
            raise InvalidParameterError(f"bad image size {self.width}x{self.height}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise InvalidParameterError("positive_fraction must be in [0, 1]")
        if self.placement not in PLACEMENTS:
            raise InvalidParameterError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if self.likelihood_noise < 0 or self.rater_noise < 0:
            raise InvalidParameterError("noise levels must be non-negative")
        lo, hi = self.watermark_area_range
        if not 0.0 < lo <= hi <= 1.0:
            raise InfeasibleSpecError(f"area range must satisfy 0 < lo <= hi <= 1, got {self.watermark_area_range}")
        if hi * self.width * self.height < 1.0:
            raise InfeasibleSpecError(
                f"largest watermark area {hi} covers less than one pixel of a {self.width}x{self.height} image"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["watermark_area_range"] = list(self.watermark_area_range)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameterError(f"unknown synth spec fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SynthImage:
    annotation: AnnotationSet
    likelihood: LikelihoodMap
    truth: BinaryMask
    responses: Tuple[int, ...]
    oracle_score: float

    @property
    def image_id(self) -> str:
        return self.annotation.image_id


def _make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _shape_polygon(rng: np.random.Generator, spec: SynthSpec) -> Tuple[Tuple[float, float], ...]:
    W, H = spec.width, spec.height
    is_ellipse = bool(rng.integers(2))
    area = rng.uniform(*spec.watermark_area_range) * W * H
    aspect = math.exp(rng.uniform(math.log(0.5), math.log(2.0)))
    u, v = rng.random(), rng.random()

    w = math.sqrt(area * aspect)
    h = area / w
    if w > W:
        w, h = W, area / W
    if h > H:
        w, h = area / H, H

    if spec.placement == "uniform":
        cx = w / 2 + u * (W - w)
        cy = h / 2 + v * (H - h)
    else:
        # map the uniform draws through the normal quantile for a center-biased spot
        eps = 1e-12
        cx = W / 2 + CENTER_SPREAD * W * _STD_NORMAL.inv_cdf(min(max(u, eps), 1 - eps))
        cy = H / 2 + CENTER_SPREAD * H * _STD_NORMAL.inv_cdf(min(max(v, eps), 1 - eps))
        cx = min(max(cx, w / 2), W - w / 2)
        cy = min(max(cy, h / 2), H - h / 2)

    if not is_ellipse:
        x0, y0, x1, y1 = cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2
        return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    n = ELLIPSE_VERTICES
    # inscribed n-gon keeps the area of the w x h ellipse
    scale = math.sqrt(math.pi / (n / 2 * math.sin(2 * math.pi / n)))
    a = min(w / 2 * scale, W / 2)
    b = min(h / 2 * scale, H / 2)
    t = 2 * math.pi * np.arange(n) / n
    return tuple((float(cx + a * math.cos(tk)), float(cy + b * math.sin(tk))) for tk in t)


def quantize_responses(score: float, noise: np.ndarray) -> Tuple[int, ...]:
    """Rater responses: round-half-up of ``3 * score + noise``, clamped to 0..3."""
    raw = np.floor(3.0 * score + noise + 0.5)
    return tuple(int(r) for r in np.clip(raw, 0, 3))


def generate_dataset(spec: SynthSpec, params: ScoringParams) -> List[SynthImage]:
    """Generate ``spec.image_count`` images with truth masks, likelihoods and ratings.

    Likelihoods are snapped to the 8-bit grid so writing them to PNG is
    lossless.  Images whose truth mask is empty always get all-zero ratings.
    """
    rng = _make_rng(spec.seed)
    images = []
    for k in range(spec.image_count):
        positive = rng.random() < spec.positive_fraction
        polygons = []
        if positive:
            for _ in range(int(rng.integers(1, 4))):
                polygons.append(_shape_polygon(rng, spec))
        ann = AnnotationSet(f"img{k:05d}", spec.width, spec.height, tuple(polygons))
        truth = rasterize_polygons(ann)

        noise = rng.normal(0.0, 1.0, size=truth.shape) * spec.likelihood_noise
        likelihood = LikelihoodMap(quantize_likelihood(truth.values + noise))

        score = distraction_score(truth, params)
        rater_noise = rng.normal(0.0, 1.0, size=RATERS) * spec.rater_noise
        responses = (0,) * RATERS if truth.is_empty() else quantize_responses(score, rater_noise)
        images.append(SynthImage(ann, likelihood, truth, responses, score))
    return images


def write_dataset(images: Sequence[SynthImage], spec: SynthSpec, params: ScoringParams, out_dir) -> Path:
    """Write the dataset layout consumed by the CLI and return the manifest path.

    Layout: ``annotations/<id>.json``, ``likelihood/<id>.png``,
    ``masks/<id>.png``, ``labels.jsonl`` (rater responses),
    ``oracle.jsonl`` (exact oracle scores) and ``manifest.json``.
    All paths inside the files are relative to ``out_dir``.
    """
    out = Path(out_dir)
    for sub in ("annotations", "likelihood", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    entries, labels, oracle = [], [], []
    for img in images:
        iid = img.image_id
        ann_rel, lik_rel, mask_rel = f"annotations/{iid}.json", f"likelihood/{iid}.png", f"masks/{iid}.png"
        write_annotation(img.annotation, out / ann_rel)
        write_likelihood_png(img.likelihood, out / lik_rel)
        write_mask_png(img.truth, out / mask_rel)
        labels.append({"image_id": iid, "mask_path": mask_rel, "responses": list(img.responses)})
        oracle.append({"image_id": iid, "mask_path": mask_rel, "human_score": img.oracle_score})
        entries.append(
            {
                "image_id": iid,
                "annotation": ann_rel,
                "likelihood": lik_rel,
                "mask": mask_rel,
                "positive": not img.truth.is_empty(),
                "responses": list(img.responses),
                "oracle_score": img.oracle_score,
            }
        )
    write_jsonl(labels, out / "labels.jsonl")
    write_jsonl(oracle, out / "oracle.jsonl")
    manifest = {"rng": RNG_NAME, "spec": spec.to_dict(), "params": params.to_dict(), "images": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def sparse_eval_simulation(
    confusion: ImageConfusion, beta: float, population: int, seed: int = 0
) -> Optional[float]:
    """Monte-Carlo image precision in a population with positive fraction ``beta``.

    Recall and false-positive rate are taken from ``confusion`` (counted on a
    balanced set) and applied as independent per-image Bernoulli trials.
    Returns None when nothing is predicted positive.
    """
    if not 0.0 < beta < 1.0:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")
    pos_total = confusion.itp + confusion.ifn
    neg_total = confusion.ifp + confusion.itn
    if pos_total == 0 or neg_total == 0:
        raise InvalidParameterError("confusion must contain both positive and negative images")
    tpr = confusion.itp / pos_total
    fpr = confusion.ifp / neg_total

    rng = _make_rng(seed)
    is_pos = rng.random(population) < beta
    hit = rng.random(population) < np.where(is_pos, tpr, fpr)
    tp = int(np.count_nonzero(hit & is_pos))
    fp = int(np.count_nonzero(hit & ~is_pos))
    if tp + fp == 0:
        return None
    return tp / (tp + fp)
