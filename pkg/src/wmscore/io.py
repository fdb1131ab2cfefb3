"""File formats: 8-bit PNG masks and likelihood maps, JSON annotations, JSON-lines label files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image

from .errors import WmscoreError
from .fitting import normalize_rater_scores
from .masks import AnnotationSet, BinaryMask, LikelihoodMap


class InputError(WmscoreError):
    """A file could not be read or does not follow the expected format."""


def _read_gray(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "1", "P", "I", "I;16"):
                im = im.convert("L")
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from exc
    if arr.ndim != 2:
        raise InputError(f"{path}: expected a single-channel image, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8) * 255
    if arr.max(initial=0) > 255 or arr.min(initial=0) < 0:
        raise InputError(f"{path}: pixel values outside 0..255")
    return arr.astype(np.uint8)


def read_likelihood_png(path) -> LikelihoodMap:
    """Byte ``b`` maps to likelihood ``b / 255``."""
    return LikelihoodMap(_read_gray(Path(path)) / 255.0)


def write_likelihood_png(lmap: LikelihoodMap, path) -> None:
    data = np.rint(lmap.values * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")


def read_mask_png(path) -> BinaryMask:
    """Pixels at or above 128 are watermark pixels; canonical files use {0, 255}."""
    return BinaryMask(_read_gray(Path(path)) >= 128)


def write_mask_png(mask: BinaryMask, path) -> None:
    Image.fromarray(mask.values * np.uint8(255), mode="L").save(Path(path), format="PNG")


def quantize_likelihood(values: np.ndarray) -> np.ndarray:
    """Snap likelihoods onto the 8-bit grid so a PNG round trip is lossless."""
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0) / 255.0


def read_annotation(path) -> AnnotationSet:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    try:
        return AnnotationSet.from_dict(data)
    except WmscoreError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_annotation(ann: AnnotationSet, path) -> None:
    Path(path).write_text(json.dumps(ann.to_dict()) + "\n")


@dataclass(frozen=True)
class LabelRecord:
    """One line of a label file: an image's mask and its human rating."""

    image_id: str
    mask_path: Optional[Path]
    human_score: float
    responses: Optional[tuple] = None

    @property
    def level(self) -> int:
        """Discrete 0..3 level: the rounded mean response."""
        if self.responses is not None:
            mean = sum(self.responses) / len(self.responses)
        else:
            mean = 3.0 * self.human_score
        return int(np.floor(mean + 0.5))


def read_label_file(path) -> List[LabelRecord]:
    """Parse a JSON-lines label file.

    Each line holds ``image_id``, ``mask_path`` (relative to the file) and
    either ``responses`` (0..3 integers) or ``human_score`` in ``[0, 1]``.
    Blank lines are skipped.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("expected a JSON object")
            image_id = str(obj["image_id"])
            mask_path = path.parent / obj["mask_path"] if obj.get("mask_path") is not None else None
            if "responses" in obj:
                responses = tuple(obj["responses"])
                score = normalize_rater_scores(responses)
            elif "human_score" in obj:
                responses = None
                score = float(obj["human_score"])
                if not 0.0 <= score <= 1.0:
                    raise ValueError(f"human_score {score} outside [0, 1]")
            else:
                raise ValueError("record needs 'responses' or 'human_score'")
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        records.append(LabelRecord(image_id, mask_path, score, responses))
    return records


def write_jsonl(records: Sequence[dict], path) -> None:
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in records))
