"""Command-line interface: ``wmscore {score,fit,eval,synth}``.

Options may also come from a ``key = value`` config file passed with
``--config``; command-line flags win over the file, the file wins over the
built-in defaults.  Exit codes: 0 success, 1 input error, 2 invalid
configuration, 3 fit did not converge under ``--strict``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from .errors import DegenerateDataError, InfeasibleSpecError, InvalidParameterError, WmscoreError
from .fitting import FitConfig, ScoredExample, fit_params
from .io import InputError, read_label_file, read_likelihood_png, read_mask_png, write_mask_png
from .masks import (
    DEFAULT_COUNT_FRACTION,
    DEFAULT_LIKELIHOOD_THRESHOLD,
    BinaryMask,
    classify_image,
    hybrid_combine,
    hybrid_labels,
)
from .metrics import (
    RankingTable,
    background_iou,
    dataset_pixel_confusion,
    e_precision,
    image_confusion,
    mean_iou,
    pairwise_ranking_table,
    pixel_metrics,
)
from .scoring import ScoringParams, score_with_area
from .synth import SynthSpec, generate_dataset, write_dataset

log = logging.getLogger("wmscore")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SCORE_HEADER = ["image_id", "w", "G", "score"]
# synth-only fallback: fitted steepness and width from the reference study, illustrative bias
SYNTH_DEFAULT_PARAMS = {"lambda": 78.0, "sigma": 0.44, "alpha": 0.05}


class ConfigError(WmscoreError):
    pass


class _Settings:
    """Flag > config file > default lookup for one parsed command line."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: Dict[str, str] = {}
        if getattr(args, "config", None):
            parser = configparser.ConfigParser()
            path = Path(args.config)
            try:
                text = path.read_text()
            except OSError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            try:
                parser.read_string("[wmscore]\n" + text)
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            self.file = {k.replace("-", "_"): v for k, v in parser["wmscore"].items()}

    def get(self, name: str, default: Any = None, kind: Callable = str, key: Optional[str] = None) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        key = key or name
        if key in self.file:
            try:
                return kind(self.file[key])
            except ValueError as exc:
                raise ConfigError(f"config key {name!r}: {exc}") from exc
        return default


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _load_params(settings: _Settings, fallback: Optional[dict] = None) -> ScoringParams:
    source = settings.get("params")
    values: Dict[str, Any] = dict(fallback or {})
    if source:
        try:
            values.update(json.loads(Path(source).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{source}: cannot read scoring parameters ({exc})") from exc
    for key, attr in (("lambda", "lam"), ("sigma", "sigma"), ("alpha", "alpha")):
        value = settings.get(attr, kind=float, key=key)
        if value is not None:
            values[key] = value
    missing = [k for k in ("lambda", "sigma", "alpha") if k not in values]
    if missing:
        raise ConfigError(f"scoring parameters missing: {', '.join(missing)} (use --params or --lambda/--sigma/--alpha)")
    try:
        return ScoringParams.from_dict(values)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def score_row(image_id: str, w: int, g: float, score: float) -> List[str]:
    return [image_id, str(int(w)), _fmt(g), _fmt(score)]


def cmd_score(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    params = _load_params(settings)
    p = settings.get("likelihood_threshold", DEFAULT_LIKELIHOOD_THRESHOLD, float)
    t_frac = settings.get("count_fraction", DEFAULT_COUNT_FRACTION, float)
    masks_mode = bool(settings.get("masks", False, _bool))
    if not (0.0 <= p <= 1.0 and 0.0 <= t_frac <= 1.0):
        raise ConfigError("likelihood threshold and count fraction must lie in [0, 1]")

    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise InputError(f"{input_dir}: not a directory")
    cls_dir = Path(args.classifier_dir) if args.classifier_dir else None
    label_dir = Path(args.label_dir) if args.label_dir else None
    if label_dir:
        label_dir.mkdir(parents=True, exist_ok=True)

    rows, failures = [], 0
    for path in sorted(input_dir.glob("*.png"), key=lambda q: q.stem):
        image_id = path.stem
        try:
            if masks_mode:
                seg = read_mask_png(path)
                decision = classify_image(seg, t_frac)
                labels = hybrid_combine(decision, seg)
            else:
                cls_map = read_likelihood_png(cls_dir / path.name) if cls_dir else None
                decision, labels = hybrid_labels(read_likelihood_png(path), p, t_frac, cls_map)
        except WmscoreError as exc:
            print(f"error: {image_id}: {exc}", file=sys.stderr)
            failures += 1
            continue
        g, score = score_with_area(labels, params)
        rows.append(score_row(image_id, decision.w, g, score))
        if label_dir:
            write_mask_png(labels, label_dir / f"{image_id}.png")

    _write_csv(rows, args.output)
    return EXIT_INPUT if failures else EXIT_OK


def _write_csv(rows: List[List[str]], output: Optional[str]) -> None:
    if output:
        with open(output, "w", newline="") as fh:
            _csv_rows(fh, rows)
    else:
        _csv_rows(sys.stdout, rows)


def _csv_rows(fh, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCORE_HEADER)
    writer.writerows(rows)


def cmd_fit(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    config_kwargs = {}
    for name, kind in (("seed", int), ("max_iter", int), ("restarts", int), ("tol", float)):
        value = settings.get(name, kind=kind)
        if value is not None:
            config_kwargs[name] = value
    try:
        config = FitConfig(**config_kwargs)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc
    strict = bool(settings.get("strict", False, _bool))

    records = read_label_file(args.labels)
    data = []
    for rec in records:
        if rec.mask_path is None:
            raise InputError(f"{args.labels}: record {rec.image_id} has no mask_path")
        data.append(ScoredExample(read_mask_png(rec.mask_path), rec.human_score))
    try:
        result = fit_params(data, config)
    except DegenerateDataError as exc:
        raise InputError(str(exc)) from exc

    text = json.dumps(result.to_dict(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    pr = result.params
    print(
        f"mse={result.mse:.6g} lambda={pr.lam:.6g} sigma={pr.sigma:.6g} alpha={pr.alpha:.6g} "
        f"converged={result.converged}",
        file=sys.stderr,
    )
    if strict and not result.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def read_score_csv(path) -> Dict[str, dict]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in SCORE_HEADER):
                raise InputError(f"{path}: expected columns {','.join(SCORE_HEADER)}")
            out = {}
            for lineno, row in enumerate(reader, start=2):
                try:
                    out[row["image_id"]] = {"w": int(row["w"]), "G": float(row["G"]), "score": float(row["score"])}
                except (TypeError, ValueError) as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
            return out
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_eval(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    beta = settings.get("beta", 0.1, float)
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must be in (0, 1), got {beta}")
    positive_only = bool(settings.get("positive_only", False, _bool))

    scores = read_score_csv(args.scores)
    truth = {rec.image_id: rec for rec in read_label_file(args.labels)}
    missing = sorted(set(scores) - set(truth))
    if missing:
        raise InputError(f"no ground truth for {len(missing)} image(s), e.g. {missing[0]}")
    ids = sorted(scores)

    truth_masks: Dict[str, BinaryMask] = {}
    for iid in ids:
        if truth[iid].mask_path is None:
            raise InputError(f"{args.labels}: record {iid} has no mask_path")
        truth_masks[iid] = read_mask_png(truth[iid].mask_path)

    pred_masks: Dict[str, BinaryMask] = {}
    if args.pred_masks:
        for iid in ids:
            pred_masks[iid] = read_mask_png(Path(args.pred_masks) / f"{iid}.png")

    def predicted_positive(iid: str) -> bool:
        if pred_masks:
            return not pred_masks[iid].is_empty()
        return scores[iid]["w"] == 1 and scores[iid]["G"] > 0

    report: Dict[str, Any] = {"images": len(ids)}
    if pred_masks:
        conf = dataset_pixel_confusion((pred_masks[i], truth_masks[i]) for i in ids)
        pm = pixel_metrics(conf)
        bg = background_iou(conf)
        pixel: Dict[str, Any] = {**conf.as_dict(), "precision": pm.precision, "recall": pm.recall, "iou": pm.iou}
        pixel["background_iou"] = bg
        if pm.iou is not None and bg is not None:
            freq = (conf.tp + conf.fn) / conf.total
            pixel["mean_iou"] = mean_iou(pm.iou, bg)
            pixel["frequency_weighted_mean_iou"] = mean_iou(pm.iou, bg, (freq, 1.0 - freq))
        else:
            pixel["mean_iou"] = pixel["frequency_weighted_mean_iou"] = None
        report["pixel"] = pixel

    ic = image_confusion((predicted_positive(i), not truth_masks[i].is_empty()) for i in ids)
    report["image"] = {
        **ic.as_dict(),
        "iprecision": ic.iprecision,
        "irecall": ic.irecall,
        "beta": beta,
        "eprecision": e_precision(ic.itp, ic.ifp, beta),
    }

    items = [(scores[i]["score"], truth[i].level) for i in ids if not positive_only or predicted_positive(i)]
    levels = settings.get("levels", None, lambda s: [int(v) for v in s.split(",")])
    try:
        table = pairwise_ranking_table(items, include_levels=levels)
        report["ranking"] = table.as_dict()
        ranking_csv = table.to_csv()
    except InvalidParameterError as exc:
        log.warning("ranking table skipped: %s", exc)
        report["ranking"] = None
        ranking_csv = None

    text = json.dumps(report, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.ranking_csv:
        Path(args.ranking_csv).write_text(ranking_csv or RankingTable({}).to_csv())
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    try:
        raw = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.spec}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"{args.spec}: expected a JSON object")
    fallback = dict(SYNTH_DEFAULT_PARAMS)
    fallback.update(raw.pop("params", {}) or {})
    if settings.get("seed", kind=int) is not None:
        raw["seed"] = settings.get("seed", kind=int)
    try:
        spec = SynthSpec.from_dict(raw)
    except (InvalidParameterError, InfeasibleSpecError, TypeError) as exc:
        raise ConfigError(f"{args.spec}: {exc}") from exc
    params = _load_params(settings, fallback)
    images = generate_dataset(spec, params)
    manifest = write_dataset(images, spec, params, args.out)
    positives = sum(1 for im in images if not im.truth.is_empty())
    print(f"wrote {len(images)} images ({positives} with watermarks) to {manifest.parent}", file=sys.stderr)
    return EXIT_OK


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", help="JSON file with lambda, sigma, alpha (e.g. fit output)")
    p.add_argument("--lambda", dest="lam", type=float, help="sigmoid steepness")
    p.add_argument("--sigma", type=float, help="Gaussian width in normalized image units")
    p.add_argument("--alpha", type=float, help="sigmoid bias in weighted-area units")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wmscore", description="Watermark distraction scoring.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a directory of likelihood maps or masks")
    p.add_argument("input", help="directory of single-channel PNG files")
    p.add_argument("--config", help="key = value settings file; command-line flags take precedence")
    p.add_argument("--masks", action="store_const", const=True, help="inputs are binary masks, not likelihoods")
    p.add_argument("--classifier-dir", help="likelihood maps of a separate classification tower (same filenames)")
    p.add_argument("-p", "--likelihood-threshold", type=float)
    p.add_argument("-t", "--count-fraction", type=float, help="image threshold as a fraction of the pixel count")
    p.add_argument("--label-dir", help="also write the final label maps here")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    _add_param_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fit", help="fit scoring parameters to human ratings")
    p.add_argument("labels", help="JSON-lines label file")
    p.add_argument("--config", help="key = value settings file; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--strict", action="store_const", const=True, help="exit 3 if the search did not converge")
    p.add_argument("-o", "--output", help="fit JSON path (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("scores", help="CSV written by 'wmscore score'")
    p.add_argument("labels", help="JSON-lines ground-truth label file")
    p.add_argument("--config", help="key = value settings file; command-line flags take precedence")
    p.add_argument("--pred-masks", help="directory of predicted label maps for pixel metrics")
    p.add_argument("--beta", type=float, help="deployment fraction of watermarked images (default 0.1)")
    p.add_argument("--positive-only", action="store_const", const=True, help="rank only predicted-positive images")
    p.add_argument("--levels", type=lambda s: [int(v) for v in s.split(",")], help="comma-separated levels to rank")
    p.add_argument("-o", "--output", help="report JSON path (default: stdout)")
    p.add_argument("--ranking-csv", help="write the pairwise ranking table here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("spec", help="JSON synth spec")
    p.add_argument("out", help="output directory")
    p.add_argument("--config", help="key = value settings file; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    _add_param_flags(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WmscoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
