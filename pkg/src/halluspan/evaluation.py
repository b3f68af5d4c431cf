"""Character-level scoring of predicted hallucination spans.

* IoU between the predicted and gold sets of hard-labelled character indices.
* Spearman correlation (average ranks for ties) between the per-character
  predicted and gold probabilities.

Degenerate cases are pinned: two empty hard-label sets have IoU 1.0, and if
either probability vector is constant the correlation is 1.0 when the
vectors are identical and 0.0 otherwise.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .model import CharSpan, DatasetError, Prediction, Sample, SoftLabel, load_dataset, load_predictions
from .spans import merge_intervals, ResponseIntervals

logger = logging.getLogger(__name__)

GOLD_HARD_THRESHOLD = 0.5


class ScoringError(ValueError):
    pass


def _check_bounds(spans: Iterable[CharSpan], text_len: int, what: str) -> None:
    for span in spans:
        if span.end > text_len:
            raise ScoringError(f"{what} span [{span.start}, {span.end}) exceeds text length {text_len}")


def char_iou(pred: Sequence[CharSpan], gold: Sequence[CharSpan], text_len: int) -> float:
    """Intersection over union of the covered character index sets."""
    _check_bounds(pred, text_len, "predicted")
    _check_bounds(gold, text_len, "gold")
    pred_chars = {i for s in pred for i in range(s.start, s.end)}
    gold_chars = {i for s in gold for i in range(s.start, s.end)}
    union = pred_chars | gold_chars
    if not union:
        return 1.0
    return len(pred_chars & gold_chars) / len(union)


def char_probabilities(labels: Sequence[SoftLabel], text_len: int) -> np.ndarray:
    """Per-character probability vector; overlapping labels keep the maximum."""
    vec = np.zeros(text_len, dtype=np.float64)
    for label in labels:
        if label.end > text_len:
            raise ScoringError(f"soft label [{label.start}, {label.end}) exceeds text length {text_len}")
        np.maximum(vec[label.start : label.end], label.prob, out=vec[label.start : label.end])
    return vec


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman correlation with average ranks; constant vectors use the pinned rule."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ScoringError("spearman needs two non-empty vectors of equal length")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 1.0 if np.array_equal(x, y) else 0.0
    rx = rankdata(x) - (x.size + 1) / 2.0
    ry = rankdata(y) - (y.size + 1) / 2.0
    r = float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    return max(-1.0, min(1.0, r))


def soft_correlation(pred: Sequence[SoftLabel], gold: Sequence[SoftLabel], text_len: int) -> float:
    if text_len <= 0:
        raise ScoringError("text_len must be positive")
    return spearman(char_probabilities(pred, text_len), char_probabilities(gold, text_len))


@dataclass(frozen=True)
class SampleScore:
    id: str
    lang: str
    iou: float
    cor: float


@dataclass(frozen=True)
class LanguageScore:
    lang: str
    count: int
    mean_iou: float
    mean_cor: float
    stddev_iou: float
    stddev_cor: float


@dataclass(frozen=True)
class ScoreReport:
    per_sample: tuple[SampleScore, ...]
    per_language: tuple[LanguageScore, ...]
    overall_iou: float
    overall_cor: float
    warnings: tuple[str, ...] = ()

    @property
    def overall(self) -> tuple[float, float]:
        return self.overall_iou, self.overall_cor

    def to_json_lines(self) -> str:
        lines = [
            {"type": "sample", "id": s.id, "lang": s.lang, "iou": s.iou, "cor": s.cor}
            for s in self.per_sample
        ]
        lines += [
            {
                "type": "language",
                "lang": l.lang,
                "count": l.count,
                "mean_iou": l.mean_iou,
                "mean_cor": l.mean_cor,
                "stddev_iou": l.stddev_iou,
                "stddev_cor": l.stddev_cor,
            }
            for l in self.per_language
        ]
        lines.append(
            {
                "type": "overall",
                "count": len(self.per_sample),
                "mean_iou": self.overall_iou,
                "mean_cor": self.overall_cor,
            }
        )
        return "".join(json.dumps(line, ensure_ascii=False) + "\n" for line in lines)

    def to_table(self) -> str:
        header = f"{'lang':<8}{'n':>5}{'IoU':>9}{'IoU sd':>9}{'COR':>9}{'COR sd':>9}"
        rows = [header, "-" * len(header)]
        for l in self.per_language:
            rows.append(
                f"{l.lang:<8}{l.count:>5}{l.mean_iou:>9.4f}{l.stddev_iou:>9.4f}"
                f"{l.mean_cor:>9.4f}{l.stddev_cor:>9.4f}"
            )
        rows.append("-" * len(header))
        rows.append(
            f"{'overall':<8}{len(self.per_sample):>5}{self.overall_iou:>9.4f}{'':>9}{self.overall_cor:>9.4f}"
        )
        return "\n".join(rows) + "\n"


def gold_hard_spans(sample: Sample) -> list[CharSpan]:
    """Gold hard labels merged into disjoint spans (or derived from soft labels)."""
    if sample.gold_hard is not None:
        spans = sample.gold_hard
    else:
        spans = tuple(l.span for l in sample.gold_soft or () if l.prob > GOLD_HARD_THRESHOLD)
    return merge_intervals([ResponseIntervals(tuple((s, None) for s in spans))])


def score_sample(pred: Prediction, gold: Sample) -> SampleScore:
    n = len(gold.model_output_text)
    iou = char_iou(pred.hard_labels, gold_hard_spans(gold), n)
    cor = soft_correlation(pred.soft_labels, gold.gold_soft or (), n)
    return SampleScore(gold.id, gold.lang, iou, cor)


def _duplicates(ids: Iterable[str]) -> list[str]:
    return sorted(i for i, c in Counter(ids).items() if c > 1)


def score_predictions(preds: Sequence[Prediction], gold: Sequence[Sample]) -> ScoreReport:
    for what, ids in (("prediction", [p.id for p in preds]), ("gold", [g.id for g in gold])):
        dup = _duplicates(ids)
        if dup:
            raise ScoringError(f"duplicate {what} id(s): {', '.join(dup)}")
    by_id = {p.id: p for p in preds}
    gold_ids = {g.id for g in gold}
    unknown = sorted(set(by_id) - gold_ids)
    if unknown:
        raise ScoringError(f"prediction id(s) not in gold: {', '.join(unknown)}")

    warnings = []
    scores = []
    for sample in gold:
        if not sample.has_gold:
            raise ScoringError(f"gold sample {sample.id!r} has no labels")
        pred = by_id.get(sample.id)
        if pred is None:
            msg = f"no prediction for {sample.id!r}; scored 0.0 / 0.0"
            logger.warning(msg)
            warnings.append(msg)
            scores.append(SampleScore(sample.id, sample.lang, 0.0, 0.0))
        else:
            scores.append(score_sample(pred, sample))

    grouped: dict[str, list[SampleScore]] = defaultdict(list)
    for s in scores:
        grouped[s.lang].append(s)
    per_lang = []
    for lang in sorted(grouped):
        ious = np.array([s.iou for s in grouped[lang]])
        cors = np.array([s.cor for s in grouped[lang]])
        per_lang.append(
            LanguageScore(
                lang,
                len(ious),
                float(ious.mean()),
                float(cors.mean()),
                float(ious.std()),
                float(cors.std()),
            )
        )
    overall_iou = float(np.mean([s.iou for s in scores])) if scores else 0.0
    overall_cor = float(np.mean([s.cor for s in scores])) if scores else 0.0
    return ScoreReport(tuple(scores), tuple(per_lang), overall_iou, overall_cor, tuple(warnings))


def score_dataset(pred_path: str | Path, gold_path: str | Path, schema=None) -> ScoreReport:
    """Join predictions with gold by id and score every gold sample.

    Raises:
        ScoringError: on duplicate ids or predictions for unknown ids.
    """
    try:
        preds = load_predictions(pred_path)
        gold = load_dataset(gold_path, schema)
    except DatasetError as exc:
        raise ScoringError(str(exc)) from exc
    return score_predictions(preds, gold)
