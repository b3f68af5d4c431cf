"""Samples, labels and predictions, plus JSONL dataset input/output.

All character offsets are half-open ``[start, end)`` and count Unicode code
points (Python ``str`` indices), never bytes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

CANONICAL_FIELDS = (
    "id",
    "lang",
    "model_input",
    "model_output_text",
    "model_id",
    "model_output_tokens",
    "model_output_logits",
    "soft_labels",
    "hard_labels",
)


class DatasetError(ValueError):
    """Raised for unreadable or invalid dataset / prediction files."""


@dataclass(frozen=True, order=True)
class CharSpan:
    start: int
    end: int

    def __post_init__(self) -> None:
        if isinstance(self.start, bool) or isinstance(self.end, bool):
            raise ValueError(f"span offsets must be integers: {self.start!r}, {self.end!r}")
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise ValueError(f"span offsets must be integers: {self.start!r}, {self.end!r}")
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def fits(self, text_len: int) -> bool:
        return self.end <= text_len

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class SoftLabel:
    span: CharSpan
    prob: float

    @property
    def start(self) -> int:
        return self.span.start

    @property
    def end(self) -> int:
        return self.span.end

    def as_dict(self) -> dict[str, Any]:
        return {"start": self.span.start, "end": self.span.end, "prob": self.prob}


@dataclass(frozen=True)
class ClaimTriplet:
    subject: str
    predicate: str
    object: str

    def __post_init__(self) -> None:
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"claim {name} must be a non-empty string")

    def render(self) -> str:
        return f"({self.subject}, {self.predicate}, {self.object})"


@dataclass(frozen=True)
class Sample:
    id: str
    lang: str
    model_input: str
    model_output_text: str
    model_id: str | None = None
    output_tokens: tuple[str, ...] | None = None
    output_logits: tuple[float, ...] | None = None
    gold_soft: tuple[SoftLabel, ...] | None = None
    gold_hard: tuple[CharSpan, ...] | None = None

    @property
    def has_gold(self) -> bool:
        return self.gold_soft is not None or self.gold_hard is not None


@dataclass(frozen=True)
class Prediction:
    id: str
    lang: str
    soft_labels: tuple[SoftLabel, ...] = field(default_factory=tuple)
    hard_labels: tuple[CharSpan, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "lang": self.lang,
            "soft_labels": [s.as_dict() for s in self.soft_labels],
            "hard_labels": [h.as_list() for h in self.hard_labels],
        }


def validate_sample(sample: Sample) -> list[str]:
    """Return human-readable invariant violations; empty when the sample is valid."""
    problems: list[str] = []
    text = sample.model_output_text
    if not text:
        problems.append("model_output_text: empty")
    text_len = len(text)

    for i, label in enumerate(sample.gold_soft or ()):
        if not label.span.fits(text_len):
            problems.append(
                f"gold_soft[{i}]: span [{label.start}, {label.end}) exceeds text length {text_len}"
            )
        if not isinstance(label.prob, (int, float)) or math.isnan(label.prob):
            problems.append(f"gold_soft[{i}]: prob {label.prob!r} is not a number")
        elif not 0.0 < label.prob <= 1.0:
            problems.append(f"gold_soft[{i}]: prob {label.prob} outside (0, 1]")

    for i, span in enumerate(sample.gold_hard or ()):
        if not span.fits(text_len):
            problems.append(
                f"gold_hard[{i}]: span [{span.start}, {span.end}) exceeds text length {text_len}"
            )

    if sample.output_tokens is not None and sample.output_logits is not None:
        if len(sample.output_tokens) != len(sample.output_logits):
            problems.append(
                f"output_tokens/output_logits: length mismatch "
                f"({len(sample.output_tokens)} vs {len(sample.output_logits)})"
            )
    return problems


def _resolve_schema(schema: Mapping[str, str] | None) -> dict[str, str]:
    mapping = {name: name for name in CANONICAL_FIELDS}
    if schema:
        unknown = set(schema) - set(CANONICAL_FIELDS)
        if unknown:
            raise DatasetError(f"unknown canonical field(s) in schema: {sorted(unknown)}")
        mapping.update(schema)
    return mapping


def _parse_span(raw: Any) -> CharSpan:
    if isinstance(raw, Mapping):
        return CharSpan(raw["start"], raw["end"])
    start, end = raw
    return CharSpan(start, end)


def _parse_soft(raw: Any) -> SoftLabel:
    if isinstance(raw, Mapping):
        return SoftLabel(CharSpan(raw["start"], raw["end"]), float(raw["prob"]))
    start, end, prob = raw
    return SoftLabel(CharSpan(start, end), float(prob))


def _iter_json_lines(path: Path) -> Iterable[tuple[int, dict[str, Any]]]:
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def sample_from_record(record: Mapping[str, Any], schema: Mapping[str, str] | None = None) -> Sample:
    """Build a :class:`Sample` from one decoded record, without bounds validation."""
    names = _resolve_schema(schema)

    def get(name: str) -> Any:
        return record.get(names[name])

    for required in ("id", "lang", "model_output_text"):
        if get(required) is None:
            raise DatasetError(f"missing required field {names[required]!r}")

    tokens = get("model_output_tokens")
    logits = get("model_output_logits")
    soft = get("soft_labels")
    hard = get("hard_labels")
    try:
        return Sample(
            id=str(get("id")),
            lang=str(get("lang")),
            model_input=str(get("model_input") or ""),
            model_output_text=str(get("model_output_text")),
            model_id=None if get("model_id") is None else str(get("model_id")),
            output_tokens=None if tokens is None else tuple(str(t) for t in tokens),
            output_logits=None if logits is None else tuple(float(x) for x in logits),
            gold_soft=None if soft is None else tuple(_parse_soft(s) for s in soft),
            gold_hard=None if hard is None else tuple(_parse_span(h) for h in hard),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"sample {get('id')!r}: {exc}") from exc


def load_dataset(path: str | Path, schema: Mapping[str, str] | None = None) -> list[Sample]:
    """Load a JSONL dataset in file order.

    Blank lines are skipped and unknown fields ignored. ``schema`` maps
    canonical field names (see :data:`CANONICAL_FIELDS`) to the names used in
    the file. Gold labels are checked against ``model_output_text``.

    Raises:
        DatasetError: on malformed JSON (with line number) or invalid labels
            (naming the sample id).
    """
    path = Path(path)
    samples = []
    for lineno, record in _iter_json_lines(path):
        try:
            sample = sample_from_record(record, schema)
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        problems = validate_sample(sample)
        if problems:
            raise DatasetError(f"sample {sample.id!r}: " + "; ".join(problems))
        samples.append(sample)
    return samples


def load_predictions(path: str | Path) -> list[Prediction]:
    path = Path(path)
    preds = []
    for lineno, record in _iter_json_lines(path):
        try:
            preds.append(
                Prediction(
                    id=str(record["id"]),
                    lang=str(record.get("lang", "")),
                    soft_labels=tuple(_parse_soft(s) for s in record.get("soft_labels") or ()),
                    hard_labels=tuple(_parse_span(h) for h in record.get("hard_labels") or ()),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{path}:{lineno}: invalid prediction ({exc})") from exc
    return preds


def dumps_prediction(pred: Prediction) -> str:
    return json.dumps(pred.as_dict(), ensure_ascii=False, separators=(",", ":"))


def write_predictions(preds: Sequence[Prediction], path: str | Path) -> None:
    """Write one JSON object per prediction, keys in a fixed order."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for pred in preds:
                handle.write(dumps_prediction(pred))
                handle.write("\n")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


LANGUAGE_NAMES = {
    "ar": "Arabic",
    "ca": "Catalan",
    "cs": "Czech",
    "de": "German",
    "en": "English",
    "es": "Spanish",
    "eu": "Basque",
    "fa": "Farsi",
    "fi": "Finnish",
    "fr": "French",
    "hi": "Hindi",
    "it": "Italian",
    "sv": "Swedish",
    "zh": "Chinese",
}


def language_name(code: str) -> str:
    """English name for a language code; unknown codes are returned unchanged."""
    return LANGUAGE_NAMES.get(code.lower().split("-")[0], code)
