"""Character-interval algebra for combining detections from several responses.

Each LLM response is anchored into a :class:`ResponseIntervals`.  Responses
are fused with :func:`merge_intervals` and every merged interval gets a
probability from either :func:`aggregate_uniform` (plain token lists) or
:func:`aggregate_weighted` (token lists that carry probabilities).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import CharSpan, SoftLabel

logger = logging.getLogger(__name__)

WEIGHT_EXPONENT = 1.2
DEFAULT_THRESHOLD = 0.5


def _clean_prob(prob: float | None) -> float | None:
    # >1 clamps to 1; negative or NaN returns -1.0 so the caller drops it.
    if prob is None:
        return None
    prob = float(prob)
    if math.isnan(prob) or prob < 0.0:
        return -1.0
    return min(prob, 1.0)


def _resolve_plain(spans: list[CharSpan]) -> list[tuple[CharSpan, None]]:
    out: list[tuple[CharSpan, None]] = []
    for span in sorted(spans):
        if out and span.start < out[-1][0].end:
            prev = out[-1][0]
            out[-1] = (CharSpan(prev.start, max(prev.end, span.end)), None)
        else:
            out.append((span, None))
    return out


def _resolve_with_probs(items: list[tuple[CharSpan, float]]) -> list[tuple[CharSpan, float]]:
    # Split at every boundary, keep the highest probability per piece, then
    # re-join pieces that were only separated by the split.
    cuts = sorted({p for span, _ in items for p in (span.start, span.end)})
    pieces: list[tuple[CharSpan, float]] = []
    for lo, hi in zip(cuts, cuts[1:]):
        covering = [p for span, p in items if span.start <= lo and hi <= span.end]
        if covering:
            pieces.append((CharSpan(lo, hi), max(covering)))

    out: list[tuple[CharSpan, float]] = []
    for span, prob in pieces:
        if out:
            prev, prev_prob = out[-1]
            interior = any(s.start < span.start < s.end for s, _ in items)
            if prev.end == span.start and prev_prob == prob and interior:
                out[-1] = (CharSpan(prev.start, span.end), prob)
                continue
        out.append((span, prob))
    return out


@dataclass(frozen=True)
class ResponseIntervals:
    """Anchored spans from one response, sorted and free of overlaps.

    ``intervals`` holds ``(span, prob)`` pairs; ``prob`` is ``None`` for
    responses without probabilities.  Build instances with
    :meth:`from_items` so the ordering and overlap invariants hold.
    """

    intervals: tuple[tuple[CharSpan, float | None], ...] = ()

    @classmethod
    def from_items(cls, items: Iterable[tuple[CharSpan, float | None]]) -> "ResponseIntervals":
        plain: list[CharSpan] = []
        scored: list[tuple[CharSpan, float]] = []
        for span, prob in items:
            cleaned = _clean_prob(prob)
            if cleaned is None:
                plain.append(span)
            elif cleaned < 0.0:
                logger.warning("discarding interval %s with negative probability %r", span, prob)
            else:
                scored.append((span, cleaned))

        resolved: list[tuple[CharSpan, float | None]] = []
        resolved.extend(_resolve_with_probs(scored))
        if plain:
            # A plain span overlapping a scored one keeps only its uncovered remainder.
            scored_spans = [s for s, _ in resolved]
            for span, _ in _resolve_plain(plain):
                resolved.extend((piece, None) for piece in _subtract(span, scored_spans))
        resolved.sort(key=lambda pair: pair[0])
        return cls(tuple(resolved))

    @property
    def spans(self) -> list[CharSpan]:
        return [span for span, _ in self.intervals]

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)


def _subtract(span: CharSpan, others: Sequence[CharSpan]) -> list[CharSpan]:
    pieces = [(span.start, span.end)]
    for other in others:
        nxt = []
        for lo, hi in pieces:
            if other.end <= lo or other.start >= hi:
                nxt.append((lo, hi))
                continue
            if lo < other.start:
                nxt.append((lo, other.start))
            if other.end < hi:
                nxt.append((other.end, hi))
        pieces = nxt
    return [CharSpan(lo, hi) for lo, hi in pieces]


def merge_intervals(responses: Iterable[ResponseIntervals]) -> list[CharSpan]:
    """Fuse all overlapping or touching spans across responses.

    >>> r1 = ResponseIntervals.from_items([(CharSpan(0, 3), None), (CharSpan(2, 5), None)])
    >>> r2 = ResponseIntervals.from_items([(CharSpan(7, 9), None)])
    >>> r3 = ResponseIntervals.from_items([(CharSpan(9, 12), None)])
    >>> merge_intervals([r1, r2, r3])
    [CharSpan(start=0, end=5), CharSpan(start=7, end=12)]
    """
    spans = sorted(span for response in responses for span in response.spans)
    merged: list[CharSpan] = []
    for span in spans:
        if merged and span.start <= merged[-1].end:
            last = merged[-1]
            if span.end > last.end:
                merged[-1] = CharSpan(last.start, span.end)
        else:
            merged.append(span)
    return merged


def overlap_length(merged: CharSpan, response: ResponseIntervals) -> int:
    """Total number of characters of ``merged`` covered by the response's spans."""
    total = 0
    for span, _ in response.intervals:
        lo = max(merged.start, span.start)
        hi = min(merged.end, span.end)
        if hi > lo:
            total += hi - lo
    return total


def aggregate_uniform(merged: CharSpan, responses: Sequence[ResponseIntervals], n: int) -> float:
    """Mean fraction of ``merged`` covered by each of the ``n`` responses.

    Responses that detected nothing still count towards ``n``.
    """
    if n < 1:
        raise ValueError("aggregate_uniform needs at least one response (n >= 1)")
    if len(responses) > n:
        raise ValueError(f"got {len(responses)} responses but n={n}")
    length = merged.end - merged.start
    return sum(overlap_length(merged, r) / length for r in responses) / n


def aggregate_weighted(merged: CharSpan, responses: Sequence[ResponseIntervals]) -> float:
    """Overlap-weighted mean of interval probabilities, raised to :data:`WEIGHT_EXPONENT`.

    Every (response, interval) pair overlapping ``merged`` contributes its
    overlap length as weight.

    Raises:
        ValueError: if nothing overlaps ``merged`` or an overlapping interval
            carries no probability.
    """
    weighted = 0.0
    weight = 0
    for response in responses:
        for span, prob in response.intervals:
            ov = min(merged.end, span.end) - max(merged.start, span.start)
            if ov <= 0:
                continue
            if prob is None:
                raise ValueError(f"interval {span} overlapping {merged} has no probability")
            weighted += ov * prob
            weight += ov
    if weight == 0:
        raise ValueError(f"no response interval overlaps {merged}")
    return (weighted / weight) ** WEIGHT_EXPONENT


def _has_mixed_probs(merged: CharSpan, responses: Sequence[ResponseIntervals]) -> bool:
    kinds = {
        prob is None
        for response in responses
        for span, prob in response.intervals
        if min(merged.end, span.end) > max(merged.start, span.start)
    }
    return len(kinds) > 1


def soft_labels_from_responses(
    responses: Sequence[ResponseIntervals],
    n: int,
    weighted: bool,
    warnings: list[str] | None = None,
) -> list[SoftLabel]:
    """Merge responses and attach a probability to each merged interval.

    Merged intervals whose covering spans mix scored and unscored entries fall
    back to the uniform rule.  Intervals that end up with probability 0 are
    not emitted.
    """
    labels = []
    for merged in merge_intervals(responses):
        if not weighted:
            prob = aggregate_uniform(merged, responses, n)
        elif _has_mixed_probs(merged, responses):
            msg = f"interval [{merged.start}, {merged.end}) mixes scored and unscored spans; using uniform rule"
            logger.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            prob = aggregate_uniform(merged, responses, n)
        else:
            prob = aggregate_weighted(merged, responses)
        if prob > 0.0:
            labels.append(SoftLabel(merged, min(prob, 1.0)))
    return labels


def threshold_hard_labels(soft: Iterable[SoftLabel], threshold: float = DEFAULT_THRESHOLD) -> list[CharSpan]:
    """Spans whose probability is strictly above ``threshold``, in input order."""
    return [label.span for label in soft if label.prob > threshold]
