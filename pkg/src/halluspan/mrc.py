"""Reference-checking detector.

Claims are extracted from the output as triplets and then corrected or
expanded by the model.  Search context plus the corrected claims form the
references, and a single checker call returns hallucinated words with
probabilities, which are anchored into the output text.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Literal

from .anchoring import anchor_all
from .gateway import ChatBackend, ChatRequest
from .keywords import DEFAULT_K
from .model import ClaimTriplet, Prediction, SoftLabel, Sample
from .parsing import ParseError, parse_prob_json, parse_triplets
from .prompts import PromptKind, render
from .retrieval import RetrievalConfig
from .services import Services, check_sample, extract_keywords, note, retrieve_context
from .spans import DEFAULT_THRESHOLD, threshold_hard_labels

logger = logging.getLogger(__name__)

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


@dataclass(frozen=True)
class MrcConfig:
    retrieval: RetrievalConfig = field(
        default_factory=lambda: RetrievalConfig(source="search", mode="abstract")
    )
    threshold: float = DEFAULT_THRESHOLD
    checker_model: str = ""
    extractor_model: str = ""
    keyword_extractor: Literal["statistical", "llm", "external"] = "llm"
    keyword_k: int = DEFAULT_K
    keyword_model: str = ""
    max_output_chars: int = 8000

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


def serialize_claims(claims: list[ClaimTriplet]) -> str:
    return "\n".join(c.render() for c in claims)


def extract_claims(
    sample: Sample,
    gateway: ChatBackend,
    model_name: str = "",
    warnings: list[str] | None = None,
) -> list[ClaimTriplet]:
    prompt = render(
        PromptKind.MRC_CLAIM_EXTRACTION,
        {"LLM input text": sample.model_input, "LLM output text": sample.model_output_text},
    )
    raw = gateway.complete(ChatRequest(prompt=prompt, temperature=0.0, model_name=model_name))
    try:
        claims, problems = parse_triplets(raw)
    except ParseError as exc:
        note(warnings, f"sample {sample.id}: claim extraction unparseable ({exc}); no claims")
        return []
    for msg in problems:
        note(warnings, f"sample {sample.id}: {msg}")
    return claims


def correct_claims(claims: list[ClaimTriplet], gateway: ChatBackend, model_name: str = "") -> list[str]:
    """Ask the model to verify and expand the claims.

    One statement per claim is returned when the answer has exactly one
    non-empty line per claim; otherwise the whole answer is kept as a single
    entry.
    """
    if not claims:
        return []
    prompt = render(PromptKind.MRC_CLAIM_CORRECTION, {"claims": serialize_claims(claims)})
    raw = gateway.complete(ChatRequest(prompt=prompt, temperature=0.0, model_name=model_name))
    lines = [_LIST_MARKER.sub("", line).strip() for line in raw.splitlines()]
    lines = [line for line in lines if line]
    if len(lines) == len(claims):
        return lines
    block = raw.strip()
    return [block] if block else []


def build_references(context: str, corrected: list[str]) -> str:
    return "\n\n".join(part for part in [context, *corrected] if part)


def detect_mrc(
    sample: Sample,
    cfg: MrcConfig,
    services: Services,
    warnings: list[str] | None = None,
) -> Prediction:
    """Label one sample with a single checker call.

    An unparseable checker answer yields an empty prediction (recorded as a
    warning), not an error.
    """
    check_sample(sample)
    keywords = extract_keywords(
        sample, cfg.keyword_extractor, services, cfg.keyword_k, cfg.keyword_model, warnings
    )
    context = retrieve_context(sample, keywords, cfg.retrieval, services, warnings)
    claims = extract_claims(sample, services.gateway, cfg.extractor_model, warnings)
    corrected = correct_claims(claims, services.gateway, cfg.extractor_model)

    prompt = render(
        PromptKind.MRC_CHECKER,
        {
            "LLM input text": sample.model_input,
            "claims": serialize_claims(claims) or "None",
            "references": build_references(context, corrected) or "None",
            "LLM output text": sample.model_output_text,
        },
    )
    raw = services.gateway.complete(
        ChatRequest(
            prompt=prompt,
            temperature=0.0,
            max_output_chars=cfg.max_output_chars,
            model_name=cfg.checker_model,
        )
    )
    try:
        detection = parse_prob_json(raw)
    except ParseError as exc:
        note(warnings, f"sample {sample.id}: checker answer unparseable ({exc}); empty prediction")
        return Prediction(sample.id, sample.lang)
    for msg in detection.warnings:
        note(warnings, f"sample {sample.id}: checker: {msg}")

    response = anchor_all(sample.model_output_text, detection.items, warnings)
    soft = [SoftLabel(span, prob) for span, prob in response.intervals if prob]
    hard = threshold_hard_labels(soft, cfg.threshold)
    return Prediction(sample.id, sample.lang, tuple(soft), tuple(hard))
