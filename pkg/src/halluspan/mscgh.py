"""Sampling-consistency detector with external context.

For one sample: keywords from the question -> retrieved context -> the
detection prompt answered ``n`` times -> every answer anchored into the
output text -> intervals merged across answers -> one probability per merged
interval -> hard labels by threshold.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

from .anchoring import anchor_all
from .gateway import ChatRequest
from .keywords import DEFAULT_K
from .model import Prediction, Sample, language_name
from .parsing import ParseError, ParsedDetection, parse_pipe_list, parse_prob_json
from .prompts import PromptKind, render
from .retrieval import RetrievalConfig
from .services import PipelineError, Services, check_sample, extract_keywords, note, retrieve_context
from .spans import DEFAULT_THRESHOLD, soft_labels_from_responses, threshold_hard_labels

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MscghConfig:
    n: int = 5
    prompt: Literal["p1", "p2"] = "p2"
    extractor: Literal["statistical", "llm", "external"] = "statistical"
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    threshold: float = DEFAULT_THRESHOLD
    detector_model: str = ""
    temperature: float = 1.0
    keyword_k: int = DEFAULT_K
    keyword_model: str = ""
    max_output_chars: int = 8000

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.prompt not in ("p1", "p2"):
            raise ValueError(f"unknown prompt {self.prompt!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


def build_prompt(sample: Sample, context: str, prompt: str) -> str:
    if prompt == "p1":
        return render(
            PromptKind.MSCGH_P1,
            {"combined context": context, "LLM output text": sample.model_output_text},
        )
    return render(
        PromptKind.MSCGH_P2,
        {
            "language": language_name(sample.lang),
            "LLM input text": sample.model_input,
            "LLM output text": sample.model_output_text,
            "context": context,
        },
    )


def detect_mscgh(
    sample: Sample,
    cfg: MscghConfig,
    services: Services,
    warnings: list[str] | None = None,
) -> Prediction:
    """Label one sample.

    Raises:
        PipelineError: if the sample is invalid or none of the ``n`` answers
            could be parsed.
        GatewayError: if the chat backend fails.
    """
    check_sample(sample)
    keywords = extract_keywords(sample, cfg.extractor, services, cfg.keyword_k, cfg.keyword_model, warnings)
    context = retrieve_context(sample, keywords, cfg.retrieval, services, warnings)
    prompt = build_prompt(sample, context, cfg.prompt)

    def ask(k: int) -> str:
        req = ChatRequest(
            prompt=prompt,
            temperature=cfg.temperature,
            max_output_chars=cfg.max_output_chars,
            model_name=cfg.detector_model,
            attempt_index=k,
        )
        return services.gateway.complete(req)

    with ThreadPoolExecutor(max_workers=max(1, min(cfg.n, services.max_parallel_calls))) as pool:
        answers = list(pool.map(ask, range(cfg.n)))

    parsed: list[ParsedDetection] = []
    failures = 0
    for k, raw in enumerate(answers):
        if cfg.prompt == "p1":
            parsed.append(parse_pipe_list(raw))
            continue
        try:
            detection = parse_prob_json(raw)
        except ParseError as exc:
            failures += 1
            note(warnings, f"sample {sample.id}: answer {k} unparseable ({exc}); counted as empty")
            detection = ParsedDetection()
        for msg in detection.warnings:
            note(warnings, f"sample {sample.id}: answer {k}: {msg}")
        parsed.append(detection)
    if failures == cfg.n:
        raise PipelineError(f"sample {sample.id}: all {cfg.n} answers were unparseable")

    text = sample.model_output_text
    responses = [anchor_all(text, d.items, warnings) for d in parsed]
    soft = soft_labels_from_responses(responses, cfg.n, weighted=cfg.prompt == "p2", warnings=warnings)
    hard = threshold_hard_labels(soft, cfg.threshold)
    return Prediction(sample.id, sample.lang, tuple(soft), tuple(hard))
