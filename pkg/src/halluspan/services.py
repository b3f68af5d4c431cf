"""Shared handles and helpers used by both detection pipelines."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

from .gateway import ChatBackend
from .keywords import (
    DEFAULT_K,
    KeywordSet,
    KeywordSource,
    extract_external,
    extract_llm,
    extract_statistical,
    load_stopwords,
)
from .model import Sample, validate_sample
from .retrieval import DiskCache, HttpFetcher, RetrievalConfig, Retriever

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A sample could not be processed; the batch run records it and moves on."""


@dataclass
class Services:
    """Everything a pipeline talks to.

    ``cache=None`` disables retrieval entirely (the context is left empty).
    """

    gateway: ChatBackend
    cache: DiskCache | None = None
    fetcher: HttpFetcher | None = None
    stopwords_dir: Path | None = None
    extractor_command: str | None = None
    search_api_key: str | None = None
    search_engine_id: str | None = None
    max_parallel_calls: int = 4

    def retriever(self, cfg: RetrievalConfig, lang: str) -> Retriever | None:
        if self.cache is None:
            return None
        return Retriever(
            dataclasses.replace(cfg, lang=lang),
            self.cache,
            self.fetcher,
            self.search_api_key,
            self.search_engine_id,
        )


def note(warnings: list[str] | None, msg: str) -> None:
    logger.warning(msg)
    if warnings is not None:
        warnings.append(msg)


def check_sample(sample: Sample) -> None:
    problems = validate_sample(sample)
    if problems:
        raise PipelineError(f"sample {sample.id!r} is invalid: " + "; ".join(problems))


def extract_keywords(
    sample: Sample,
    method: str,
    services: Services,
    k: int = DEFAULT_K,
    model_name: str = "",
    warnings: list[str] | None = None,
) -> KeywordSet:
    """Keywords from the question (``model_input``), never from the answer."""
    text = sample.model_input
    if not text.strip():
        return KeywordSet((), KeywordSource(method))
    if method == "statistical":
        stop = load_stopwords(sample.lang, services.stopwords_dir) if services.stopwords_dir else set()
        return extract_statistical(text, stop, k)
    if method == "llm":
        return extract_llm(text, sample.lang, services.gateway, k, model_name, warnings)
    if method == "external":
        if not services.extractor_command:
            raise PipelineError("external keyword extractor selected but no command configured")
        return extract_external(text, services.extractor_command, k)
    raise PipelineError(f"unknown keyword extractor {method!r}")


def retrieve_context(
    sample: Sample,
    keywords: KeywordSet,
    cfg: RetrievalConfig,
    services: Services,
    warnings: list[str] | None = None,
):
    """Combined context string; retrieval failures degrade to ``""``."""
    retriever = services.retriever(cfg, sample.lang)
    if retriever is None or not keywords.keywords:
        return ""
    try:
        return retriever.build_context(keywords.keywords, warnings).combined
    except Exception as exc:  # noqa: BLE001 - any provider failure degrades to no context
        note(warnings, f"sample {sample.id}: retrieval failed ({exc}); continuing without context")
        return ""
