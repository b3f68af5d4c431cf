"""Run configuration file (JSON) and construction of the objects it describes.

Example::

    {
      "method": "mscgh",
      "dataset": "val.jsonl",
      "output": "preds.jsonl",
      "lang": null,
      "backend": {"replay_dir": "fixtures/"},
      "cache_dir": "cache/",
      "workers": 4,
      "mscgh": {"n": 5, "prompt": "p2", "extractor": "statistical",
                "retrieval": {"source": "wiki", "mode": "abstract"}}
    }

Relative paths are resolved against the directory holding the config file.
Secrets come from the environment only: ``LLM_API_KEY``, ``SEARCH_API_KEY``,
``SEARCH_ENGINE_ID``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .gateway import ChatBackend, HttpChatBackend, RecordingBackend, ReplayBackend
from .keywords import DEFAULT_K
from .mrc import MrcConfig
from .mscgh import MscghConfig
from .retrieval import DEFAULT_SEARCH_ENDPOINT, DEFAULT_WIKI_ENDPOINT, DiskCache, HttpFetcher, RetrievalConfig
from .services import Services


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BackendSection(_Section):
    replay_dir: Optional[Path] = None
    endpoint: Optional[str] = None
    model: str = ""
    response_path: str = "choices.0.message.content"
    record_dir: Optional[Path] = None
    max_in_flight: int = Field(4, ge=1)

    @model_validator(mode="after")
    def _exactly_one(self) -> "BackendSection":
        if (self.replay_dir is None) == (self.endpoint is None):
            raise ValueError("backend needs exactly one of 'replay_dir' or 'endpoint'")
        return self


class RetrievalSection(_Section):
    enabled: bool = True
    source: Literal["wiki", "search"] = "wiki"
    mode: Literal["abstract", "full"] = "abstract"
    max_context_chars: int = Field(6000, gt=0)
    results_per_keyword: int = Field(3, gt=0)
    wiki_endpoint: str = DEFAULT_WIKI_ENDPOINT
    search_endpoint: str = DEFAULT_SEARCH_ENDPOINT
    offline: bool = False

    def build(self) -> RetrievalConfig:
        return RetrievalConfig(
            source=self.source,
            mode=self.mode,
            max_context_chars=self.max_context_chars,
            results_per_keyword=self.results_per_keyword,
            wiki_endpoint=self.wiki_endpoint,
            search_endpoint=self.search_endpoint,
            offline=self.offline,
        )


class MscghSection(_Section):
    n: int = Field(5, ge=1)
    prompt: Literal["p1", "p2"] = "p2"
    extractor: Literal["statistical", "llm", "external"] = "statistical"
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    detector_model: str = ""
    temperature: float = Field(1.0, ge=0.0, le=2.0)
    keyword_k: int = Field(DEFAULT_K, ge=1)
    keyword_model: str = ""
    retrieval: RetrievalSection = RetrievalSection()

    def build(self) -> MscghConfig:
        data = self.model_dump(exclude={"retrieval"})
        return MscghConfig(retrieval=self.retrieval.build(), **data)


class MrcSection(_Section):
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    checker_model: str = ""
    extractor_model: str = ""
    keyword_extractor: Literal["statistical", "llm", "external"] = "llm"
    keyword_k: int = Field(DEFAULT_K, ge=1)
    keyword_model: str = ""
    retrieval: RetrievalSection = RetrievalSection(source="search", mode="abstract")

    def build(self) -> MrcConfig:
        data = self.model_dump(exclude={"retrieval"})
        return MrcConfig(retrieval=self.retrieval.build(), **data)


class RunConfig(_Section):
    method: Literal["mscgh", "mrc"]
    dataset: Path
    output: Path
    lang: Optional[str] = None
    field_map: dict[str, str] = Field(default_factory=dict)
    backend: BackendSection
    cache_dir: Optional[Path] = None
    stopwords_dir: Optional[Path] = None
    extractor_command: Optional[str] = None
    workers: int = Field(1, ge=1)
    mscgh: MscghSection = MscghSection()
    mrc: MrcSection = MrcSection()

    def resolve_paths(self, base: Path) -> "RunConfig":
        def fix(p: Optional[Path]) -> Optional[Path]:
            return p if p is None or p.is_absolute() else base / p

        backend = self.backend.model_copy(
            update={"replay_dir": fix(self.backend.replay_dir), "record_dir": fix(self.backend.record_dir)}
        )
        return self.model_copy(
            update={
                "dataset": fix(self.dataset),
                "output": fix(self.output),
                "cache_dir": fix(self.cache_dir),
                "stopwords_dir": fix(self.stopwords_dir),
                "backend": backend,
            }
        )

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def retrieval_section(self) -> RetrievalSection:
        return self.mscgh.retrieval if self.method == "mscgh" else self.mrc.retrieval

    def build_backend(self) -> ChatBackend:
        b = self.backend
        if b.replay_dir is not None:
            return ReplayBackend(b.replay_dir)
        backend: ChatBackend = HttpChatBackend(
            b.endpoint, model=b.model, response_path=b.response_path, max_in_flight=b.max_in_flight
        )
        if b.record_dir is not None:
            backend = RecordingBackend(backend, b.record_dir)
        return backend

    def build_services(self) -> Services:
        cache = None
        if self.cache_dir is not None and self.retrieval_section().enabled:
            cache = DiskCache(self.cache_dir)
        return Services(
            gateway=self.build_backend(),
            cache=cache,
            fetcher=HttpFetcher() if cache is not None else None,
            stopwords_dir=self.stopwords_dir,
            extractor_command=self.extractor_command,
            max_parallel_calls=self.backend.max_in_flight,
        )


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse a config file, apply flag overrides, resolve relative paths.

    Raises:
        ConfigError: unreadable file or schema violation.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    backend_override = overrides.pop("backend", None)
    if backend_override:
        data["backend"] = backend_override
    data.update(overrides)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {_format_validation(exc)}") from exc
    return cfg.resolve_paths(path.parent)
