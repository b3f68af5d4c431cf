"""External context for a sample: encyclopedia extracts or web-search results.

Every answer is stored in a content-addressed on-disk cache so runs can be
replayed offline.  With ``offline=True`` a cache miss is an error instead of
a network call.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Any, Callable, Iterable, Literal

import httpx

from .httpretry import RetryExhausted, send_with_retry

logger = logging.getLogger(__name__)

ABSTRACT_CHARS = 200
DEFAULT_WIKI_ENDPOINT = "https://{lang}.wikipedia.org/w/api.php"
DEFAULT_SEARCH_ENDPOINT = "https://www.googleapis.com/customsearch/v1"


class RetrievalError(RuntimeError):
    def __init__(self, message: str, status_code: int | None = None):
        super().__init__(message)
        self.status_code = status_code


@dataclass(frozen=True)
class RetrievalConfig:
    source: Literal["wiki", "search"] = "wiki"
    mode: Literal["abstract", "full"] = "abstract"
    lang: str = "en"
    max_context_chars: int = 6000
    results_per_keyword: int = 3
    wiki_endpoint: str = DEFAULT_WIKI_ENDPOINT
    search_endpoint: str = DEFAULT_SEARCH_ENDPOINT
    offline: bool = False

    def __post_init__(self) -> None:
        if self.source not in ("wiki", "search"):
            raise ValueError(f"unknown retrieval source {self.source!r}")
        if self.mode not in ("abstract", "full"):
            raise ValueError(f"unknown retrieval mode {self.mode!r}")
        if self.max_context_chars <= 0:
            raise ValueError("max_context_chars must be positive")
        if self.results_per_keyword <= 0:
            raise ValueError("results_per_keyword must be positive")


@dataclass(frozen=True)
class ContextBundle:
    per_keyword: tuple[tuple[str, str, str], ...]  # (keyword, text, title or URL)
    combined: str


class DiskCache:
    """JSON values stored under ``<dir>/<hh>/<sha256>.json``.

    Writes go through a temporary file and an atomic rename, serialized per
    key; readers never see partial files.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def key(*parts: str) -> str:
        blob = json.dumps(list(parts), ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def get(self, key: str) -> Any | None:
        try:
            return json.loads(self._path(key).read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def put(self, key: str, value: Any) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = json.dumps(value, ensure_ascii=False, sort_keys=True, indent=1)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(data)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


class _TextExtractor(HTMLParser):
    _SKIP = {"script", "style", "noscript", "head", "template", "svg"}

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def html_to_text(html: str) -> str:
    """Drop tags, scripts and styles; collapse whitespace."""
    parser = _TextExtractor()
    parser.feed(html)
    parser.close()
    return re.sub(r"\s+", " ", " ".join(parser.parts)).strip()


class HttpFetcher:
    """GET with retry/backoff and a global bound on requests in flight."""

    def __init__(
        self,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.calls = 0
        self._client = httpx.Client(timeout=timeout, transport=transport, follow_redirects=True)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._count_lock = threading.Lock()

    def get(self, url: str, params: dict[str, Any] | None = None) -> httpx.Response:
        def send() -> httpx.Response:
            with self._count_lock:
                self.calls += 1
            with self._slots:
                return self._client.get(url, params=params)

        try:
            return send_with_retry(send, self.retries, self.backoff, self.sleep, what=f"GET {url}")
        except RetryExhausted as exc:
            raise RetrievalError(str(exc), exc.status_code) from exc


class Retriever:
    """Fetches and caches context for keywords under one :class:`RetrievalConfig`."""

    def __init__(
        self,
        cfg: RetrievalConfig,
        cache: DiskCache,
        fetcher: HttpFetcher | None = None,
        api_key: str | None = None,
        engine_id: str | None = None,
    ):
        self.cfg = cfg
        self.cache = cache
        self.fetcher = fetcher or HttpFetcher()
        self.api_key = api_key if api_key is not None else os.environ.get("SEARCH_API_KEY")
        self.engine_id = engine_id if engine_id is not None else os.environ.get("SEARCH_ENGINE_ID")

    def for_lang(self, lang: str) -> "Retriever":
        cfg = dataclasses.replace(self.cfg, lang=lang)
        return Retriever(cfg, self.cache, self.fetcher, self.api_key, self.engine_id)

    @property
    def endpoint(self) -> str:
        if self.cfg.source == "wiki":
            return self.cfg.wiki_endpoint.format(lang=self.cfg.lang)
        return self.cfg.search_endpoint

    def cache_key(self, keyword: str) -> str:
        cfg = self.cfg
        return DiskCache.key(cfg.source, cfg.mode, cfg.lang, keyword, self.endpoint)

    def _cached(self, key: str, keyword: str, compute: Callable[[], Any]) -> Any:
        with self.cache.lock(key):
            hit = self.cache.get(key)
            if hit is not None:
                return hit
            if self.cfg.offline:
                raise RetrievalError(f"offline and no cached {self.cfg.source} entry for {keyword!r}")
            value = compute()
            self.cache.put(key, value)
            return value

    # -- encyclopedia ---------------------------------------------------

    def fetch_wiki_context(self, keyword: str) -> tuple[str, str]:
        """Return ``(text, title)`` for the best-matching page, or ``("", "")``.

        Abstract mode keeps the first 200 characters of the plain-text
        extract; full mode keeps all of it.  Misses are cached too.
        """
        endpoint = self.endpoint

        def fetch() -> dict[str, str]:
            params = {
                "action": "query",
                "format": "json",
                "formatversion": "2",
                "generator": "search",
                "gsrsearch": keyword,
                "gsrlimit": "1",
                "prop": "extracts",
                "explaintext": "1",
                "redirects": "1",
            }
            resp = self.fetcher.get(endpoint, params)
            if resp.status_code >= 400:
                raise RetrievalError(f"encyclopedia API returned HTTP {resp.status_code}", resp.status_code)
            pages = (resp.json().get("query") or {}).get("pages") or []
            if isinstance(pages, dict):
                pages = list(pages.values())
            for page in pages:
                if not page.get("missing") and page.get("extract"):
                    return {"title": page.get("title", keyword), "extract": page["extract"]}
            return {"title": "", "extract": ""}

        entry = self._cached(self.cache_key(keyword), keyword, fetch)
        text = entry["extract"]
        if self.cfg.mode == "abstract":
            text = text[:ABSTRACT_CHARS]
        return text, entry["title"]

    # -- web search -----------------------------------------------------

    def fetch_search_context(self, keyword: str) -> list[tuple[str, str]]:
        """Return ``(text, url)`` per search result.

        Abstract mode uses result snippets.  Full mode downloads each result
        page and keeps up to ``max_context_chars / results_per_keyword``
        characters of its text, falling back to the snippet when the page
        cannot be fetched.
        """
        endpoint = self.endpoint

        def fetch() -> list[dict[str, str]]:
            if not self.api_key or not self.engine_id:
                raise RetrievalError("SEARCH_API_KEY and SEARCH_ENGINE_ID must be set for web search")
            params = {
                "key": self.api_key,
                "cx": self.engine_id,
                "q": keyword,
                "num": str(self.cfg.results_per_keyword),
                "hl": self.cfg.lang,
            }
            resp = self.fetcher.get(endpoint, params)
            if resp.status_code >= 400:
                raise RetrievalError(f"search API returned HTTP {resp.status_code}", resp.status_code)
            items = resp.json().get("items") or []
            results = []
            for item in items[: self.cfg.results_per_keyword]:
                snippet = re.sub(r"\s+", " ", item.get("snippet") or "").strip()
                url = item.get("link") or ""
                text = snippet
                if self.cfg.mode == "full" and url:
                    text = self._page_text(url) or snippet
                results.append({"text": text, "url": url})
            return results

        entries = self._cached(self.cache_key(keyword), keyword, fetch)
        return [(e["text"], e["url"]) for e in entries]

    def _page_text(self, url: str) -> str:
        limit = self.cfg.max_context_chars // self.cfg.results_per_keyword
        try:
            resp = self.fetcher.get(url)
        except RetrievalError as exc:
            logger.warning("could not fetch %s (%s); using snippet", url, exc)
            return ""
        if resp.status_code != 200:
            logger.warning("fetching %s returned HTTP %d; using snippet", url, resp.status_code)
            return ""
        return html_to_text(resp.text)[:limit]

    # -- combined -------------------------------------------------------

    def _fetch(self, keyword: str) -> list[tuple[str, str, str]]:
        if self.cfg.source == "wiki":
            text, title = self.fetch_wiki_context(keyword)
            return [(keyword, text, title)]
        return [(keyword, text, url) for text, url in self.fetch_search_context(keyword)]

    def build_context(self, keywords: Iterable[str], warnings: list[str] | None = None) -> ContextBundle:
        """Fetch every keyword (concurrently) and join the texts in keyword order.

        Texts are separated by blank lines and the result is cut to
        ``max_context_chars`` characters.  Individual failures become
        warnings; the last error is raised only if every keyword failed.
        """
        keywords = list(keywords)
        if not keywords:
            return ContextBundle((), "")

        def attempt(keyword: str):
            try:
                return self._fetch(keyword)
            except (RetrievalError, httpx.HTTPError, ValueError) as exc:
                return exc

        with ThreadPoolExecutor(max_workers=min(4, len(keywords))) as pool:
            outcomes = list(pool.map(attempt, keywords))

        entries: list[tuple[str, str, str]] = []
        errors = []
        for keyword, outcome in zip(keywords, outcomes):
            if isinstance(outcome, Exception):
                errors.append(outcome)
                msg = f"retrieval failed for keyword {keyword!r}: {outcome}"
                logger.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
            else:
                entries.extend(outcome)
        if len(errors) == len(keywords):
            raise errors[-1]
        combined = "\n\n".join(text for _, text, _ in entries if text)
        return ContextBundle(tuple(entries), combined[: self.cfg.max_context_chars])
