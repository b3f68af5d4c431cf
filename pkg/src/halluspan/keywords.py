"""Keyword / keyphrase extraction from the question given to the LLM.

The built-in statistical extractor is a lightweight stand-in for YAKE: it
scores each candidate token by term frequency with a bonus for appearing
early.  Real toolchains (YAKE, NER models, jieba, ...) can be plugged in via
:func:`extract_external`, and :func:`extract_llm` asks a chat model.
"""

from __future__ import annotations

import enum
import logging
import shlex
import subprocess
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .gateway import ChatBackend, ChatRequest
from .model import language_name
from .parsing import parse_pipe_list
from .prompts import PromptKind, render

logger = logging.getLogger(__name__)

DEFAULT_K = 5


class KeywordSource(str, enum.Enum):
    STATISTICAL = "statistical"
    LLM = "llm"
    EXTERNAL = "external"


@dataclass(frozen=True)
class KeywordSet:
    keywords: tuple[str, ...]
    source: KeywordSource

    def __len__(self) -> int:
        return len(self.keywords)

    def __iter__(self):
        return iter(self.keywords)


def _dedupe(words: Iterable[str], k: int) -> tuple[str, ...]:
    seen = set()
    out = []
    for word in words:
        word = word.strip()
        key = word.casefold()
        if not word or key in seen:
            continue
        seen.add(key)
        out.append(word)
        if len(out) == k:
            break
    return tuple(out)


def load_stopwords(lang: str, directory: str | Path) -> set[str]:
    """Read ``<directory>/<lang>.txt`` (one word per line); missing file -> empty set."""
    path = Path(directory) / f"{lang}.txt"
    if not path.exists():
        logger.warning("no stopword list for %r at %s", lang, path)
        return set()
    text = path.read_text(encoding="utf-8")
    return {line.strip() for line in text.splitlines() if line.strip()}


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF  # unified ideographs
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2FA1F
        or 0xF900 <= cp <= 0xFAFF
        or 0x3040 <= cp <= 0x30FF  # hiragana, katakana
    )


def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "LMN"


def tokenize(text: str) -> list[str]:
    """Split on anything that is not a letter, mark or digit; CJK characters stand alone."""
    tokens = []
    current: list[str] = []
    for ch in text:
        if _is_cjk(ch):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(ch)
        elif _is_word_char(ch):
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def _has_letter(token: str) -> bool:
    return any(unicodedata.category(ch)[0] == "L" for ch in token)


def extract_statistical(text: str, stopwords: Iterable[str] = (), k: int = DEFAULT_K) -> KeywordSet:
    """Rank tokens by ``tf * (1 + 1 / (1 + first_position))``.

    Positions count surviving candidate tokens.  Stopwords match
    case-insensitively; numbers and tokens without letters are dropped.
    Ties go to the earlier token.

    >>> extract_statistical("Paris Paris Lyon", k=2).keywords
    ('Paris', 'Lyon')
    """
    stop = {w.casefold() for w in stopwords}
    counts: dict[str, int] = {}
    first: dict[str, int] = {}
    surface: dict[str, str] = {}
    position = 0
    for token in tokenize(text):
        key = token.casefold()
        if key in stop or not _has_letter(token):
            continue
        if key not in counts:
            counts[key] = 0
            first[key] = position
            surface[key] = token
        counts[key] += 1
        position += 1

    def score(key: str) -> float:
        return counts[key] * (1.0 + 1.0 / (1.0 + first[key]))

    ranked = sorted(counts, key=lambda key: (-score(key), first[key]))
    return KeywordSet(tuple(surface[key] for key in ranked[:k]), KeywordSource.STATISTICAL)


def extract_llm(
    text: str,
    lang: str,
    gateway: ChatBackend,
    k: int = DEFAULT_K,
    model_name: str = "",
    warnings: list[str] | None = None,
) -> KeywordSet:
    prompt = render(
        PromptKind.KEYWORD_EXTRACTION,
        {"k": k, "language": language_name(lang), "LLM input text": text},
    )
    raw = gateway.complete(ChatRequest(prompt=prompt, temperature=0.0, model_name=model_name))
    keywords = _dedupe(parse_pipe_list(raw).phrases, k)
    if not keywords:
        msg = "keyword extraction reply contained no keywords"
        logger.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return KeywordSet(keywords, KeywordSource.LLM)


def extract_external(text: str, command: str | Sequence[str], k: int = DEFAULT_K, timeout: float = 60.0) -> KeywordSet:
    """Run ``command`` with ``text`` on stdin; each stdout line is a keyword."""
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    proc = subprocess.run(
        argv, input=text, capture_output=True, text=True, encoding="utf-8", timeout=timeout, check=True
    )
    return KeywordSet(_dedupe(proc.stdout.splitlines(), k), KeywordSource.EXTERNAL)
