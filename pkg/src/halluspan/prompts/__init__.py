"""Prompt templates stored as ``<kind>.txt`` assets next to this module.

Templates use ``{placeholder}`` fields (names may contain spaces, e.g.
``{LLM output text}``); literal braces are written ``{{`` and ``}}``.
``mrc_claim_extraction`` and ``keyword_extraction`` are this package's own
wording; the other four reproduce the published prompts.
"""

from __future__ import annotations

import enum
import string
from functools import lru_cache
from pathlib import Path
from typing import Mapping

TEMPLATE_DIR = Path(__file__).parent


class PromptKind(str, enum.Enum):
    MSCGH_P1 = "mscgh_p1"
    MSCGH_P2 = "mscgh_p2"
    MRC_CLAIM_EXTRACTION = "mrc_claim_extraction"
    MRC_CLAIM_CORRECTION = "mrc_claim_correction"
    MRC_CHECKER = "mrc_checker"
    KEYWORD_EXTRACTION = "keyword_extraction"


class PromptError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@lru_cache(maxsize=None)
def _load(path: Path) -> tuple[tuple[str, str | None], ...]:
    raw = path.read_text(encoding="utf-8")
    if raw.endswith("\n"):
        raw = raw[:-1]
    parts = []
    for literal, field, spec, conv in string.Formatter().parse(raw):
        if field is not None and (spec or conv):
            # Formatter splits "{a:b}" / "{a!r}"; keep those characters as part of the name.
            field = field + (f"!{conv}" if conv else "") + (f":{spec}" if spec else "")
        parts.append((literal, field))
    return tuple(parts)


def placeholders(kind: PromptKind | str, template_dir: Path | None = None) -> frozenset[str]:
    kind = PromptKind(kind)
    parts = _load((template_dir or TEMPLATE_DIR) / f"{kind.value}.txt")
    return frozenset(field for _, field in parts if field is not None)


def render(kind: PromptKind | str, values: Mapping[str, object], template_dir: Path | None = None) -> str:
    """Fill a template; every placeholder must be supplied and no others.

    Raises:
        PromptError: ``missing placeholder: <name>`` or ``unknown placeholder: <name>``.
    """
    kind = PromptKind(kind)
    parts = _load((template_dir or TEMPLATE_DIR) / f"{kind.value}.txt")
    expected = {field for _, field in parts if field is not None}
    for name in sorted(expected):
        if name not in values:
            raise PromptError(f"missing placeholder: {name}")
    for name in sorted(values):
        if name not in expected:
            raise PromptError(f"unknown placeholder: {name}")
    out = []
    for literal, field in parts:
        out.append(literal)
        if field is not None:
            out.append(str(values[field]))
    return "".join(out)
