"""Grammar/spelling diagnostics.

An external checking service is queried when configured (POST form
``{text, language}`` returning ``{"matches": [{offset, length, message,
replacements: [{value}]}]}``, the de-facto public check API), and a small
built-in rule set always runs: doubled words, a/an agreement, and
lowercase sentence starts.  An unreachable service degrades to
builtin-only results instead of failing.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import requests

from .text import sentence_ranges, tokenize

CHECKER_URL_ENV = "DRAFTFORGE_CHECKER_URL"
DEFAULT_TIMEOUT = 5.0
DEFAULT_LANGUAGE = "en-US"

_VOWELS = set("aeiouAEIOU")


@dataclass(frozen=True)
class Diagnostic:
    start: int
    end: int
    message: str
    replacements: tuple[str, ...]
    source: str   # "external" | "builtin"


@dataclass(frozen=True)
class CheckerConfig:
    url: str | None = None
    language: str = DEFAULT_LANGUAGE
    timeout: float = DEFAULT_TIMEOUT

    def resolved_url(self) -> str | None:
        return os.environ.get(CHECKER_URL_ENV) or self.url


@dataclass(frozen=True)
class CheckResult:
    diagnostics: tuple[Diagnostic, ...]
    degraded: bool = False


def builtin_diagnostics(text: str) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    tokens = tokenize(text).tokens
    words = [t for t in tokens if t.surface[0].isalnum()]
    for prev, cur in zip(words, words[1:]):
        if prev.surface.lower() == cur.surface.lower():
            out.append(Diagnostic(
                start=prev.start, end=cur.end,
                message=f"doubled word “{prev.surface}”",
                replacements=(prev.surface,), source="builtin"))
    for prev, cur in zip(words, words[1:]):
        article = prev.surface.lower()
        starts_vowel = cur.surface[0] in _VOWELS
        if article == "a" and starts_vowel:
            fix = "an" if prev.surface.islower() else "An"
            out.append(Diagnostic(
                start=prev.start, end=prev.end,
                message=f"use “{fix}” before “{cur.surface}”",
                replacements=(fix,), source="builtin"))
        elif article == "an" and not starts_vowel:
            fix = "a" if prev.surface.islower() else "A"
            out.append(Diagnostic(
                start=prev.start, end=prev.end,
                message=f"use “{fix}” before “{cur.surface}”",
                replacements=(fix,), source="builtin"))
    for s, e in sentence_ranges(text):
        first = text[s]
        if first.isalpha() and first.islower():
            sent_tokens = tokenize(text[s:e]).tokens
            if sent_tokens:
                tok = sent_tokens[0]
                out.append(Diagnostic(
                    start=s + tok.start, end=s + tok.end,
                    message="sentence starts lowercase",
                    replacements=(tok.surface[0].upper() + tok.surface[1:],),
                    source="builtin"))
    return out


def query_external(text: str, config: CheckerConfig) -> list[Diagnostic]:
    url = config.resolved_url()
    if not url:
        return []
    resp = requests.post(url, data={"text": text, "language": config.language},
                         timeout=config.timeout)
    resp.raise_for_status()
    payload = resp.json()
    out = []
    for match in payload.get("matches", []):
        offset = int(match["offset"])
        length = int(match["length"])
        out.append(Diagnostic(
            start=offset, end=offset + length,
            message=str(match.get("message", "")),
            replacements=tuple(r["value"] for r in match.get("replacements", [])),
            source="external"))
    return out


def check(document_text: str, config: CheckerConfig | None = None) -> CheckResult:
    """All diagnostics for a document, sorted and non-overlapping.

    The external service is consulted when a URL is configured (flag or
    environment); any failure there flips ``degraded`` instead of raising.
    """
    config = config or CheckerConfig()
    degraded = False
    external: list[Diagnostic] = []
    if config.resolved_url():
        try:
            external = query_external(document_text, config)
        except Exception:
            degraded = True
    merged = external + builtin_diagnostics(document_text)
    # prefer longer ranges when diagnostics collide, then external source
    merged.sort(key=lambda d: (d.start, d.start - d.end, d.source != "external"))
    kept: list[Diagnostic] = []
    seen_ranges = set()
    last_end = -1
    for diag in merged:
        if (diag.start, diag.end) in seen_ranges or diag.start < last_end:
            continue
        seen_ranges.add((diag.start, diag.end))
        kept.append(diag)
        last_end = diag.end
    return CheckResult(diagnostics=tuple(kept), degraded=degraded)
