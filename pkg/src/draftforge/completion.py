"""Title/section-conditioned completion from the cursor.

The prefix layout is byte-exact and shared with the completion training
corpus: ``@ Title @``, a blank line, ``* Section``, a newline, then the
text left of the cursor.  Absent fields drop out together with their
separators.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .lm import EOS, NGramLanguageModel
from .text import detokenize, tokenize

DEFAULT_K = 3
DEFAULT_MAX_TOKENS = 30
DEFAULT_NUCLEUS_P = 0.97

_SENTENCE_END = {".", "!", "?"}


@dataclass(frozen=True)
class CompletionContext:
    title: str | None = None
    section: str | None = None
    left_text: str = ""


@dataclass(frozen=True)
class Completion:
    text: str
    perplexity: float


def prefix_text(ctx: CompletionContext) -> str:
    parts = []
    if ctx.title is not None:
        parts.append(f"@ {ctx.title} @\n\n")
    if ctx.section is not None:
        parts.append(f"* {ctx.section}\n")
    parts.append(ctx.left_text)
    return "".join(parts)


def build_prefix(ctx: CompletionContext) -> tuple[str, ...]:
    """Token sequence the model is conditioned on."""
    return tokenize(prefix_text(ctx)).surfaces


def complete(ctx: CompletionContext, lm: NGramLanguageModel, k: int = DEFAULT_K,
             max_tokens: int = DEFAULT_MAX_TOKENS, p: float = DEFAULT_NUCLEUS_P,
             seed: int = 0) -> list[Completion]:
    """Draw ``k`` nucleus-sampled continuations, deduplicate, and order by
    perplexity ascending.

    Each sample runs until sentence-final punctuation, end of text, or
    ``max_tokens``.  Sample ``i`` uses its own stream derived from
    ``(seed, i)``, so results are reproducible and order-independent.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    prefix = list(build_prefix(ctx))
    drawn: list[tuple[str, ...]] = []
    for i in range(k):
        rng = random.Random(f"{seed}:{i}")
        tokens: list[str] = []
        while len(tokens) < max_tokens:
            sampled = lm.sample_nucleus(prefix + tokens, p, rng)
            if sampled == EOS:
                break
            tokens.append(sampled)
            if sampled in _SENTENCE_END:
                break
        drawn.append(tuple(tokens))
    unique: list[tuple[str, ...]] = []
    for tokens in drawn:
        if tokens not in unique:
            unique.append(tokens)
    out = []
    ctx_tail = prefix[-20:]
    for tokens in unique:
        ppl = lm.perplexity(tokens, ctx_tail, ()) if tokens else float("inf")
        out.append(Completion(text=detokenize(tokens), perplexity=ppl))
    out.sort(key=lambda c: c.perplexity)
    return out
