"""Synthesis of training data: edit-mark attachment over draft/revision
pairs, completion-corpus formatting, and a simple noiser for manufacturing
desk-scale pairs.

A draft token counts as rewritten when no token with the same lemma sits
in the revision within 3 positions of its own index.  If more than 40% of
a draft was rewritten the pair is left unmarked; otherwise the span that
best separates rewritten from kept tokens gets wrapped in edit marks.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .text import (
    IRREGULAR_LEMMAS,
    Span,
    TokenizedSentence,
    detokenize,
    insert_marks,
    lemma,
    tokenize,
)

RATIO_THRESHOLD = 0.4
LEMMA_WINDOW = 3
FLAG_WEIGHT = 10
KEEP_WEIGHT = -1

END_OF_TEXT = "<|endoftext|>"
TITLE_OMIT_PROB = 0.2


@dataclass(frozen=True)
class TrainingPair:
    x: TokenizedSentence    # draft
    y: TokenizedSentence    # revision

    def __post_init__(self):
        if not len(self.x) or not len(self.y):
            raise ValueError("both sides of a training pair must be non-empty")

    @classmethod
    def from_strings(cls, draft: str, revision: str) -> "TrainingPair":
        return cls(x=tokenize(draft), y=tokenize(revision))


@dataclass(frozen=True)
class RewriteFlags:
    flags: tuple[int, ...]

    def __post_init__(self):
        if any(f not in (0, 1) for f in self.flags):
            raise ValueError("flags must be 0/1")

    def total(self) -> int:
        return sum(self.flags)


def rewrite_flags(pair: TrainingPair) -> RewriteFlags:
    """Flag draft tokens whose lemma is missing from the revision window.

    Token i of the draft is compared against revision positions
    max(1, i-3) .. min(M, i+3) (1-based); no lemma match there means the
    token was rewritten (flag 1).
    """
    y_lemmas = [lemma(t) for t in pair.y.surfaces]
    m = len(y_lemmas)
    flags = []
    for i, surface in enumerate(pair.x.surfaces, start=1):
        lo = max(1, i - LEMMA_WINDOW)
        hi = min(m, i + LEMMA_WINDOW)
        window = y_lemmas[lo - 1:hi] if lo <= hi else []
        flags.append(0 if lemma(surface) in window else 1)
    return RewriteFlags(flags=tuple(flags))


def edit_ratio(flags: RewriteFlags) -> float:
    if not flags.flags:
        raise ValueError("edit ratio of an empty flag vector is undefined")
    return flags.total() / len(flags.flags)


def span_objective(flags: RewriteFlags, a: int, b: int) -> int:
    """Inside-minus-outside weight sum for a candidate span (1-based)."""
    weights = [FLAG_WEIGHT if f else KEEP_WEIGHT for f in flags.flags]
    inside = sum(weights[a - 1:b])
    left = sum(weights[: a - 1])
    right = sum(weights[b:])
    return inside - left - right


def select_span(flags: RewriteFlags) -> Span | None:
    """Best span by the weighted objective; None when nothing was rewritten.

    Ties break toward the smallest start, then the smallest end.  Runs in
    O(N^2) over prefix sums, which is plenty at sentence length.
    """
    n = len(flags.flags)
    if flags.total() == 0:
        return None
    weights = [FLAG_WEIGHT if f else KEEP_WEIGHT for f in flags.flags]
    prefix = [0]
    for w in weights:
        prefix.append(prefix[-1] + w)
    total = prefix[n]
    best = None
    best_val = None
    for a in range(1, n + 1):
        for b in range(a, n + 1):
            inside = prefix[b] - prefix[a - 1]
            value = 2 * inside - total
            if best_val is None or value > best_val:
                best_val = value
                best = (a, b)
    return Span(*best)


@dataclass(frozen=True)
class MarkResult:
    text: str
    decision: str   # "marked" | "ratio_exceeded" | "no_rewrites"


def attach_marks(pair: TrainingPair) -> MarkResult:
    """Emit the draft with edit marks when the rewrite ratio allows it."""
    flags = rewrite_flags(pair)
    if flags.total() == 0:
        return MarkResult(text=pair.x.raw, decision="no_rewrites")
    if edit_ratio(flags) > RATIO_THRESHOLD:
        return MarkResult(text=pair.x.raw, decision="ratio_exceeded")
    span = select_span(flags)
    return MarkResult(text=insert_marks(pair.x, span), decision="marked")


# --- completion corpus -----------------------------------------------------


@dataclass(frozen=True)
class Section:
    name: str
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class Paper:
    title: str
    sections: tuple[Section, ...]


def load_papers(path) -> list[Paper]:
    """JSON lines: {"title": ..., "sections": [{"name", "paragraphs"}]}."""
    papers = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            papers.append(Paper(
                title=obj["title"],
                sections=tuple(
                    Section(name=s["name"], paragraphs=tuple(s["paragraphs"]))
                    for s in obj["sections"]),
            ))
    return papers


def format_paper(paper: Paper, rng: random.Random) -> str:
    """One paper block; the title drops out with 20% probability and the
    section order is shuffled, both from the provided stream."""
    omit_title = rng.random() < TITLE_OMIT_PROB
    sections = list(paper.sections)
    rng.shuffle(sections)
    parts = []
    if not omit_title:
        parts.append(f"@ {paper.title} @\n\n")
    blocks = []
    for section in sections:
        blocks.append(f"* {section.name}\n" + "\n".join(section.paragraphs) + "\n")
    parts.append("\n".join(blocks))
    parts.append(END_OF_TEXT + "\n")
    return "".join(parts)


def format_completion_corpus(papers, seed: int = 0) -> str:
    """Render papers into the completion training layout, one blank line
    between papers.  Paper ``i`` draws from a stream seeded by
    ``(seed, i)`` so shards can be produced independently."""
    blocks = []
    for idx, paper in enumerate(papers):
        rng = random.Random(f"{seed}:{idx}")
        blocks.append(format_paper(paper, rng))
    return "\n".join(blocks)


# --- noiser ----------------------------------------------------------------


_INFLECTION_GROUPS: dict[str, list[str]] = {}
for _form, _lem in IRREGULAR_LEMMAS.items():
    _INFLECTION_GROUPS.setdefault(_lem, [_lem]).append(_form)


def _inflection_variants(token: str) -> list[str]:
    lem = lemma(token)
    options = [w for w in _INFLECTION_GROUPS.get(lem, []) if w != token.lower()]
    if token.isalpha():
        if token.endswith("s") and lemma(token[:-1]) == lem and token[:-1]:
            options.append(token[:-1])
        elif lemma(token + "s") == lem:
            options.append(token + "s")
    return [w for w in options if w and lemma(w) == lem]


def synth_noise(revision: str, seed: int = 0, dropout: float = 0.1,
                swap: float = 0.05, inflect: float = 0.1) -> str:
    """Manufacture a rough draft from a clean sentence.

    Applies seeded word dropout, adjacent swaps, and lemma-preserving
    inflection changes at the given rates.  With all rates zero the input
    comes back untouched.
    """
    if dropout == swap == inflect == 0:
        return revision
    rng = random.Random(f"noise:{seed}")
    tokens = list(tokenize(revision).surfaces)
    kept = [t for t in tokens if not (len(tokens) > 1 and rng.random() < dropout)]
    if not kept:
        kept = tokens[:1]
    i = 0
    while i < len(kept) - 1:
        if rng.random() < swap:
            kept[i], kept[i + 1] = kept[i + 1], kept[i]
            i += 2
        else:
            i += 1
    out = []
    for tok in kept:
        variants = _inflection_variants(tok)
        if variants and rng.random() < inflect:
            out.append(rng.choice(variants))
        else:
            out.append(tok)
    return detokenize(out)


def load_pairs(path):
    """Tab-separated draft/revision lines; malformed ones are reported, not
    fatal.  Returns (pairs, skipped_count)."""
    pairs = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() and "\t" not in line:
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0].strip() or not cols[1].strip():
                skipped += 1
                continue
            try:
                pairs.append(TrainingPair.from_strings(cols[0], cols[1]))
            except ValueError:
                skipped += 1
    return pairs, skipped
