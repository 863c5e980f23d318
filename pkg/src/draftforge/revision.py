"""Revision pipeline: build the marked input from a selection, generate
candidates, re-rank by contextual perplexity, filter, and attach diffs.

Candidates come back ordered by perplexity ascending, capped at
``top_k`` (8), and every survivor's perplexity is at most ``ppl_factor``
(1.3) times the input's, both scored with the same 20-token document
contexts and with marks stripped.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import text as textmod
from .generate import ReviserBackend, ScoredSentence
from .lm import NGramLanguageModel
from .text import MarkedText, Span, TokenizedSentence, sentence_ranges, tokenize

CONTEXT_TOKENS = 20
PPL_FACTOR = 1.3
TOP_K = 8


class RequestError(ValueError):
    pass


@dataclass(frozen=True)
class RevisionRequest:
    """A selection (character range) inside a document."""

    document: str
    selection: tuple[int, int]


@dataclass(frozen=True)
class EditRun:
    op: str        # "keep" | "insert" | "delete"
    text: str      # candidate-side text for keep/insert, source-side for delete


@dataclass(frozen=True)
class RevisionCandidate:
    text: str
    logprob: float
    perplexity: float
    diff: tuple[EditRun, ...]


class DiffError(ValueError):
    pass


def _lcs_opcodes(a: tuple[str, ...], b: tuple[str, ...]):
    """Token-level LCS opcodes: list of (op, a_start, a_end, b_start, b_end)."""
    n, m = len(a), len(b)
    lengths = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row = lengths[i]
        nxt = lengths[i + 1]
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                row[j] = nxt[j] if nxt[j] >= row[j + 1] else row[j + 1]
    ops = []
    i = j = 0

    def push(op, ai, aj, bi, bj):
        if ops and ops[-1][0] == op:
            prev = ops[-1]
            ops[-1] = (op, prev[1], aj, prev[3], bj)
        else:
            ops.append((op, ai, aj, bi, bj))

    while i < n and j < m:
        if a[i] == b[j]:
            push("keep", i, i + 1, j, j + 1)
            i += 1
            j += 1
        elif lengths[i + 1][j] >= lengths[i][j + 1]:
            push("delete", i, i + 1, j, j)
            i += 1
        else:
            push("insert", i, i, j, j + 1)
            j += 1
    if i < n:
        push("delete", i, n, j, j)
    if j < m:
        push("insert", i, i, j, m)
    return ops


def diff_highlight(source: str, candidate: str) -> tuple[EditRun, ...]:
    """Token-level LCS edit script between two strings.

    Keep and insert runs carry candidate text (including the whitespace in
    front of their tokens), so concatenating them reproduces the candidate
    byte for byte; delete runs carry the dropped source text for display.
    """
    src = tokenize(source)
    cand = tokenize(candidate)
    runs: list[EditRun] = []
    cand_cursor = 0
    src_cursor = 0
    for op, ai, aj, bi, bj in _lcs_opcodes(src.surfaces, cand.surfaces):
        if op == "delete":
            start = max(src.tokens[ai].start, src_cursor)
            end = src.tokens[aj - 1].end
            runs.append(EditRun("delete", source[start:end]))
            src_cursor = end
        else:
            end = cand.tokens[bj - 1].end
            runs.append(EditRun(op, candidate[cand_cursor:end]))
            cand_cursor = end
            if op == "keep":
                src_cursor = src.tokens[aj - 1].end
    if cand_cursor < len(candidate):
        tail = candidate[cand_cursor:]
        if runs and runs[-1].op != "delete":
            runs[-1] = EditRun(runs[-1].op, runs[-1].text + tail)
        else:
            runs.append(EditRun("insert" if tail.strip() else "keep", tail))
    if not runs:
        runs.append(EditRun("keep", candidate))
    return tuple(runs)


def apply_edit_script(runs, source: str) -> str:
    """Replay an edit script, checking it is consistent with ``source``."""
    src_tokens = tokenize(source).surfaces
    cursor = 0
    out = []
    for run in runs:
        toks = tokenize(run.text).surfaces
        if run.op in ("keep", "delete"):
            if src_tokens[cursor:cursor + len(toks)] != toks:
                raise DiffError(
                    f"{run.op} run {run.text!r} does not match source at token {cursor}")
            cursor += len(toks)
        if run.op in ("keep", "insert"):
            out.append(run.text)
    if cursor != len(src_tokens):
        raise DiffError("edit script does not cover the whole source")
    return "".join(out)


def _norm_tokens(text: str) -> tuple[str, ...]:
    return tokenize(text).surfaces


def rerank_and_filter(candidates: list[ScoredSentence], input_sentence: str,
                      left_ctx, right_ctx, lm: NGramLanguageModel,
                      ppl_factor: float = PPL_FACTOR
                      ) -> list[tuple[ScoredSentence, float]]:
    """Sort candidates by contextual perplexity, dropping those above
    ``ppl_factor`` times the input's perplexity (same contexts, marks
    stripped).  The sort is stable, so equal perplexities keep generation
    order."""
    input_tokens = _norm_tokens(textmod.strip_marks(input_sentence))
    input_ppl = lm.perplexity(input_tokens, left_ctx, right_ctx)
    scored = []
    for cand in candidates:
        toks = _norm_tokens(textmod.strip_marks(cand.text))
        if not toks:
            continue
        ppl = lm.perplexity(toks, left_ctx, right_ctx)
        if ppl <= ppl_factor * input_ppl:
            scored.append((cand, ppl))
    scored.sort(key=lambda pair: pair[1])
    return scored


@dataclass(frozen=True)
class RevisionSettings:
    beam_size: int = 15
    num_groups: int | None = None     # defaults to beam_size
    strength: float = 1.0
    top_k: int = TOP_K
    ppl_factor: float = PPL_FACTOR
    context_tokens: int = CONTEXT_TOKENS


@dataclass(frozen=True)
class ResolvedRequest:
    sentence_range: tuple[int, int]
    sentence: TokenizedSentence
    marked: MarkedText
    left_ctx: tuple[str, ...]
    right_ctx: tuple[str, ...]


def _paragraph_bounds(document: str, pos: int) -> tuple[int, int]:
    start = document.rfind("\n\n", 0, pos)
    start = 0 if start < 0 else start + 2
    end = document.find("\n\n", pos)
    end = len(document) if end < 0 else end
    return start, end


def resolve_request(request: RevisionRequest,
                    context_tokens: int = CONTEXT_TOKENS) -> ResolvedRequest:
    """Locate the sentence under the selection and build the marked input.

    The selection must stay inside one sentence.  A selection covering the
    whole sentence (or collapsed to a cursor) revises the full sentence; a
    smaller one snaps outward to token boundaries and becomes the edit
    span.  Placeholders already typed into the sentence are picked up
    either way.
    """
    document = request.document
    sel_start, sel_end = request.selection
    if not (0 <= sel_start <= sel_end <= len(document)):
        raise RequestError(f"selection ({sel_start}, {sel_end}) outside document")
    # trim whitespace from the selection edges before locating the sentence
    while sel_start < sel_end and document[sel_start].isspace():
        sel_start += 1
    while sel_end > sel_start and document[sel_end - 1].isspace():
        sel_end -= 1
    ranges = sentence_ranges(document)
    if not ranges:
        raise RequestError("document contains no sentences")
    homes = [
        (s, e) for s, e in ranges
        if s <= sel_start <= e and (sel_start == sel_end or sel_end <= e)
    ]
    if not homes:
        if any(s <= sel_start < e for s, e in ranges):
            raise RequestError("selection must not cross sentences")
        raise RequestError("selection is not inside a sentence")
    sent_start, sent_end = homes[0]

    sentence_raw = document[sent_start:sent_end]
    marked_in_text, removed = textmod.parse_marked_with_removals(sentence_raw)
    sentence = marked_in_text.sentence

    def to_clean(pos: int) -> int:
        # shift a raw-sentence offset past any stripped mark characters
        shift = 0
        for s, e in removed:  # ascending, non-overlapping
            if pos >= e:
                shift += e - s
            elif pos > s:
                shift += pos - s
            else:
                break
        return pos - shift

    span = None
    if sel_end > sel_start and (sel_start > sent_start or sel_end < sent_end):
        rel_start = to_clean(sel_start - sent_start)
        rel_end = to_clean(sel_end - sent_start)
        a = b = None
        for idx, tok in enumerate(sentence.tokens):
            if tok.end > rel_start and a is None:
                a = idx + 1
            if tok.start < rel_end:
                b = idx + 1
        if a is not None and b is not None and a <= b:
            if not (a == 1 and b == len(sentence)):
                span = Span(a, b)

    marked = MarkedText(sentence=sentence, edit_span=span,
                        placeholders=marked_in_text.placeholders)
    par_start, par_end = _paragraph_bounds(document, sent_start)
    left = tokenize(document[par_start:sent_start]).surfaces[-context_tokens:]
    right = tokenize(document[sent_end:par_end]).surfaces[:context_tokens]
    return ResolvedRequest(sentence_range=(sent_start, sent_end),
                           sentence=sentence, marked=marked,
                           left_ctx=left, right_ctx=right)


def revise(request: RevisionRequest, backend: ReviserBackend,
           lm: NGramLanguageModel,
           settings: RevisionSettings = RevisionSettings()
           ) -> list[RevisionCandidate]:
    """Run the full pipeline for one selection; at most ``top_k`` results.

    An empty list means nothing beat the perplexity bound ("no improvement
    found" at the protocol layer).
    """
    resolved = resolve_request(request, settings.context_tokens)
    return revise_resolved(resolved, backend, lm, settings)


def revise_resolved(resolved: ResolvedRequest, backend: ReviserBackend,
                    lm: NGramLanguageModel,
                    settings: RevisionSettings = RevisionSettings()
                    ) -> list[RevisionCandidate]:
    raw_candidates = backend.propose(resolved.marked, settings.beam_size)
    input_tokens = resolved.sentence.surfaces
    seen: set[tuple[str, ...]] = {input_tokens}
    unique: list[ScoredSentence] = []
    for cand in raw_candidates:
        key = _norm_tokens(cand.text)
        if key in seen:
            continue
        seen.add(key)
        unique.append(cand)
    if not unique:
        return []
    ranked = rerank_and_filter(unique, resolved.sentence.raw,
                               resolved.left_ctx, resolved.right_ctx, lm,
                               ppl_factor=settings.ppl_factor)
    source_text = resolved.sentence.raw
    out = []
    for cand, ppl in ranked[: settings.top_k]:
        out.append(RevisionCandidate(
            text=cand.text, logprob=cand.logprob, perplexity=ppl,
            diff=diff_highlight(source_text, cand.text)))
    return out


def machine_only_revise(document: str, backend: ReviserBackend,
                        lm: NGramLanguageModel,
                        settings: RevisionSettings = RevisionSettings()) -> str:
    """Replace every sentence with its top re-ranked candidate.

    Sentences with no surviving candidate stay as they are; everything
    between sentences is preserved byte for byte.
    """
    return machine_only_revise_with_stats(document, backend, lm, settings)[0]


def machine_only_revise_with_stats(
        document: str, backend: ReviserBackend, lm: NGramLanguageModel,
        settings: RevisionSettings = RevisionSettings()) -> tuple[str, int, int]:
    """Like :func:`machine_only_revise`, also reporting (changed, total)."""
    pieces = []
    cursor = 0
    changed = 0
    total = 0
    for start, end in sentence_ranges(document):
        total += 1
        pieces.append(document[cursor:start])
        req = RevisionRequest(document=document, selection=(start, end))
        try:
            candidates = revise(req, backend, lm, settings)
        except RequestError:
            candidates = []
        if candidates:
            changed += 1
            pieces.append(candidates[0].text)
        else:
            pieces.append(document[start:end])
        cursor = end
    pieces.append(document[cursor:])
    return "".join(pieces), changed, total
