"""Tokenization, sentence splitting, and the edit-mark / placeholder syntax.

Every other module works in terms of the value types defined here.  The
mark syntax is bit-exact: the ASCII delimiters ``<?`` and ``?>`` wrap the
span a reviser should rework, with a single space on the inner side, and a
standalone ``()`` token marks a gap the reviser must fill.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

MARK_OPEN = "<?"
MARK_CLOSE = "?>"
PLACEHOLDER = "()"

# Words, optionally with internal apostrophes ("don't", "cat's"), or any
# single non-space symbol.  Symbols are never glued together, so "()" comes
# out as two tokens and mark delimiters are handled textually, not here.
_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+(?:'[A-Za-z0-9_]+)*|[^\sA-Za-z0-9_]")

_PLACEHOLDER_RE = re.compile(r"(?<!\S)\(\)(?!\S)")


class MarkParseError(ValueError):
    """Malformed mark syntax; ``offset`` points at the offending delimiter."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SpanError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedSentence:
    raw: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


@dataclass(frozen=True)
class Span:
    """Inclusive 1-based token range (start_token, end_token)."""

    start: int
    end: int

    def __post_init__(self):
        if not (1 <= self.start <= self.end):
            raise SpanError(f"invalid span ({self.start}, {self.end})")

    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class MarkedText:
    """A sentence plus at most one edit span and any number of placeholders.

    Placeholders are gap indices: 0 is before the first token, T after the
    last.  ``render()`` is the inverse of :func:`parse_marked` for canonical
    text (placeholder written outside an adjacent mark delimiter).
    """

    sentence: TokenizedSentence
    edit_span: Span | None = None
    placeholders: tuple[int, ...] = ()

    def __post_init__(self):
        n = len(self.sentence)
        if self.edit_span is not None and self.edit_span.end > n:
            raise SpanError(
                f"span ({self.edit_span.start}, {self.edit_span.end}) exceeds "
                f"{n} tokens"
            )
        for gap in self.placeholders:
            if not (0 <= gap <= n):
                raise SpanError(f"placeholder gap {gap} outside 0..{n}")

    def render(self) -> str:
        raw = self.sentence.raw
        tokens = self.sentence.tokens
        # (position, order, text); order fixes left-to-right output at equal
        # positions: close mark, then placeholder, then open mark.
        inserts: list[tuple[int, int, str]] = []
        if self.edit_span is not None:
            a, b = self.edit_span.start, self.edit_span.end
            inserts.append((tokens[a - 1].start, 2, MARK_OPEN + " "))
            inserts.append((tokens[b - 1].end, 0, " " + MARK_CLOSE))
        for gap in self.placeholders:
            if gap == 0:
                inserts.append((tokens[0].start if tokens else 0, 1, PLACEHOLDER + " "))
            else:
                inserts.append((tokens[gap - 1].end, 1, " " + PLACEHOLDER))
        out = []
        cursor = 0
        for pos, _, text in sorted(inserts, key=lambda ins: (ins[0], ins[1])):
            out.append(raw[cursor:pos])
            out.append(text)
            cursor = pos
        out.append(raw[cursor:])
        return "".join(out)


def tokenize(text: str) -> TokenizedSentence:
    """Split ``text`` into word/punctuation tokens with character offsets.

    Offsets are non-overlapping and strictly increasing, and the surfaces
    plus inter-token gaps reconstruct the input exactly.  Empty input gives
    an empty token list.
    """
    tokens = tuple(
        Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)
    )
    return TokenizedSentence(raw=text, tokens=tokens)


# Lowercased words that keep a trailing period from ending a sentence.
ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st",
        "fig", "figs", "eq", "eqs", "sec", "secs", "tab", "tabs",
        "no", "nos", "vol", "vols", "p", "pp", "ch", "chs", "ed", "eds",
        "al", "etc", "vs", "cf", "ca", "resp", "approx",
        "e.g", "i.e", "dept", "univ", "inc", "corp",
    }
)

_OPENERS = "\"'([{“‘«"
_CLOSERS = "\"')]}”’»"


def sentence_ranges(text: str) -> list[tuple[int, int]]:
    """Character ranges of sentences; everything between is whitespace."""
    ranges: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    while start < n and text[start].isspace():
        start += 1
    i = start
    while i < n:
        ch = text[i]
        if ch in ".!?":
            end = i + 1
            while end < n and text[end] in ".!?":
                end += 1
            while end < n and text[end] in _CLOSERS:
                end += 1
            nxt = end
            while nxt < n and text[nxt].isspace():
                nxt += 1
            if end < n and not text[end].isspace():
                i = end  # no gap after the punctuation: "3.14", "A.B."
                continue
            if not (ch == "." and _abbrev_before(text, i)):
                ranges.append((start, end))
                start = nxt
                i = nxt
                continue
            i = end
        else:
            i += 1
    if start < n:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            ranges.append((start, end))
    return ranges


def _abbrev_before(text: str, period_pos: int) -> bool:
    j = period_pos
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    word = text[j:period_pos].lower().rstrip(".")
    return word in ABBREVIATIONS


def split_sentences(text: str) -> list[TokenizedSentence]:
    """Split paragraph text into tokenized sentences."""
    return [tokenize(text[s:e]) for s, e in sentence_ranges(text)]


def insert_marks(sentence: TokenizedSentence | str, span: Span) -> str:
    """Wrap the span's tokens in the literal edit-mark delimiters.

    Inserts ``"<? "`` before the span's first token and ``" ?>"`` after its
    last, leaving every other character of the raw text untouched.
    """
    if isinstance(sentence, str):
        sentence = tokenize(sentence)
    if span.end > len(sentence):
        raise SpanError(
            f"span ({span.start}, {span.end}) exceeds {len(sentence)} tokens"
        )
    return MarkedText(sentence=sentence, edit_span=span).render()


def parse_marked(text: str) -> MarkedText:
    """Parse edit marks and placeholders out of ``text``.

    Accepts zero or one ``<? ... ?>`` pair and any number of standalone
    ``()`` tokens.  Raises :class:`MarkParseError` for unbalanced or empty
    marks, naming the offending character offset.
    """
    return parse_marked_with_removals(text)[0]


def parse_marked_with_removals(
    text: str,
) -> tuple[MarkedText, tuple[tuple[int, int], ...]]:
    """Like :func:`parse_marked`, also reporting which character ranges of
    the input were stripped away (needed to map offsets into the cleaned
    sentence)."""
    opens = [m.start() for m in re.finditer(re.escape(MARK_OPEN), text)]
    closes = [m.start() for m in re.finditer(re.escape(MARK_CLOSE), text)]
    # "<?>" style overlap: a close match starting inside an open match (or
    # vice versa) cannot happen since the delimiters differ in both chars.
    if len(opens) > 1:
        raise MarkParseError("more than one opening mark", opens[1])
    if len(closes) > 1:
        raise MarkParseError("more than one closing mark", closes[1])
    if len(opens) != len(closes):
        pos = opens[0] if opens else closes[0]
        raise MarkParseError("unbalanced edit marks", pos)
    if opens and closes[0] < opens[0]:
        raise MarkParseError("closing mark before opening mark", closes[0])

    removals: list[tuple[int, int, str]] = []  # (start, end, kind)
    if opens:
        o = opens[0]
        o_end = o + len(MARK_OPEN)
        if o_end < len(text) and text[o_end] == " ":
            o_end += 1
        c = closes[0]
        c_start = c
        if c_start > 0 and text[c_start - 1] == " ":
            c_start -= 1
        if c_start < o_end:
            raise MarkParseError("empty marked span", closes[0])
        removals.append((o, o_end, "open"))
        removals.append((c_start, c + len(MARK_CLOSE), "close"))
    def taken(idx: int) -> bool:
        return any(r0 <= idx < r1 for r0, r1, _ in removals)

    for m in _PLACEHOLDER_RE.finditer(text):
        s, e = m.start(), m.end()
        if taken(s):
            continue
        # Absorb one adjacent space, never one another removal already owns.
        if s > 0 and text[s - 1] == " " and not taken(s - 1):
            removals.append((s - 1, e, "ph"))
        elif e < len(text) and text[e] == " " and not taken(e):
            removals.append((s, e + 1, "ph"))
        else:
            removals.append((s, e, "ph"))

    removals.sort()
    cleaned = []
    cursor = 0
    anchors: dict[str, int] = {}
    ph_anchors: list[int] = []
    for s, e, kind in removals:
        cleaned.append(text[cursor:s])
        pos = sum(len(part) for part in cleaned)
        if kind == "ph":
            ph_anchors.append(pos)
        else:
            anchors[kind] = pos
        cursor = e
    cleaned.append(text[cursor:])
    clean_text = "".join(cleaned)

    sentence = tokenize(clean_text)
    span = None
    if opens:
        a = b = None
        for idx, tok in enumerate(sentence.tokens):
            if tok.end > anchors["open"] and a is None:
                a = idx + 1
            if tok.start < anchors["close"]:
                b = idx + 1
        if a is None or b is None or b < a:
            raise MarkParseError("marked span covers no tokens", opens[0])
        span = Span(a, b)
    gaps = tuple(
        sum(1 for tok in sentence.tokens if tok.end <= pos) for pos in ph_anchors
    )
    marked = MarkedText(sentence=sentence, edit_span=span, placeholders=gaps)
    return marked, tuple((s, e) for s, e, _ in removals)


def strip_marks(text: str) -> str:
    """Remove mark delimiters and placeholders, tolerating malformed input."""
    try:
        return parse_marked(text).sentence.raw
    except MarkParseError:
        out = _PLACEHOLDER_RE.sub("", text)
        out = out.replace(MARK_OPEN + " ", "").replace(" " + MARK_CLOSE, "")
        out = out.replace(MARK_OPEN, "").replace(MARK_CLOSE, "")
        return " ".join(out.split())


# Irregular forms resolved before and after suffix stripping.  Values are
# fixed points of lemma().
IRREGULAR_LEMMAS: dict[str, str] = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be",
    "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "goes": "go", "went": "go", "gone": "go", "going": "go",
    "made": "make", "making": "make",
    "took": "take", "taken": "take", "taking": "take",
    "gave": "give", "given": "give", "giving": "give",
    "wrote": "write", "written": "write", "writing": "write",
    "said": "say", "saying": "say",
    "saw": "see", "seen": "see",
    "came": "come", "coming": "come",
    "knew": "know", "known": "know",
    "found": "find", "thought": "think", "brought": "bring",
    "bought": "buy", "built": "build", "sought": "seek",
    "chose": "choose", "chosen": "choose",
    "got": "get", "gotten": "get",
    "held": "hold", "kept": "keep", "led": "lead", "left": "leave",
    "lost": "lose", "meant": "mean", "met": "meet", "paid": "pay",
    "sent": "send", "told": "tell", "understood": "understand",
    "won": "win", "ran": "run", "sat": "sit", "stood": "stand",
    "spoke": "speak", "spoken": "speak",
    "began": "begin", "begun": "begin",
    "ate": "eat", "eaten": "eat",
    "grew": "grow", "grown": "grow",
    "drew": "draw", "drawn": "draw",
    "showed": "show", "shown": "show",
    "used": "use", "using": "use",
    "felt": "feel", "fell": "fall", "fallen": "fall",
    "children": "child", "men": "man", "women": "woman",
    "mice": "mouse", "feet": "foot", "teeth": "tooth", "people": "person",
    "better": "good", "best": "good", "worse": "bad", "worst": "bad",
}

_VOWELS = set("aeiouy")


def _has_vowel(word: str) -> bool:
    return any(ch in _VOWELS for ch in word)


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
        return stem[:-1]
    return stem


def lemma(token: str) -> str:
    """Deterministic lowercase lemma via suffix stripping plus a lookup table.

    Coverage is deliberately shallow; the useful guarantees are determinism
    and idempotence (lemma(lemma(w)) == lemma(w)).
    """
    w = token.lower()
    if w.endswith("'s"):
        w = w[:-2]
    elif w.endswith("'"):
        w = w[:-1]
    if not w:
        return token.lower()
    if w in IRREGULAR_LEMMAS:
        return IRREGULAR_LEMMAS[w]
    if w.endswith("ies") and len(w) >= 5:
        w = w[:-3] + "y"
    elif w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("es") and w[:-2].endswith(("ch", "sh", "x", "z", "s")):
        w = w[:-2]
    elif w.endswith("s") and len(w) >= 3 and not w.endswith(("ss", "us", "is")):
        w = w[:-1]
    elif w.endswith("ing") and len(w) >= 6 and _has_vowel(w[:-3]):
        w = _undouble(w[:-3])
    elif w.endswith("ed") and len(w) >= 5 and _has_vowel(w[:-2]):
        w = _undouble(w[:-2])
    return IRREGULAR_LEMMAS.get(w, w)


_NO_SPACE_BEFORE = set(".,;:!?%)]}") | {"'", "''", "…", "?>"}
_NO_SPACE_AFTER = set("([{") | {"``", "<?"}
_JOIN_BOTH = {"-", "–", "—", "/"}


def detokenize(tokens: list[str] | tuple[str, ...]) -> str:
    """Join tokens into readable text with standard spacing rules."""
    out: list[str] = []
    prev: str | None = None
    for tok in tokens:
        if prev is None:
            out.append(tok)
        elif tok in _JOIN_BOTH or prev in _JOIN_BOTH:
            out.append(tok)
        elif tok in _NO_SPACE_BEFORE or prev in _NO_SPACE_AFTER:
            out.append(tok)
        else:
            out.append(" " + tok)
        prev = tok
    return "".join(out)


def normalized(text: str) -> str:
    """Whitespace-normalized form used for candidate deduplication."""
    return " ".join(text.split())
