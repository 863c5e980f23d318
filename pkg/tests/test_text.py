import random

import pytest

from draftforge.text import (
    ABBREVIATIONS,
    IRREGULAR_LEMMAS,
    MarkedText,
    MarkParseError,
    Span,
    SpanError,
    detokenize,
    insert_marks,
    lemma,
    parse_marked,
    sentence_ranges,
    split_sentences,
    strip_marks,
    tokenize,
)

WORDS = [
    "the", "a", "draft", "model", "sentence", "revision", "token", "writer",
    "quick", "brown", "fox", "jumps", "over", "lazy", "dog", "results",
]


def random_sentence(rng, min_len=1, max_len=12):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(min_len, max_len)))


def test_tokenize_offsets():
    sent = tokenize("the cat sat")
    assert sent.surfaces == ("the", "cat", "sat")
    assert [(t.start, t.end) for t in sent.tokens] == [(0, 3), (4, 7), (8, 11)]


def test_tokenize_empty():
    assert len(tokenize("")) == 0


def test_tokenize_symbols_split():
    # "(" and ")" are individual tokens; placeholder handling happens in
    # parse_marked, not here.
    assert tokenize("GEC ()").surfaces == ("GEC", "(", ")")
    assert tokenize("human-computer").surfaces == ("human", "-", "computer")
    assert tokenize("don't stop").surfaces == ("don't", "stop")


def test_tokenize_reconstruction():
    rng = random.Random(7)
    for _ in range(300):
        parts = []
        for _ in range(rng.randint(0, 10)):
            parts.append(rng.choice(WORDS + list(".,;()!?")))
            parts.append(" " * rng.randint(1, 3))
        text = "".join(parts)
        sent = tokenize(text)
        prev_end = -1
        rebuilt = []
        cursor = 0
        for tok in sent.tokens:
            assert tok.start >= prev_end + 1 or tok.start == prev_end + 1 or tok.start >= cursor
            assert tok.start >= cursor
            assert text[tok.start:tok.end] == tok.surface
            assert text[cursor:tok.start].strip() == ""
            rebuilt.append(text[cursor:tok.start])
            rebuilt.append(tok.surface)
            cursor = tok.end
            prev_end = tok.end
        rebuilt.append(text[cursor:])
        assert "".join(rebuilt) == text


def test_split_two_sentences():
    assert len(split_sentences("A. B.")) == 2


def test_split_abbreviation():
    assert "mr" in ABBREVIATIONS
    sents = split_sentences("Mr. X ran.")
    assert len(sents) == 1
    assert sents[0].raw == "Mr. X ran."


def test_split_empty():
    assert split_sentences("") == []


def test_split_covers_everything():
    text = "First one. Second one!  Third, e.g. with Fig. 3?\nLast line"
    ranges = sentence_ranges(text)
    assert len(ranges) == 4
    cursor = 0
    for s, e in ranges:
        assert text[cursor:s].strip() == ""
        cursor = e
    assert text[cursor:].strip() == ""


def test_split_no_terminal_punct():
    sents = split_sentences("no punctuation here")
    assert len(sents) == 1
    assert sents[0].raw == "no punctuation here"


def test_insert_marks_reference_sentence():
    raw = "This formulation of the input and output promotes human-computer interaction."
    sent = tokenize(raw)
    idx = sent.surfaces.index("promotes") + 1
    marked = insert_marks(sent, Span(idx, idx))
    assert marked == (
        "This formulation of the input and output <? promotes ?> "
        "human-computer interaction."
    )


def test_insert_marks_full_and_single():
    assert insert_marks(tokenize("a b c"), Span(1, 3)) == "<? a b c ?>"
    assert insert_marks(tokenize("a b c"), Span(2, 2)) == "a <? b ?> c"


def test_insert_marks_bad_span():
    with pytest.raises(SpanError):
        insert_marks(tokenize("a b"), Span(1, 3))
    with pytest.raises(SpanError):
        Span(3, 2)


def test_parse_marked_placeholder_sentence():
    text = (
        "Grammar error correction (GEC) () of automatically correcting "
        "errors made by a human writer in text."
    )
    marked = parse_marked(text)
    assert marked.edit_span is None
    # One gap, right after the ")" closing "(GEC)".
    closing = marked.sentence.surfaces.index("GEC") + 2
    assert marked.placeholders == (closing,)
    assert marked.render() == text


def test_parse_marked_span():
    marked = parse_marked("a <? b ?> c")
    assert marked.edit_span == Span(2, 2)
    assert marked.placeholders == ()
    assert marked.sentence.raw == "a b c"


def test_parse_marked_unbalanced():
    with pytest.raises(MarkParseError):
        parse_marked("a <? b c")
    with pytest.raises(MarkParseError):
        parse_marked("a b ?> c")
    with pytest.raises(MarkParseError):
        parse_marked("a ?> b <? c")
    err = None
    try:
        parse_marked("x <? y")
    except MarkParseError as exc:
        err = exc
    assert err is not None and err.offset == 2


def test_parse_marked_empty_span():
    with pytest.raises(MarkParseError):
        parse_marked("a <? ?> b")


def test_mark_roundtrip_random():
    rng = random.Random(42)
    for _ in range(1000):
        raw = random_sentence(rng, 1, 12)
        sent = tokenize(raw)
        n = len(sent)
        a = rng.randint(1, n)
        b = rng.randint(a, n)
        gaps = tuple(sorted(rng.randint(0, n) for _ in range(rng.randint(0, 2))))
        marked = MarkedText(sentence=sent, edit_span=Span(a, b), placeholders=gaps)
        rendered = marked.render()
        back = parse_marked(rendered)
        assert back.edit_span == Span(a, b)
        assert back.placeholders == gaps
        assert back.sentence.raw == raw
        assert back.render() == rendered


def test_strip_marks():
    assert strip_marks("a <? b ?> c") == "a b c"
    assert strip_marks("a () b") == "a b"
    assert strip_marks("a <? b c") == "a b c"  # malformed falls back


def test_lemma_table():
    assert lemma("promotes") == "promote"
    assert lemma("ran") == "run"
    assert "ran" in IRREGULAR_LEMMAS
    assert lemma("GEC") == "gec"
    assert lemma("cats") == "cat"
    assert lemma("boxes") == "box"
    assert lemma("studies") == "study"
    assert lemma("running") == "run"
    assert lemma("walked") == "walk"
    assert lemma("was") == "be"
    assert lemma("sat") == "sit"
    assert lemma("cat's") == "cat"


def test_lemma_idempotent():
    rng = random.Random(3)
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    words = list(IRREGULAR_LEMMAS) + list(IRREGULAR_LEMMAS.values())
    for _ in range(2000):
        words.append("".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10))))
    for suffix in ("s", "es", "ies", "ing", "ed"):
        words.extend(w + suffix for w in ("walk", "promote", "study", "run", "mix"))
    for w in words:
        once = lemma(w)
        assert lemma(once) == once, (w, once, lemma(once))


def test_detokenize_spacing():
    assert detokenize(["a", "b", ",", "c", "."]) == "a b, c."
    assert detokenize(["(", "GEC", ")"]) == "(GEC)"
    assert detokenize(["human", "-", "computer"]) == "human-computer"
    assert detokenize([]) == ""
