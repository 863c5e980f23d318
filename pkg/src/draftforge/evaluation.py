"""Evaluation machinery: the edit-focus experiment with its sign test,
sentence alignment for draft scoring, and basic draft statistics.

The focus experiment marks a random short span in each sentence, decodes
10-best outputs with and without the marks, and counts how many outputs
still contain the span verbatim (the containment score).  Lower scores
with marks mean the reviser concentrated its edits where asked.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass

import numpy as np

from .generate import BuiltinReviser, ReviserBackend
from .lm import NGramLanguageModel
from .text import MarkedText, Span, TokenizedSentence, split_sentences, tokenize

SPAN_MIN_EXTENT = 1   # j - i lower bound: spans cover at least 2 tokens
SPAN_MAX_EXTENT = 5   # j - i upper bound: spans cover at most 6 tokens


class AllTiesError(ValueError):
    """Sign test is undefined when every pair is tied."""


def containment_score(x: TokenizedSentence | str, span: Span, outputs) -> int:
    """How many outputs contain the span's tokens as a contiguous run."""
    if isinstance(x, str):
        x = tokenize(x)
    if span.end > len(x):
        raise ValueError(f"span ({span.start}, {span.end}) outside sentence")
    needle = x.surfaces[span.start - 1: span.end]
    count = 0
    for output in outputs:
        haystack = tokenize(output).surfaces if isinstance(output, str) else tuple(output)
        n, m = len(haystack), len(needle)
        if any(haystack[i:i + m] == needle for i in range(n - m + 1)):
            count += 1
    return count


@dataclass(frozen=True)
class FocusPair:
    r_marked: int
    r_unmarked: int


@dataclass(frozen=True)
class FocusResult:
    pairs: tuple[FocusPair, ...]
    skipped: int

    def medians(self) -> tuple[float, float]:
        return (statistics.median(p.r_marked for p in self.pairs),
                statistics.median(p.r_unmarked for p in self.pairs))


def _random_span(n_tokens: int, rng: random.Random) -> Span | None:
    legal = [
        (i, j)
        for i in range(1, n_tokens + 1)
        for j in range(i + SPAN_MIN_EXTENT, min(n_tokens, i + SPAN_MAX_EXTENT) + 1)
    ]
    if not legal:
        return None
    return Span(*rng.choice(legal))


def focus_experiment(sentences, backend: ReviserBackend | None = None,
                     lm: NGramLanguageModel | None = None, seed: int = 0,
                     k: int = 10) -> FocusResult:
    """Paired containment scores over a corpus.

    Each sentence gets one uniformly random span covering 2 to 6 tokens;
    the span's containment is measured over the ``k``-best outputs for the
    marked and the unmarked input under identical decode settings.
    Sentences too short for any legal span are skipped and counted.
    Per-sentence randomness comes from a ``(seed, index)`` stream.
    """
    if backend is None:
        if lm is None:
            raise ValueError("either a backend or a model is required")
        backend = BuiltinReviser(lm)
    pairs = []
    skipped = 0
    for idx, sentence in enumerate(sentences):
        if isinstance(sentence, str):
            sentence = tokenize(sentence)
        rng = random.Random(f"{seed}:{idx}")
        span = _random_span(len(sentence), rng)
        if span is None:
            skipped += 1
            continue
        marked = MarkedText(sentence=sentence, edit_span=span)
        unmarked = MarkedText(sentence=sentence)
        out_marked = [c.text for c in backend.propose(marked, k)]
        out_plain = [c.text for c in backend.propose(unmarked, k)]
        pairs.append(FocusPair(
            r_marked=containment_score(sentence, span, out_marked),
            r_unmarked=containment_score(sentence, span, out_plain),
        ))
    return FocusResult(pairs=tuple(pairs), skipped=skipped)


def sign_test(pairs) -> float:
    """Exact one-sided sign test that the first element runs smaller.

    Ties are dropped; with n informative pairs of which k have first <
    second, the p-value is the binomial tail sum_{i=k..n} C(n,i) / 2^n.
    Raises :class:`AllTiesError` when nothing is informative.
    """
    wins = 0
    n = 0
    for first, second in pairs:
        if first == second:
            continue
        n += 1
        if first < second:
            wins += 1
    if n == 0:
        raise AllTiesError("sign test undefined: all pairs tied")
    tail = sum(math.comb(n, i) for i in range(wins, n + 1))
    return tail / 2 ** n


# --- sentence alignment and draft scoring ----------------------------------


class BagOfWordsEmbedder:
    """One-hot word vectors over a vocabulary built from what it sees, so a
    sentence mean is its (scaled) term-count vector."""

    def __init__(self):
        self._index: dict[str, int] = {}

    def vector(self, token: str) -> np.ndarray:
        idx = self._index.setdefault(token, len(self._index))
        vec = np.zeros(max(len(self._index), idx + 1))
        vec[idx] = 1.0
        return vec


class WordVectorFileEmbedder:
    """Embedder backed by a plain text file: ``token v1 ... vd`` per line."""

    def __init__(self, path):
        self.vectors: dict[str, np.ndarray] = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                vec = np.array([float(v) for v in parts[1:]])
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise ValueError(f"inconsistent vector width for {parts[0]!r}")
                self.vectors[parts[0]] = vec
        self.dim = dim or 0

    def vector(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec


def _sentence_vector(sentence: TokenizedSentence, embedder) -> np.ndarray:
    vecs = [embedder.vector(tok) for tok in sentence.surfaces]
    if not vecs:
        return np.zeros(1)
    width = max(len(v) for v in vecs)
    padded = [np.pad(v, (0, width - len(v))) for v in vecs]
    return np.mean(padded, axis=0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    width = max(len(a), len(b))
    a = np.pad(a, (0, width - len(a)))
    b = np.pad(b, (0, width - len(b)))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class AlignedPair:
    draft_index: int
    reference_index: int
    similarity: float


class AlignmentError(ValueError):
    pass


def align_sentences(draft: str, reference: str, embedder=None) -> list[AlignedPair]:
    """Map every draft sentence to its most similar reference sentence.

    Similarity is the cosine of mean word vectors; ties go to the earliest
    reference sentence.
    """
    if embedder is None:
        embedder = BagOfWordsEmbedder()
    draft_sents = split_sentences(draft)
    ref_sents = split_sentences(reference)
    if not ref_sents:
        raise AlignmentError("reference contains no sentences")
    ref_vecs = [_sentence_vector(s, embedder) for s in ref_sents]
    out = []
    for i, sent in enumerate(draft_sents):
        vec = _sentence_vector(sent, embedder)
        best_j, best_sim = 0, -2.0
        for j, rvec in enumerate(ref_vecs):
            sim = _cosine(vec, rvec)
            if sim > best_sim:
                best_j, best_sim = j, sim
        out.append(AlignedPair(draft_index=i, reference_index=best_j,
                               similarity=best_sim))
    return out


def token_f1(a: str, b: str) -> float:
    """Token-level F1 between two sentences; the built-in, stand-in pair
    metric (an external learned metric can be plugged in instead)."""
    ta = list(tokenize(a).surfaces)
    tb = list(tokenize(b).surfaces)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    overlap = 0
    pool = list(tb)
    for tok in ta:
        if tok in pool:
            pool.remove(tok)
            overlap += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(ta)
    recall = overlap / len(tb)
    return 2 * precision * recall / (precision + recall)


class MetricError(RuntimeError):
    def __init__(self, failures):
        pairs = ", ".join(str(i) for i, _ in failures)
        super().__init__(f"pair metric failed on pairs: {pairs}")
        self.failures = failures


def score_drafts(draft: str, reference: str, pair_metric=None, embedder=None) -> float:
    """Mean pair-metric score over aligned draft/reference sentences."""
    if pair_metric is None:
        pair_metric = token_f1
    draft_sents = split_sentences(draft)
    ref_sents = split_sentences(reference)
    alignment = align_sentences(draft, reference, embedder=embedder)
    scores = []
    failures = []
    for pair in alignment:
        try:
            scores.append(pair_metric(draft_sents[pair.draft_index].raw,
                                      ref_sents[pair.reference_index].raw))
        except Exception as exc:
            failures.append((pair.draft_index, exc))
    if failures:
        raise MetricError(failures)
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class DraftStats:
    length: int
    word_types: int


def draft_stats(text: str) -> DraftStats:
    tokens = tokenize(text).surfaces
    return DraftStats(length=len(tokens), word_types=len(set(tokens)))


# --- reports ----------------------------------------------------------------


def focus_report(result: FocusResult, p_value: float | None) -> dict:
    medians = result.medians() if result.pairs else (None, None)
    return {
        "pairs": [{"r": p.r_marked, "r_prime": p.r_unmarked} for p in result.pairs],
        "p_value": p_value,
        "medians": {"r": medians[0], "r_prime": medians[1]},
        "skipped": result.skipped,
    }


def focus_report_text(report: dict) -> str:
    lines = [
        "edit-focus experiment",
        "=====================",
        f"sentences scored : {len(report['pairs'])}",
        f"sentences skipped: {report['skipped']}",
        f"median r (marked)   : {report['medians']['r']}",
        f"median r' (unmarked): {report['medians']['r_prime']}",
    ]
    if report["p_value"] is None:
        lines.append("sign test p-value: undefined (all pairs tied)")
    else:
        lines.append(f"sign test p-value: {report['p_value']:.6g}")
    return "\n".join(lines) + "\n"


def focus_report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"
