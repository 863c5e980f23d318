"""Interpolated absolute-discounting n-gram language model.

Desk-scale model used for re-ranking revision candidates (per-token
perplexity with bidirectional context) and for sampled completion.  The
contexts a caller passes in are expected to be pre-truncated; nothing here
caps their length.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field

from .text import tokenize

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"

DEFAULT_ORDER = 3
DEFAULT_DISCOUNT = 0.75

_MAGIC = b"DFLM"
_FORMAT_VERSION = 1


class TrainingError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


Counts = dict[tuple[str, ...], dict[str, int]]


@dataclass
class NGramLanguageModel:
    """Frequency tables plus the discount; immutable once built.

    ``counts[k]`` maps length-k contexts to next-token counts.  The unigram
    table lives under the empty context.  Probabilities interpolate each
    level with the one below it, bottoming out at a uniform distribution
    over the prediction vocabulary (observed tokens plus UNK and EOS), so
    every probability is strictly positive whenever ``discount > 0``.
    """

    order: int
    discount: float
    vocab: tuple[str, ...]
    counts: tuple[Counts, ...]
    _totals: tuple[dict[tuple[str, ...], int], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if not (1 <= self.order <= 5):
            raise TrainingError(f"order must be in 1..5, got {self.order}")
        totals = tuple(
            {ctx: sum(table.values()) for ctx, table in level.items()}
            for level in self.counts
        )
        object.__setattr__(self, "_totals", totals)
        object.__setattr__(self, "_vocab_set", frozenset(self.vocab))

    # -- probabilities -------------------------------------------------

    @property
    def prediction_vocab(self) -> tuple[str, ...]:
        return self.vocab + (UNK, EOS)

    def map_token(self, token: str) -> str:
        if token in self._vocab_set or token in (UNK, BOS, EOS):
            return token
        return UNK

    def _context(self, tokens: list[str] | tuple[str, ...]) -> tuple[str, ...]:
        mapped = [self.map_token(t) for t in tokens]
        padded = [BOS] * (self.order - 1) + mapped
        if self.order == 1:
            return ()
        return tuple(padded[-(self.order - 1):])

    def prob(self, token: str, context: tuple[str, ...]) -> float:
        """P(token | context); context must already be mapped and sized."""
        base = 1.0 / len(self.prediction_vocab)
        p = base
        for k in range(len(context) + 1):
            ctx = context[len(context) - k:]
            table = self.counts[k].get(ctx)
            if not table:
                continue
            total = self._totals[k][ctx]
            head = max(table.get(token, 0) - self.discount, 0.0) / total
            backoff = self.discount * len(table) / total
            p = head + backoff * p
        return p

    def next_token_dist(self, context_tokens) -> dict[str, float]:
        """Full next-token distribution; probabilities sum to 1 (±1e-9)."""
        ctx = self._context(context_tokens)
        return {w: self.prob(w, ctx) for w in self.prediction_vocab}

    def logprob(self, token: str, context_tokens) -> float:
        return math.log(self.prob(self.map_token(token), self._context(context_tokens)))

    # -- scoring -------------------------------------------------------

    def perplexity(self, target_tokens, left_context=(), right_context=()) -> float:
        """Per-token perplexity of the target given surrounding context.

        The model scores left context, target, and right context jointly
        left to right, but averages log-probability only over the target
        tokens plus the transition into the first right-context token; that
        boundary term is how the right context influences the score.
        """
        target = list(target_tokens)
        if not target:
            raise ValueError("perplexity of an empty target is undefined")
        left = list(left_context)
        right = list(right_context)
        seq = [self.map_token(t) for t in left + target + right]
        padded = [BOS] * (self.order - 1) + seq
        first = len(left)
        last = len(left) + len(target) + (1 if right else 0)
        total = 0.0
        for i in range(first, last):
            j = i + self.order - 1
            ctx = tuple(padded[j - (self.order - 1): j])
            total += math.log(self.prob(padded[j], ctx))
        return math.exp(-total / (last - first))

    # -- sampling ------------------------------------------------------

    def sample_nucleus(self, context_tokens, p: float, rng) -> str:
        """Sample from the smallest probability-sorted set with mass >= p."""
        if not (0 < p <= 1):
            raise ValueError(f"nucleus mass must be in (0, 1], got {p}")
        if isinstance(rng, int):
            rng = random.Random(rng)
        dist = sorted(self.next_token_dist(context_tokens).items(),
                      key=lambda kv: (-kv[1], kv[0]))
        nucleus: list[tuple[str, float]] = []
        mass = 0.0
        for token, prob in dist:
            nucleus.append((token, prob))
            mass += prob
            if mass >= p - 1e-12:
                break
        u = rng.random() * mass
        acc = 0.0
        for token, prob in nucleus:
            acc += prob
            if u <= acc:
                return token
        return nucleus[-1][0]

    def nucleus_set(self, context_tokens, p: float) -> set[str]:
        dist = sorted(self.next_token_dist(context_tokens).items(),
                      key=lambda kv: (-kv[1], kv[0]))
        out, mass = set(), 0.0
        for token, prob in dist:
            out.add(token)
            mass += prob
            if mass >= p - 1e-12:
                break
        return out

    # -- serialization -------------------------------------------------

    def to_bytes(self) -> bytes:
        ids = {tok: i for i, tok in enumerate((UNK, BOS, EOS) + self.vocab)}
        out = [_MAGIC, struct.pack("<IId", _FORMAT_VERSION, self.order, self.discount)]
        out.append(struct.pack("<I", len(self.vocab)))
        for tok in self.vocab:
            raw = tok.encode("utf-8")
            out.append(struct.pack("<I", len(raw)))
            out.append(raw)
        out.append(struct.pack("<I", len(self.counts)))
        for level in self.counts:
            items = sorted(
                level.items(), key=lambda kv: tuple(ids[t] for t in kv[0])
            )
            out.append(struct.pack("<I", len(items)))
            for ctx, table in items:
                out.append(struct.pack(f"<{len(ctx)}I" if ctx else "<", *[ids[t] for t in ctx]))
                entries = sorted(table.items(), key=lambda kv: ids[kv[0]])
                out.append(struct.pack("<I", len(entries)))
                for tok, count in entries:
                    out.append(struct.pack("<IQ", ids[tok], count))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "NGramLanguageModel":
        view = memoryview(data)
        if bytes(view[:4]) != _MAGIC:
            raise ModelFormatError("not a draftforge model file")
        pos = 4
        version, order = struct.unpack_from("<II", view, pos)
        if version != _FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {version}")
        pos += 8
        (discount,) = struct.unpack_from("<d", view, pos)
        pos += 8
        (nvocab,) = struct.unpack_from("<I", view, pos)
        pos += 4
        vocab = []
        for _ in range(nvocab):
            (ln,) = struct.unpack_from("<I", view, pos)
            pos += 4
            vocab.append(bytes(view[pos:pos + ln]).decode("utf-8"))
            pos += ln
        tokens = (UNK, BOS, EOS) + tuple(vocab)
        (nlevels,) = struct.unpack_from("<I", view, pos)
        pos += 4
        counts: list[Counts] = []
        for k in range(nlevels):
            (nctx,) = struct.unpack_from("<I", view, pos)
            pos += 4
            level: Counts = {}
            for _ in range(nctx):
                ctx_ids = struct.unpack_from(f"<{k}I", view, pos) if k else ()
                pos += 4 * k
                (nent,) = struct.unpack_from("<I", view, pos)
                pos += 4
                table: dict[str, int] = {}
                for _ in range(nent):
                    tid, count = struct.unpack_from("<IQ", view, pos)
                    pos += 12
                    table[tokens[tid]] = count
                level[tuple(tokens[i] for i in ctx_ids)] = table
            counts.append(level)
        return cls(order=order, discount=discount, vocab=tuple(vocab),
                   counts=tuple(counts))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "NGramLanguageModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def train(corpus_lines, order: int = DEFAULT_ORDER,
          discount: float = DEFAULT_DISCOUNT) -> NGramLanguageModel:
    """Train a model from an iterable of sentence strings.

    Deterministic given identical input order: the vocabulary is sorted and
    the count tables carry plain integer frequencies.
    """
    if not (1 <= order <= 5):
        raise TrainingError(f"order must be in 1..5, got {order}")
    if not (0 < discount < 1):
        raise TrainingError(f"discount must be in (0, 1), got {discount}")
    sentences = [tuple(tokenize(line).surfaces) for line in corpus_lines]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise TrainingError("empty training corpus")
    vocab = tuple(sorted({tok for sent in sentences for tok in sent}))
    counts: tuple[Counts, ...] = tuple({} for _ in range(order))
    for sent in sentences:
        seq = [BOS] * (order - 1) + list(sent) + [EOS]
        for i in range(order - 1, len(seq)):
            for k in range(order):
                ctx = tuple(seq[i - k: i])
                table = counts[k].setdefault(ctx, {})
                table[seq[i]] = table.get(seq[i], 0) + 1
    return NGramLanguageModel(order=order, discount=discount, vocab=vocab,
                              counts=counts)


def train_file(path, order: int = DEFAULT_ORDER,
               discount: float = DEFAULT_DISCOUNT) -> NGramLanguageModel:
    with open(path, encoding="utf-8") as fh:
        return train([line.rstrip("\n") for line in fh], order=order,
                     discount=discount)
