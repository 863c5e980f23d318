"""Diverse beam search plus the candidate backends that drive it.

The search is generic over a step-wise :class:`GeneratorBackend`.  The
built-in :class:`EditProposalBackend` rewrites a marked sentence with a
trained n-gram model: tokens outside the edit span are copied verbatim
(with single-token adjustments allowed right next to the span), tokens
inside the span may be kept, substituted, dropped, or extended, and every
placeholder is filled with one to four tokens.  External sequence models
plug in through :class:`ExternalBackend` instead, which speaks
line-delimited JSON over HTTP or a child-process pipe.
"""

from __future__ import annotations

import json
import math
import subprocess
from dataclasses import dataclass, field
from typing import Protocol

import requests

from .lm import BOS, EOS, UNK, NGramLanguageModel
from .text import MarkedText, Span, detokenize

END_TOKEN = EOS

DEFAULT_BEAM_SIZE = 15
DEFAULT_NUM_GROUPS = 15
DEFAULT_STRENGTH = 1.0


class GenerationError(RuntimeError):
    """Backend failure, annotated with where the search was at the time."""

    def __init__(self, message: str, group: int | None = None,
                 step: int | None = None):
        where = ""
        if group is not None:
            where = f" (group {group}, step {step})"
        super().__init__(message + where)
        self.group = group
        self.step = step


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    logprob: float          # cumulative model log-probability
    score: float            # logprob minus accumulated diversity penalties
    group: int
    state: object = None
    truncated: bool = False


class GeneratorBackend(Protocol):
    def start(self, source: MarkedText) -> object: ...

    def step(self, hyp: Hypothesis, source: MarkedText
             ) -> list[tuple[str, float, object]]: ...

    def is_complete(self, hyp: Hypothesis) -> bool: ...


def diverse_beam(backend, source, beam_size: int = DEFAULT_BEAM_SIZE,
                 num_groups: int = DEFAULT_NUM_GROUPS,
                 strength: float = DEFAULT_STRENGTH,
                 max_len: int = 80) -> list[Hypothesis]:
    """Group-wise beam search with a Hamming diversity penalty.

    Groups expand in fixed order each time step; a candidate's score is
    penalized by ``strength`` times the number of earlier groups that chose
    the same token at the same step.  With one group or zero strength this
    is plain beam search.  Completed hypotheses retire from their group and
    the best ``beam_size`` by adjusted score come back, best first.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if num_groups < 1 or beam_size % num_groups != 0:
        raise ValueError(f"num_groups {num_groups} must divide beam_size {beam_size}")
    if strength < 0:
        raise ValueError("strength must be >= 0")
    width = beam_size // num_groups
    initial = backend.start(source)
    groups: list[list[Hypothesis]] = [
        [Hypothesis(tokens=(), logprob=0.0, score=0.0, group=g, state=initial)]
        for g in range(num_groups)
    ]
    completed: list[Hypothesis] = []
    for step in range(max_len):
        chosen_at_step: dict[str, int] = {}
        alive = False
        for g in range(num_groups):
            if not groups[g]:
                continue
            candidates: list[tuple[float, Hypothesis]] = []
            for hyp in groups[g]:
                try:
                    expansions = backend.step(hyp, source)
                except Exception as exc:
                    raise GenerationError(str(exc), group=g, step=step) from exc
                for token, logprob, state in expansions:
                    if not math.isfinite(logprob):
                        raise GenerationError(
                            f"non-finite step score for token {token!r}",
                            group=g, step=step)
                    penalty = strength * chosen_at_step.get(token, 0)
                    new = Hypothesis(
                        tokens=hyp.tokens + (token,),
                        logprob=hyp.logprob + logprob,
                        score=hyp.score + logprob - penalty,
                        group=g,
                        state=state,
                    )
                    candidates.append((new.score, new))
            candidates.sort(key=lambda pair: -pair[0])
            keep = candidates[:width]
            survivors = []
            for _, hyp in keep:
                token = hyp.tokens[-1]
                chosen_at_step[token] = chosen_at_step.get(token, 0) + 1
                if backend.is_complete(hyp):
                    completed.append(hyp)
                else:
                    survivors.append(hyp)
            groups[g] = survivors
            alive = alive or bool(survivors)
        if not alive:
            break
    for g in range(num_groups):
        for hyp in groups[g]:
            completed.append(
                Hypothesis(tokens=hyp.tokens, logprob=hyp.logprob,
                           score=hyp.score, group=hyp.group, state=hyp.state,
                           truncated=True))
    completed.sort(key=lambda h: -h.score)
    return completed[:beam_size]


@dataclass(frozen=True)
class ScoredSentence:
    text: str
    logprob: float
    truncated: bool = False


class ReviserBackend(Protocol):
    """Whole-candidate interface the revision pipeline consumes."""

    def propose(self, source: MarkedText, k: int) -> list[ScoredSentence]: ...


# --- built-in edit-proposal backend ---------------------------------------

_FILL = "fill"
_TOKEN = "token"
_END = "end"

_OUTSIDE = "outside"
_HALO = "halo"
_MARKED = "marked"
_SOFT = "soft"


@dataclass(frozen=True)
class _EditState:
    plan: tuple
    slot: int
    filled: int = 0
    inserted: bool = False
    done: bool = False


def _build_plan(source: MarkedText) -> tuple:
    tokens = source.sentence.surfaces
    n = len(tokens)
    if source.edit_span is not None:
        a, b = source.edit_span.start, source.edit_span.end
        inside = _MARKED
    elif not source.placeholders:
        a, b = 1, n   # nothing requested: gentle whole-sentence revision
        inside = _SOFT
    else:
        a, b = 0, -1  # placeholders only: just fill, copy the rest
        inside = _SOFT
    slots = []
    for i in range(1, n + 1):
        for gap in source.placeholders:
            if gap == i - 1:
                slots.append((_FILL, gap))
        if a <= i <= b:
            cls = inside
        elif i in (a - 1, b + 1):
            cls = _HALO
        else:
            cls = _OUTSIDE
        slots.append((_TOKEN, i, cls, tokens[i - 1]))
    for gap in source.placeholders:
        if gap == n:
            slots.append((_FILL, gap))
    slots.append((_END,))
    return tuple(slots)


# Log penalties per edit operation.  Inside an explicit mark, edits are
# cheap: the user asked for that part to be reworked aggressively.  With
# no marks every position stays editable but edits are expensive, keeping
# default revisions (and the halo around a mark) anchored to the source.
_PENALTIES = {
    _MARKED: {"sub": -0.5, "del": -1.0, "ins": -1.3},
    _SOFT: {"sub": -2.5, "del": -3.0, "ins": -3.5},
    _HALO: {"sub": -2.5},
}


class EditProposalBackend:
    """Desk-scale rewriting backend scored by an n-gram model.

    Edit operations carry fixed log penalties on top of the model score of
    the emitted token, so keeping the original wording wins unless the
    model clearly prefers a change.
    """

    def __init__(self, lm: NGramLanguageModel, top_n: int = 6,
                 fill_max: int = 4, penalties=None):
        self.lm = lm
        self.top_n = top_n
        self.fill_max = fill_max
        self.penalties = penalties or _PENALTIES
        self._dist_cache: dict[tuple[str, ...], tuple] = {}

    def start(self, source: MarkedText) -> _EditState:
        return _EditState(plan=_build_plan(source), slot=0)

    def is_complete(self, hyp: Hypothesis) -> bool:
        return hyp.state.done

    def _scored(self, context: tuple[str, ...]):
        key = context[-(self.lm.order - 1):] if self.lm.order > 1 else ()
        hit = self._dist_cache.get(key)
        if hit is None:
            dist = self.lm.next_token_dist(key)
            proposals = sorted(
                ((w, p) for w, p in dist.items() if w not in (UNK, BOS, EOS)),
                key=lambda kv: (-kv[1], kv[0]))[: self.top_n]
            hit = (dist, tuple((w, math.log(p)) for w, p in proposals))
            self._dist_cache[key] = hit
        return hit

    def step(self, hyp: Hypothesis, source: MarkedText):
        dist, proposals = self._scored(hyp.tokens)

        def logp(token: str) -> float:
            return math.log(dist[self.lm.map_token(token)])

        moves: list[tuple[str, float, object]] = []

        def expand(state: _EditState, pending: float) -> None:
            kind = state.plan[state.slot][0]
            if kind == _END:
                moves.append((END_TOKEN, logp(EOS) + pending,
                              _EditState(plan=state.plan, slot=state.slot,
                                         done=True)))
                return
            if kind == _FILL:
                nxt = _EditState(plan=state.plan, slot=state.slot + 1)
                if state.filled < self.fill_max:
                    stay = _EditState(plan=state.plan, slot=state.slot,
                                      filled=state.filled + 1)
                    for w, lp in proposals:
                        target = nxt if state.filled + 1 == self.fill_max else stay
                        moves.append((w, lp + pending, target))
                if state.filled >= 1:
                    expand(nxt, pending)
                return
            _, idx, cls, surface = state.plan[state.slot]
            cost = self.penalties.get(cls, {})
            nxt = _EditState(plan=state.plan, slot=state.slot + 1)
            moves.append((surface, logp(surface) + pending, nxt))
            if "sub" in cost:
                for w, lp in proposals:
                    if w != surface:
                        moves.append((w, lp + cost["sub"] + pending, nxt))
            if not state.inserted and "ins" in cost:
                here = _EditState(plan=state.plan, slot=state.slot,
                                  inserted=True)
                for w, lp in proposals:
                    moves.append((w, lp + cost["ins"] + pending, here))
            if "del" in cost:
                expand(nxt, pending + cost["del"])

        expand(hyp.state, 0.0)
        return moves


def candidate_text(hyp: Hypothesis) -> str:
    tokens = hyp.tokens
    if tokens and tokens[-1] == END_TOKEN:
        tokens = tokens[:-1]
    return detokenize(tokens)


def propose_edits(lm: NGramLanguageModel, source: MarkedText, k: int = 8,
                  beam_size: int = DEFAULT_BEAM_SIZE,
                  num_groups: int | None = None,
                  strength: float = DEFAULT_STRENGTH,
                  top_n: int = 6) -> list[ScoredSentence]:
    """Generate up to ``k`` rewrites of a marked sentence, best first.

    Runs the full-width search and returns the top ``k`` of it, so asking
    for fewer candidates does not change which ones exist.
    """
    backend = EditProposalBackend(lm, top_n=top_n)
    groups = num_groups if num_groups is not None else beam_size
    beam = max(beam_size, k)
    if beam % groups:
        beam = groups * -(-beam // groups)
    max_len = 2 * (len(source.sentence) + 2) + backend.fill_max * len(source.placeholders)
    hyps = diverse_beam(backend, source, beam_size=beam, num_groups=groups,
                        strength=strength, max_len=max_len)
    out = [ScoredSentence(text=candidate_text(h), logprob=h.logprob,
                          truncated=h.truncated) for h in hyps[:k]]
    if not out:
        out = [ScoredSentence(text=source.sentence.raw, logprob=0.0)]
    return out


class BuiltinReviser:
    """ReviserBackend over the edit-proposal search."""

    def __init__(self, lm: NGramLanguageModel, beam_size: int = DEFAULT_BEAM_SIZE,
                 num_groups: int | None = None,
                 strength: float = DEFAULT_STRENGTH, top_n: int = 6):
        self.lm = lm
        self.beam_size = beam_size
        self.num_groups = num_groups if num_groups is not None else beam_size
        self.strength = strength
        self.top_n = top_n

    def propose(self, source: MarkedText, k: int) -> list[ScoredSentence]:
        return propose_edits(self.lm, source, k=k, beam_size=self.beam_size,
                             num_groups=self.num_groups,
                             strength=self.strength, top_n=self.top_n)


class CopyReviser:
    """Returns the input unchanged, k times; a control for experiments."""

    def propose(self, source: MarkedText, k: int) -> list[ScoredSentence]:
        return [ScoredSentence(text=source.sentence.raw, logprob=0.0)] * max(k, 0)


# --- external backend adapter ----------------------------------------------


def _marks_payload(source: MarkedText) -> dict:
    return {
        "edit_span": list((source.edit_span.start, source.edit_span.end))
        if source.edit_span else None,
        "placeholders": list(source.placeholders),
    }


class ExternalBackend:
    """Adapter for an out-of-process reviser.

    Sends one JSON object ``{"source_text", "marks", "k"}`` and expects one
    JSON object ``{"candidates": [{"text", "logprob"}, ...]}`` back, either
    over HTTP POST (``url=``) or a line per request on a child process's
    stdin/stdout (``command=``).
    """

    def __init__(self, url: str | None = None, command: list[str] | None = None,
                 timeout: float = 10.0):
        if bool(url) == bool(command):
            raise ValueError("exactly one of url or command is required")
        self.url = url
        self.command = command
        self.timeout = timeout

    def propose(self, source: MarkedText, k: int) -> list[ScoredSentence]:
        request = {
            "source_text": source.render(),
            "marks": _marks_payload(source),
            "k": k,
        }
        try:
            if self.url:
                resp = requests.post(self.url, json=request, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
            else:
                proc = subprocess.run(
                    self.command, input=json.dumps(request) + "\n",
                    capture_output=True, text=True, timeout=self.timeout)
                if proc.returncode != 0:
                    raise GenerationError(
                        f"backend process exited {proc.returncode}: "
                        f"{proc.stderr.strip()[:200]}")
                payload = json.loads(proc.stdout.splitlines()[0])
        except GenerationError:
            raise
        except Exception as exc:
            raise GenerationError(f"external backend failed: {exc}") from exc
        try:
            return [
                ScoredSentence(text=c["text"], logprob=float(c["logprob"]))
                for c in payload["candidates"]
            ][:k]
        except (KeyError, TypeError, ValueError) as exc:
            raise GenerationError(f"malformed backend response: {exc}") from exc


# Training-configuration templates for anyone attaching full-scale neural
# backends in place of the desk-scale ones; recorded, not consumed here.
EXTERNAL_REVISER_TRAINING_DEFAULTS = {
    "architecture": "lightconv_iwslt_de_en",
    "optimizer": {
        "algorithm": "adam",
        "learning_rate": 5e-4,
        "adam_epsilon": 1e-8,
        "adam_betas": (0.9, 0.98),
        "weight_decay": 0.0001,
        "clip_norm": 0.0,
    },
    "lr_scheduler": {
        "type": "inverse_sqrt",
        "warmup_updates": 4000,
        "warmup_init_lr": 1e-7,
        "min_lr": 1e-9,
    },
    "training": {"batch_size_tokens": 24000, "updates": 1050530},
}

EXTERNAL_LM_TRAINING_DEFAULTS = {
    "architecture": "gpt2",
    "optimizer": {
        "algorithm": "adam",
        "learning_rate": 5e-5,
        "adam_epsilon": 1e-8,
        "adam_betas": (0.9, 0.999),
        "weight_decay": 0.0,
        "clip_norm": 1.0,
    },
    "lr_scheduler": {
        "type": "linear",
        "warmup_updates": 0,
        "max_lr": 5e-5,
        "total_epochs": 100,
    },
    "training": {"batch_size_tokens": 262144, "updates": 138300},
}
