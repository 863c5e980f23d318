"""Editing-assistance protocol endpoint.

One JSON message per WebSocket text frame on ``/teaspn``.  Requests carry
an integer ``id`` and get exactly one response with the same id; messages
without an id are notifications.  Methods: ``document/didChange``,
``revision/request``, ``completion/request`` (with the optional
``title``/``section`` extension), and ``shutdown``.  Diagnostics are
pushed as ``diagnostics/publish`` notifications; a stale didChange
triggers a ``document/resync`` notification telling the client to resend
the full text.

``document/get`` answers with the server's current text and version; it
exists so clients and harnesses can verify convergence byte for byte.

The message core (:class:`Session`) is synchronous and socket-free so the
protocol can be exercised without any UI or network.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field

from .checker import CheckerConfig, check
from .completion import (
    DEFAULT_K,
    DEFAULT_MAX_TOKENS,
    DEFAULT_NUCLEUS_P,
    CompletionContext,
    complete,
)
from .generate import BuiltinReviser, CopyReviser, ExternalBackend, GenerationError
from .lm import NGramLanguageModel
from .revision import (
    RequestError,
    RevisionRequest,
    RevisionSettings,
    resolve_request,
    revise_resolved,
)

log = logging.getLogger(__name__)

PROTOCOL_PATH = "/teaspn"
DEFAULT_PORT = 8765
DIAGNOSTICS_DEBOUNCE = 0.5

ERR_INVALID_REQUEST = -32600
ERR_METHOD_NOT_FOUND = -32601
ERR_INVALID_PARAMS = -32602
ERR_INTERNAL = -32603


class ParamsError(ValueError):
    pass


def build_backend(spec: str, lm: NGramLanguageModel,
                  settings: RevisionSettings = RevisionSettings()):
    """Backend from a CLI-style selector: builtin | copy | external:<url>."""
    if spec == "builtin":
        return BuiltinReviser(lm, beam_size=settings.beam_size,
                              num_groups=settings.num_groups,
                              strength=settings.strength)
    if spec == "copy":
        return CopyReviser()
    if spec.startswith("external:"):
        return ExternalBackend(url=spec[len("external:"):])
    raise ValueError(f"unknown backend selector {spec!r}")


def _need(params: dict, key: str, kind, what: str):
    if key not in params:
        raise ParamsError(f"missing {what} param {key!r}")
    value = params[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParamsError(f"param {key!r} must be {what}")
    return value


def _char_range(params: dict) -> tuple[int, int]:
    rng = _need(params, "range", dict, "an object")
    start = _need(rng, "start", int, "an integer")
    end = _need(rng, "end", int, "an integer")
    return start, end


class Session:
    """Protocol state for one connection: the document, its version, and
    dispatch into the revision/completion/checker machinery."""

    def __init__(self, backend, lm: NGramLanguageModel,
                 checker_config: CheckerConfig | None = None,
                 settings: RevisionSettings = RevisionSettings(),
                 completion_k: int = DEFAULT_K,
                 completion_max_tokens: int = DEFAULT_MAX_TOKENS,
                 nucleus_p: float = DEFAULT_NUCLEUS_P,
                 diagnostics: str = "immediate"):
        if diagnostics not in ("immediate", "deferred", "off"):
            raise ValueError(f"bad diagnostics mode {diagnostics!r}")
        self.backend = backend
        self.lm = lm
        self.checker_config = checker_config
        self.settings = settings
        self.completion_k = completion_k
        self.completion_max_tokens = completion_max_tokens
        self.nucleus_p = nucleus_p
        self.diagnostics_mode = diagnostics
        self.document = ""
        self.version = 0
        self.closing = False
        self._diagnostics_dirty = False

    # -- protocol dispatch ----------------------------------------------

    def handle(self, msg) -> list[dict]:
        """Process one inbound message; returns outbound messages in order."""
        if not isinstance(msg, dict):
            return []  # unparseable notification: nothing to answer
        msg_id = msg.get("id")
        if msg_id is not None and not isinstance(msg_id, int):
            return []
        method = msg.get("method")
        if not isinstance(method, str):
            if msg_id is not None:
                return [self._error(msg_id, ERR_INVALID_REQUEST, "missing method")]
            return []
        params = msg.get("params", {})
        if not isinstance(params, dict):
            if msg_id is not None:
                return [self._error(msg_id, ERR_INVALID_PARAMS,
                                    "params must be an object")]
            return []
        try:
            if method == "document/didChange":
                return self._on_did_change(msg_id, params)
            if method == "revision/request":
                return self._on_revision(msg_id, params)
            if method == "completion/request":
                return self._on_completion(msg_id, params)
            if method == "document/get":
                if msg_id is None:
                    return []
                return [{"id": msg_id, "result": {"text": self.document,
                                                  "version": self.version}}]
            if method == "shutdown":
                self.closing = True
                return [] if msg_id is None else [{"id": msg_id, "result": None}]
            if msg_id is not None:
                return [self._error(msg_id, ERR_METHOD_NOT_FOUND,
                                    f"unknown method {method!r}")]
            return []
        except ParamsError as exc:
            if msg_id is not None:
                return [self._error(msg_id, ERR_INVALID_PARAMS, str(exc))]
            return []
        except (RequestError, GenerationError) as exc:
            if msg_id is not None:
                return [self._error(msg_id, ERR_INVALID_PARAMS, str(exc))]
            return []
        except Exception as exc:  # keep the session alive, whatever happened
            log.exception("internal error handling %s", method)
            if msg_id is not None:
                return [self._error(msg_id, ERR_INTERNAL, f"internal error: {exc}")]
            return []

    @staticmethod
    def _error(msg_id: int, code: int, message: str) -> dict:
        return {"id": msg_id, "error": {"code": code, "message": message}}

    # -- document sync ----------------------------------------------------

    def apply_change(self, version: int, start: int, end: int, new_text: str) -> None:
        """Apply one versioned edit; raises ParamsError on bad ranges and
        ValueError on version mismatch."""
        if version != self.version + 1:
            raise _StaleVersion(
                f"expected version {self.version + 1}, got {version}")
        if not (0 <= start <= end <= len(self.document)):
            raise ParamsError(f"range ({start}, {end}) outside document")
        self.document = self.document[:start] + new_text + self.document[end:]
        self.version = version

    def _on_did_change(self, msg_id, params) -> list[dict]:
        version = _need(params, "version", int, "an integer")
        start, end = _char_range(params)
        new_text = _need(params, "text", str, "a string")
        try:
            self.apply_change(version, start, end, new_text)
        except _StaleVersion as exc:
            resync = {
                "method": "document/resync",
                "params": {"version": self.version, "message":
                           f"{exc}; resend the full document"},
            }
            if msg_id is not None:
                return [self._error(msg_id, ERR_INVALID_PARAMS, str(exc)), resync]
            return [resync]
        out = []
        if msg_id is not None:
            out.append({"id": msg_id, "result": {"version": self.version}})
        self._diagnostics_dirty = True
        if self.diagnostics_mode == "immediate":
            out.append(self.diagnostics_notification())
        return out

    # -- features ----------------------------------------------------------

    def _on_revision(self, msg_id, params) -> list[dict]:
        start, end = _char_range(params)
        request = RevisionRequest(document=self.document, selection=(start, end))
        resolved = resolve_request(request, self.settings.context_tokens)
        candidates = revise_resolved(resolved, self.backend, self.lm, self.settings)
        payload = {
            "status": "ok" if candidates else "no_improvement",
            "documentVersion": self.version,
            "replaceRange": {"start": resolved.sentence_range[0],
                             "end": resolved.sentence_range[1]},
            "candidates": [
                {
                    "text": c.text,
                    "logprob": c.logprob,
                    "perplexity": c.perplexity,
                    "diff": [{"op": run.op, "text": run.text} for run in c.diff],
                }
                for c in candidates
            ],
        }
        if msg_id is None:
            return []
        return [{"id": msg_id, "result": payload}]

    def _on_completion(self, msg_id, params) -> list[dict]:
        position = _need(params, "position", int, "an integer")
        if not (0 <= position <= len(self.document)):
            raise ParamsError(f"position {position} outside document")
        title = params.get("title")
        section = params.get("section")
        for name, value in (("title", title), ("section", section)):
            if value is not None and not isinstance(value, str):
                raise ParamsError(f"param {name!r} must be a string")
        k = params.get("k", self.completion_k)
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ParamsError("param 'k' must be a positive integer")
        seed = params.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ParamsError("param 'seed' must be an integer")
        par_start = self.document.rfind("\n\n", 0, position)
        par_start = 0 if par_start < 0 else par_start + 2
        ctx = CompletionContext(title=title, section=section,
                                left_text=self.document[par_start:position])
        continuations = complete(ctx, self.lm, k=k,
                                 max_tokens=self.completion_max_tokens,
                                 p=self.nucleus_p, seed=seed)
        payload = {
            "documentVersion": self.version,
            "continuations": [
                {"text": c.text,
                 "perplexity": None if c.perplexity == float("inf") else c.perplexity}
                for c in continuations
            ],
        }
        if msg_id is None:
            return []
        return [{"id": msg_id, "result": payload}]

    # -- diagnostics --------------------------------------------------------

    def take_diagnostics_flag(self) -> bool:
        dirty = self._diagnostics_dirty
        self._diagnostics_dirty = False
        return dirty

    def diagnostics_notification(self) -> dict:
        self._diagnostics_dirty = False
        diagnostics = []
        degraded = False
        if self.diagnostics_mode != "off":
            result = check(self.document, self.checker_config or CheckerConfig())
            degraded = result.degraded
            diagnostics = [
                {
                    "range": {"start": d.start, "end": d.end},
                    "message": d.message,
                    "replacements": list(d.replacements),
                    "source": d.source,
                }
                for d in result.diagnostics
            ]
        return {
            "method": "diagnostics/publish",
            "params": {"version": self.version, "diagnostics": diagnostics,
                       "degraded": degraded},
        }


class _StaleVersion(ValueError):
    pass


# --- WebSocket wrapper -------------------------------------------------------


async def handle_connection(conn, session_factory,
                            debounce: float = DIAGNOSTICS_DEBOUNCE) -> None:
    path = getattr(getattr(conn, "request", None), "path", PROTOCOL_PATH)
    if path.rstrip("/") != PROTOCOL_PATH.rstrip("/"):
        await conn.close(code=1008, reason=f"unknown path {path}")
        return
    session = session_factory()
    if session.diagnostics_mode == "immediate":
        session.diagnostics_mode = "deferred"
    diag_task: asyncio.Task | None = None

    async def push_diagnostics():
        await asyncio.sleep(debounce)
        await conn.send(json.dumps(session.diagnostics_notification()))

    try:
        async for frame in conn:
            try:
                msg = json.loads(frame)
            except (ValueError, TypeError):
                msg = None
            for outbound in session.handle(msg):
                await conn.send(json.dumps(outbound))
            if session.take_diagnostics_flag():
                if diag_task is not None and not diag_task.done():
                    diag_task.cancel()
                diag_task = asyncio.create_task(push_diagnostics())
            if session.closing:
                break
    finally:
        if diag_task is not None and not diag_task.done():
            diag_task.cancel()
        await conn.close()


async def serve(session_factory, host: str = "127.0.0.1",
                port: int = DEFAULT_PORT,
                debounce: float = DIAGNOSTICS_DEBOUNCE):
    """Run the WebSocket endpoint until cancelled."""
    import websockets

    async def handler(conn):
        await handle_connection(conn, session_factory, debounce=debounce)

    return await websockets.serve(handler, host, port)
