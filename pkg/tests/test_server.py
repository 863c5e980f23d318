import asyncio
import json
import random

import pytest

from draftforge.generate import BuiltinReviser, CopyReviser, ExternalBackend
from draftforge.lm import train
from draftforge.revision import RevisionSettings
from draftforge.server import (
    ERR_INVALID_PARAMS,
    ERR_METHOD_NOT_FOUND,
    Session,
    build_backend,
    serve,
)

CORPUS = [
    "the model improves the results .",
    "the model raises the results .",
    "we report the results here .",
    "a writer edits the draft .",
    "another sentence follows now .",
]


def make_session(**kwargs):
    lm = train(CORPUS, order=3)
    settings = RevisionSettings(beam_size=6, num_groups=6)
    kwargs.setdefault("settings", settings)
    kwargs.setdefault("diagnostics", "off")
    return Session(backend=BuiltinReviser(lm, beam_size=6, num_groups=6),
                   lm=lm, **kwargs)


def did_change(version, start, end, text, msg_id=None):
    msg = {"method": "document/didChange",
           "params": {"version": version, "range": {"start": start, "end": end},
                      "text": text}}
    if msg_id is not None:
        msg["id"] = msg_id
    return msg


def test_did_change_applies_and_versions():
    session = make_session()
    out = session.handle(did_change(1, 0, 0, "hello world."))
    assert out == []
    assert session.document == "hello world."
    assert session.version == 1
    out = session.handle(did_change(2, 0, 5, "goodbye"))
    assert session.document == "goodbye world."


def test_did_change_full_replacement():
    session = make_session()
    session.handle(did_change(1, 0, 0, "first text."))
    session.handle(did_change(2, 0, len(session.document), "replaced text."))
    assert session.document == "replaced text."
    assert session.version == 2


def test_stale_version_resync():
    session = make_session()
    session.handle(did_change(1, 0, 0, "base."))
    out = session.handle(did_change(5, 0, 0, "x"))
    assert session.document == "base."
    assert session.version == 1
    assert out[-1]["method"] == "document/resync"


def test_unknown_method_error_keeps_session():
    session = make_session()
    out = session.handle({"id": 9, "method": "bogus/method"})
    assert out[0]["id"] == 9
    assert out[0]["error"]["code"] == ERR_METHOD_NOT_FOUND
    assert session.handle(did_change(1, 0, 0, "still alive.")) == []
    assert session.document == "still alive."


def test_malformed_params_error():
    session = make_session()
    out = session.handle({"id": 3, "method": "revision/request",
                          "params": {"range": {"start": "x", "end": 2}}})
    assert out[0]["error"]["code"] == ERR_INVALID_PARAMS


def test_revision_request_roundtrip():
    session = make_session()
    doc = "the model improves the results ."
    session.handle(did_change(1, 0, 0, doc))
    out = session.handle({"id": 1, "method": "revision/request",
                          "params": {"range": {"start": 0, "end": len(doc)}}})
    assert len(out) == 1
    result = out[0]["result"]
    assert result["documentVersion"] == 1
    assert result["replaceRange"] == {"start": 0, "end": len(doc)}
    assert len(result["candidates"]) <= 8
    ppls = [c["perplexity"] for c in result["candidates"]]
    assert ppls == sorted(ppls)
    for cand in result["candidates"]:
        assert {"op", "text"} == set(cand["diff"][0])


def test_revision_crossing_sentences_rejected():
    session = make_session()
    doc = "the model improves the results . a writer edits the draft ."
    session.handle(did_change(1, 0, 0, doc))
    out = session.handle({"id": 2, "method": "revision/request",
                          "params": {"range": {"start": 10, "end": len(doc) - 3}}})
    assert out[0]["error"]["code"] == ERR_INVALID_PARAMS
    assert "cross" in out[0]["error"]["message"]


def test_completion_request_conditions_on_metadata():
    session = make_session()
    doc = "we report the"
    session.handle(did_change(1, 0, 0, doc))
    out = session.handle({
        "id": 4, "method": "completion/request",
        "params": {"position": len(doc), "title": "T", "section": "Related work",
                   "k": 3, "seed": 5},
    })
    result = out[0]["result"]
    assert result["documentVersion"] == 1
    assert 1 <= len(result["continuations"]) <= 3
    again = session.handle({
        "id": 5, "method": "completion/request",
        "params": {"position": len(doc), "title": "T", "section": "Related work",
                   "k": 3, "seed": 5},
    })
    assert again[0]["result"]["continuations"] == result["continuations"]


def test_interleaved_requests_one_response_each():
    session = make_session()
    doc = "the model improves the results ."
    session.handle(did_change(1, 0, 0, doc))
    out1 = session.handle({"id": 1, "method": "revision/request",
                           "params": {"range": {"start": 0, "end": 5}}})
    out2 = session.handle({"id": 2, "method": "completion/request",
                           "params": {"position": 5}})
    ids = [m["id"] for m in out1 + out2 if "id" in m]
    assert sorted(ids) == [1, 2]


def test_shutdown():
    session = make_session()
    out = session.handle({"id": 7, "method": "shutdown"})
    assert out == [{"id": 7, "result": None}]
    assert session.closing


def test_diagnostics_immediate_mode():
    session = make_session()
    session.diagnostics_mode = "immediate"
    out = session.handle(did_change(1, 0, 0, "the the cat."))
    assert out[-1]["method"] == "diagnostics/publish"
    params = out[-1]["params"]
    assert params["version"] == 1
    assert params["diagnostics"]
    assert params["diagnostics"][0]["replacements"] == ["the"]


def test_build_backend_selectors():
    lm = train(CORPUS, order=2)
    assert isinstance(build_backend("builtin", lm), BuiltinReviser)
    assert isinstance(build_backend("copy", lm), CopyReviser)
    ext = build_backend("external:http://localhost:1/x", lm)
    assert isinstance(ext, ExternalBackend)
    with pytest.raises(ValueError):
        build_backend("wat", lm)


def reference_apply(doc, start, end, text):
    return doc[:start] + text + doc[end:]


def test_fuzz_smoke_bijection_and_convergence():
    rng = random.Random(99)
    session = make_session()
    client_doc = ""
    version = 0
    pending = 0
    responses = {}
    sent_ids = set()
    for step in range(800):
        roll = rng.random()
        if roll < 0.80:
            start = rng.randint(0, len(client_doc))
            end = rng.randint(start, len(client_doc))
            text = "".join(rng.choice("ab .") for _ in range(rng.randint(0, 6)))
            version += 1
            client_doc = reference_apply(client_doc, start, end, text)
            out = session.handle(did_change(version, start, end, text))
            assert all("id" not in m for m in out)
        elif roll < 0.9:
            msg_id = len(sent_ids) + 1
            sent_ids.add(msg_id)
            pos = rng.randint(0, len(client_doc))
            out = session.handle({"id": msg_id, "method": "completion/request",
                                  "params": {"position": pos, "k": 2}})
            assert len([m for m in out if m.get("id") == msg_id]) == 1
        else:
            msg_id = len(sent_ids) + 1
            sent_ids.add(msg_id)
            out = session.handle({"id": msg_id, "method": rng.choice(
                ["revision/request", "bogus", "completion/request"]),
                "params": {"whatever": True}})
            assert len([m for m in out if m.get("id") == msg_id]) == 1
    assert session.document == client_doc
    assert session.version == version


@pytest.mark.parametrize("path,ok", [("/teaspn", True), ("/other", False)])
def test_websocket_end_to_end(path, ok):
    websockets = pytest.importorskip("websockets")

    async def run():
        server = await serve(make_session, host="127.0.0.1", port=0,
                             debounce=0.05)
        port = next(iter(server.sockets)).getsockname()[1]
        try:
            async with websockets.connect(f"ws://127.0.0.1:{port}{path}") as ws:
                if not ok:
                    with pytest.raises(websockets.exceptions.ConnectionClosed):
                        await ws.send(json.dumps({"id": 1, "method": "shutdown"}))
                        await asyncio.wait_for(ws.recv(), timeout=2)
                    return
                doc = "the model improves the results ."
                await ws.send(json.dumps(did_change(1, 0, 0, doc)))
                await ws.send(json.dumps({
                    "id": 1, "method": "revision/request",
                    "params": {"range": {"start": 0, "end": len(doc)}}}))
                reply = json.loads(await asyncio.wait_for(ws.recv(), timeout=10))
                assert reply["id"] == 1
                assert reply["result"]["documentVersion"] == 1
                await ws.send(json.dumps({"id": 2, "method": "shutdown"}))
                reply = json.loads(await asyncio.wait_for(ws.recv(), timeout=5))
                assert reply == {"id": 2, "result": None}
        finally:
            server.close()
            await server.wait_closed()

    asyncio.run(run())


def test_revision_no_improvement_status():
    session = make_session()
    session.backend = CopyReviser()
    doc = "the model improves the results ."
    session.handle(did_change(1, 0, 0, doc))
    out = session.handle({"id": 1, "method": "revision/request",
                          "params": {"range": {"start": 0, "end": len(doc)}}})
    result = out[0]["result"]
    assert result["status"] == "no_improvement"
    assert result["candidates"] == []


def test_dead_external_backend_degrades_to_error_response():
    session = make_session()
    session.backend = ExternalBackend(url="http://127.0.0.1:9/propose",
                                      timeout=0.3)
    doc = "the model improves the results ."
    session.handle(did_change(1, 0, 0, doc))
    out = session.handle({"id": 5, "method": "revision/request",
                          "params": {"range": {"start": 0, "end": len(doc)}}})
    assert out[0]["id"] == 5
    assert "error" in out[0]
    # session is still usable afterwards
    assert session.handle(did_change(2, 0, 0, "x ")) == []


def test_websocket_diagnostics_debounced():
    websockets = pytest.importorskip("websockets")

    def factory():
        session = make_session()
        session.diagnostics_mode = "immediate"  # wrapper defers it
        return session

    async def run():
        server = await serve(factory, host="127.0.0.1", port=0, debounce=0.05)
        port = next(iter(server.sockets)).getsockname()[1]
        try:
            async with websockets.connect(f"ws://127.0.0.1:{port}/teaspn") as ws:
                await ws.send(json.dumps(did_change(1, 0, 0, "the the cat.")))
                note = json.loads(await asyncio.wait_for(ws.recv(), timeout=5))
                assert note["method"] == "diagnostics/publish"
                assert note["params"]["version"] == 1
                assert note["params"]["diagnostics"]
        finally:
            server.close()
            await server.wait_closed()

    asyncio.run(run())


def test_document_get_roundtrip():
    session = make_session()
    session.handle(did_change(1, 0, 0, "exact bytes here."))
    out = session.handle({"id": 11, "method": "document/get"})
    assert out == [{"id": 11, "result": {"text": "exact bytes here.",
                                         "version": 1}}]
