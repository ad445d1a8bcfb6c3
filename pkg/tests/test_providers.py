import hashlib
import json
import math

import httpx
import numpy as np
import pytest

from vqagent.errors import ContractViolation, InvalidInput, MissingScriptError, ProviderError, ProviderHTTPError, ProviderTimeout
from vqagent.providers import (
    ChatRequest,
    HashEmbedder,
    LimitedChat,
    Message,
    ProviderConfig,
    ScriptedChat,
    ScriptedSearch,
    build_providers,
    check_contract,
    load_provider_config,
    request_digest,
)
from vqagent.providers.fixture import FixtureASR, FixtureDetector, UnconfiguredSearch
from vqagent.providers.http import HttpChat, HttpClient, HttpEmbedder
from vqagent.video import Frame


def req(text, contract="free-text", purpose="", images=()):
    return ChatRequest([Message("system", "sys"), Message("user", text)], list(images), contract, purpose)


# ------------------------------------------------------------ hashing

def reference_embed(text, dim):
    """Second implementation of the bucket scheme, written from its description."""
    vec = [0.0] * dim
    for raw in text.lower().split():
        tok = raw.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~“”‘’«»…")
        if not tok:
            continue
        digest = hashlib.blake2b(tok.encode(), digest_size=8).digest()
        idx = ((digest[0] << 24) | (digest[1] << 16) | (digest[2] << 8) | digest[3]) % dim
        vec[idx] += -1.0 if digest[4] & 1 else 1.0
    n = math.sqrt(sum(v * v for v in vec))
    return [v / n for v in vec]


@pytest.mark.parametrize(
    "a,b",
    [("harbour crane", "birthday cake"), ("the shark circles", "a sensor buoy"), ("Walter, collapses!", "quiet lab")],
)
def test_hash_cosine_matches_reference(a, b):
    emb = HashEmbedder(64)
    got = float(np.dot(emb.embed(a), emb.embed(b)))
    ra, rb = reference_embed(a, 64), reference_embed(b, 64)
    assert got == pytest.approx(sum(x * y for x, y in zip(ra, rb)), abs=1e-12)


def test_hash_embedder_properties():
    emb = HashEmbedder(32)
    v = emb.embed("A cake, a CAKE")
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, emb.embed("a cake a cake"))
    with pytest.raises(InvalidInput):
        emb.embed("  ")
    with pytest.raises(InvalidInput):
        emb.embed("... !!")


# ------------------------------------------------------------ contracts

def test_digest_ignores_purpose_only():
    a = req("hello", purpose="caption")
    b = req("hello", purpose="answer")
    assert request_digest(a) == request_digest(b)
    assert request_digest(a) != request_digest(req("hello", "structured-verdict"))
    assert request_digest(a) != request_digest(req("hello", images=["v@1.000"]))


def test_check_contract():
    check_contract("structured-verdict", 'sure: {"type": "direct_answer", "answer": "4"}')
    with pytest.raises(ContractViolation):
        check_contract("structured-verdict", '{"answer": "4"}')
    with pytest.raises(ContractViolation):
        check_contract("structured-plan", "no json")
    with pytest.raises(ContractViolation):
        check_contract("free-text", "   ")
    with pytest.raises(InvalidInput):
        req("x", contract="yaml")


# ------------------------------------------------------------ scripted chat

def test_scripted_exact_digest_wins():
    r = req("What is 2+2?", "structured-verdict", "conqueror")
    chat = ScriptedChat(
        responses={request_digest(r): '{"type": "direct_answer", "answer": "4"}'},
        rules=[{"purpose": "conqueror", "match": "2\\+2", "reply": {"type": "direct_answer", "answer": "5"}}],
    )
    assert json.loads(chat.chat(r))["answer"] == "4"


def test_scripted_rule_groups_and_skills():
    chat = ScriptedChat(rules=[
        {"purpose": "answer", "match": "when does (?P<what>\\w+) happen", "skill": "first_time", "args": {"needle": "{what}"}},
    ])
    text = "## Question\nwhen does rain happen\n## Context\n00:00:05 sunshine\n00:01:10 rain begins\n00:02:00 rain again"
    assert chat.chat(req(text, purpose="answer")) == "00:01:10"


def test_scripted_missing_script():
    with pytest.raises(MissingScriptError):
        ScriptedChat().chat(req("unknown", purpose="conqueror"))


def test_scripted_contract_enforced():
    chat = ScriptedChat(rules=[{"purpose": "conqueror", "match": ".", "reply": "just text"}])
    with pytest.raises(ContractViolation):
        chat.chat(req("x", "structured-verdict", "conqueror"))


def test_choose_skill_within_block():
    chat = ScriptedChat(rules=[{"purpose": "answer", "match": ".", "skill": "choose",
                                "args": {"options": {"a": "boat", "b": "lab"}, "within": "sensor"}}])
    text = "## Question\nq\n## Context\n### Segment 00:00:00-00:01:00\nboat with a sensor\n### Segment 00:01:00-00:02:00\nlab"
    assert chat.chat(req(text, purpose="answer")) == "a"


def test_default_caption_reads_frames():
    vision = {"v@1.000": "00:00:01 | scene: kitchen | location: house | events: pot boils | objects: pot"}.get
    chat = ScriptedChat(vision=vision)
    out = json.loads(chat.chat(req("## Instruction\nCaption this segment.\n## Frames\n- v@1.000 labels: Logan",
                                   "structured-caption", "caption", ["v@1.000"])))
    assert out["events_chronological"] == ["pot boils"]
    assert "Logan" in out["characters"]
    assert out["location"] == "house"


def test_default_synthesis_adds_caveat_for_failed_leaf():
    body = "## Question\nq\n## Results\n### [success] look\nthe answer is 7\n### [failed] check\nFailure: tool exploded"
    out = ScriptedChat().chat(req(body, purpose="synthesis"))
    assert out.startswith("the answer is 7")
    assert "Caveat: could not complete 'check': tool exploded" in out


# ------------------------------------------------------------ fixtures

def test_fixture_detector_and_asr(tmp_path):
    frame = Frame("v", 3.0, content={"faces": [{"box": [0.1, 0.2, 0.3, 0.4], "label": "Logan"}, {"box": [0.5, 0.5, 0.8, 0.1], "label": "bad"}]})
    anns = FixtureDetector().detect(frame)
    assert [(a.box, a.label) for a in anns] == [((0.1, 0.2, 0.3, 0.4), "Logan")]
    assert FixtureDetector().detect(Frame("v", 1.0)) == []
    p = tmp_path / "t.json"
    p.write_text(json.dumps([{"speaker": "A", "text": "hi", "t0": 0, "t1": 1}, {"text": "yo", "t0": 2, "t1": 3}]))
    utts = FixtureASR().transcribe(str(p))
    assert [(u.speaker, u.text) for u in utts] == [("A", "hi"), ("unknown", "yo")]
    assert FixtureASR().transcribe("") == []
    with pytest.raises(InvalidInput):
        FixtureASR().transcribe("nowhere.json")


def test_search_fixture_and_unconfigured():
    s = ScriptedSearch({"Ian Marsh": ["r1", "r2"]})
    assert s.search("  ian   MARSH ") == ["r1", "r2"]
    assert s.search("other") == []
    with pytest.raises(ProviderError):
        UnconfiguredSearch().search("x")


# ------------------------------------------------------------ config

def test_config_loading(tmp_path):
    (tmp_path / "s.json").write_text("{}")
    p = tmp_path / "providers.json"
    p.write_text(json.dumps({"chat": {"kind": "scripted_mock", "script_path": "s.json"}, "embedding": {"kind": "hash_mock", "dimension": 16}}))
    cfg = load_provider_config(p)
    assert cfg["chat"].script_path == str(tmp_path / "s.json")
    prov = build_providers(cfg)
    assert isinstance(prov.chat, ScriptedChat) and prov.embedder.dimension == 16


@pytest.mark.parametrize(
    "raw",
    [{"chat": {"kind": "magic"}}, {"chat": {"kind": "live_http"}}, {"chat": {"kind": "scripted_mock"}}, {"chat": {"kind": "hash_mock", "colour": 1}}],
)
def test_config_rejects(raw):
    with pytest.raises(InvalidInput):
        build_providers(load_provider_config(raw))


def test_unconfigured_chat_fails_upstream(monkeypatch):
    monkeypatch.delenv("OM_PROVIDER_CHAT_URL", raising=False)
    with pytest.raises(ProviderError):
        build_providers().chat.chat(req("hi"))


def test_env_configures_live(monkeypatch):
    monkeypatch.setenv("OM_PROVIDER_CHAT_URL", "http://127.0.0.1:9/v1")
    assert isinstance(build_providers().chat, HttpChat)
    assert ProviderConfig("hash_mock").validate("embedding").kind == "hash_mock"


# ------------------------------------------------------------ http

def client_with(handler, **kw):
    sleeps = []
    c = HttpClient("http://svc/v1", "k", transport=httpx.MockTransport(handler), sleep=sleeps.append, **kw)
    return c, sleeps


def test_http_retries_then_succeeds():
    calls = []

    def handler(request):
        calls.append(request)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"choices": [{"message": {"content": "fine"}}]})

    c, sleeps = client_with(handler, max_retries=2, backoff_base=0.5)
    assert HttpChat(c).chat(req("hi")) == "fine"
    assert sleeps == [0.5, 1.0]
    assert calls[0].headers["authorization"] == "Bearer k"
    body = json.loads(calls[0].content)
    assert body["messages"][1] == {"role": "user", "content": "hi"} and body["response_format"] == "free-text"


def test_http_does_not_retry_client_errors():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400)

    c, _ = client_with(handler)
    with pytest.raises(ProviderHTTPError) as err:
        c.post("chat/completions", {})
    assert err.value.status == 400 and len(calls) == 1


def test_http_timeout_exhausts_retries():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    c, sleeps = client_with(handler, max_retries=1)
    with pytest.raises(ProviderTimeout):
        c.post("x", {})
    assert len(sleeps) == 1


def test_http_embedder_validates_shape():
    c, _ = client_with(lambda r: httpx.Response(200, json={"data": [{"embedding": [3.0, 4.0]}]}))
    assert HttpEmbedder(c, 2).embed("x") == pytest.approx([0.6, 0.8])
    with pytest.raises(ProviderError):
        HttpEmbedder(c, 3).embed("x")


def test_limited_chat_passes_through():
    inner = ScriptedChat(rules=[{"match": ".", "reply": "ok"}])
    assert LimitedChat(inner, 2).chat(req("a")) == "ok"
