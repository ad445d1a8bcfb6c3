import pytest
from hypothesis import given, strategies as st

from vqagent.engine import EngineConfig, Trace
from vqagent.errors import InvalidInput
from vqagent.providers import Providers, ScriptedChat
from vqagent.query import Query, QueryConfig, QueryEngine, extract_time_filter, pattern_window, retrieve
from vqagent.store import KnowledgeEntry, KnowledgeStore
from vqagent.providers import HashEmbedder
from vqagent.timecode import format_timestamp
from vqagent.tools import ToolRegistry


@pytest.mark.parametrize(
    "text,window",
    [
        ("What happens at 5 minutes and 41 seconds?", (336, 346)),
        ("Are there any scene changes between 03:58 and 04:02?", (233, 247)),
        ("from 00:01:00 to 00:02:00 who speaks?", (55, 125)),
        ("what is shown at 00:00:02", (0, 7)),
        ("first at 01:00, later at 03:00", (55, 185)),
        ("events in 10:00-10:30", (595, 635)),
        ("after 2 hours the credits", (7195, 7205)),
    ],
)
def test_pattern_windows(text, window):
    assert extract_time_filter(text).window == window


def test_no_temporal_tokens():
    assert extract_time_filter("Why was Dolores' father being inspected?") is None
    with pytest.raises(InvalidInput):
        extract_time_filter("   ")


def test_llm_pass_only_when_patterns_miss():
    calls = []

    class Spy(ScriptedChat):
        def _complete(self, req):
            calls.append(req.purpose)
            return super()._complete(req)

    llm = Spy(rules=[{"purpose": "time_extract", "match": ".", "reply": {"t_lo": 60, "t_hi": 90}}])
    assert extract_time_filter("during the opening credits", llm).window == (55, 95)
    assert extract_time_filter("at 00:00:30", llm).window == (25, 35)
    assert calls == ["time_extract"]


@pytest.mark.parametrize("reply", ['{"none": true}', "no json here", '{"t_lo": 9, "t_hi": 3}', '{"t_lo": "x"}'])
def test_llm_bad_replies_mean_no_window(reply):
    llm = ScriptedChat(rules=[{"purpose": "time_extract", "match": ".", "reply": reply}])
    assert extract_time_filter("during the credits", llm) is None


@given(st.integers(0, 5 * 3600))
def test_mmss_and_hhmmss_windows_agree(t):
    if t >= 3600:
        return
    m, s = divmod(t, 60)
    assert pattern_window(f"at {m:02d}:{s:02d}") == pattern_window(f"at {format_timestamp(t)}")


def tiny_store():
    emb = HashEmbedder(64)
    store = KnowledgeStore(64)
    for lo, text in [(0, "a cat naps"), (10, "a cat eats"), (20, "rain on glass")]:
        store.upsert(KnowledgeEntry(f"v:{lo}", "v", lo, lo + 10, text, emb.embed(text)))
    return store, emb


def test_retrieval_respects_window():
    store, emb = tiny_store()
    trace = Trace()
    hits = retrieve(store, emb, Query("the cat at 00:00:03", "v"), 10, trace)
    assert [h.entry.entry_id for h in hits] == ["v:0"]
    assert trace.of("retrieved")[0]["window"] == [0.0, 8.0]


def test_retrieval_falls_back_with_notice():
    store, emb = tiny_store()
    trace = Trace()
    hits = retrieve(store, emb, Query("the cat at 00:09:00", "v"), 10, trace)
    assert hits and trace.of("retrieval_fallback")
    assert trace.of("retrieved")[0]["window"] is None


def test_root_failure_passes_reason_through():
    store, emb = tiny_store()
    chat = ScriptedChat(rules=[
        {"purpose": "conqueror", "match": ".", "reply": {"type": "too_complex", "reason": "hard"}},
        {"purpose": "divider", "match": ".", "reply": {"success": False, "reason": "cannot split a cat"}},
    ])
    engine = QueryEngine(store, Providers(chat=chat, embedder=emb), ToolRegistry(), QueryConfig(llm_time_filter=False))
    ans = engine.answer(Query("why does the cat nap?", "v"))
    assert ans.text == "cannot split a cat" and not ans.answered
    assert len(ans.trace.of("synthesized")) == 1


def test_single_caption_question_is_one_node():
    store, emb = tiny_store()
    chat = ScriptedChat(rules=[
        {"purpose": "conqueror", "match": ".", "skill": "grep", "args": {"needle": "rain"},
         "reply": {"type": "direct_answer", "answer": "It rains."}},
    ])
    engine = QueryEngine(store, Providers(chat=chat, embedder=emb), ToolRegistry(), QueryConfig(llm_time_filter=False))
    ans = engine.answer(Query("what is the weather?", "v"))
    assert ans.text == "It rains." and ans.answered and ans.tree.size() == 1
    assert len(ans.trace.of("synthesized")) == 1


def test_cigarette_answer(world):
    ans = world.ws.query_engine().answer(Query("When was the first time a cigarette dropped to the ground?", "drama"))
    assert ans.text.strip() == "00:02:32"


def test_scene_change_names_both_scenes(world):
    q = "Are there any scene changes between 03:58 and 04:02, and what is their connection?"
    ans = world.ws.query_engine().answer(Query(q, "drama"))
    assert ans.trace.of("divided")
    first = ans.tree.children[0]
    assert first.description.startswith("Extract frames between 03:58 and 04:02")
    rewinds = [e for e in ans.trace.of("tool_invoked") if e["call"]["name"] == "rewinder"]
    assert rewinds and "terrace" in first.result.content and "helipad" in first.result.content
    window = ans.trace.of("retrieved")[0]["window"]
    assert all(h.entry.start_ts < window[1] and h.entry.end_ts > window[0] for h in ans.hits)


def test_depth_zero_from_query(world):
    q = "Are there any scene changes between 03:58 and 04:02, and what is their connection?"
    ans = world.ws.query_engine(QueryConfig(engine=EngineConfig(max_depth=0))).answer(Query(q, "drama"))
    assert not ans.answered
    assert ans.tree.failure_reason == "Task tree depth exceeded"
