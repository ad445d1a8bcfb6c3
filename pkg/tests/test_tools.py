import json

import pytest

from vqagent.errors import InvalidInput, ProviderError, RegistrationError
from vqagent.providers import ScriptedSearch
from vqagent.tools import (
    REWINDER_SPEC,
    ArgSpec,
    CodeRunner,
    RewindRequest,
    ToolCall,
    ToolError,
    ToolRegistry,
    ToolResult,
    ToolSpec,
    default_registry,
    file_reader_handler,
    validate_args,
    web_search_handler,
)

TEXT = ArgSpec("text", "string", constraints={"free_text": True})


def spec(name, *args):
    return ToolSpec(name, f"{name} tool", args)


def test_arg_spec_needs_constraint():
    with pytest.raises(RegistrationError):
        ArgSpec("x", "string")
    with pytest.raises(RegistrationError):
        ArgSpec("x", "blob", constraints={"free_text": True})
    ArgSpec("x", "number", required=False)


def test_catalog_keeps_registration_order():
    reg = ToolRegistry()
    log = []
    for name in ["e", "b", "d", "a", "c"]:
        reg.register(spec(name, TEXT), lambda a: "ok")
        log.append(name)
    assert [s.name for s in reg.catalog()] == log
    assert [d["name"] for d in reg.catalog_document()] == log
    with pytest.raises(RegistrationError):
        reg.register(spec("a", TEXT), lambda a: "dup")
    reg.freeze()
    with pytest.raises(RegistrationError):
        reg.register(spec("z", TEXT), lambda a: "late")


def test_validate_args():
    s = spec("t", ArgSpec("t0", "timestamp", constraints={"min": 0}), ArgSpec("n", "integer", required=False, constraints={"max": 3}))
    assert validate_args(s, {"t0": "00:01:00"}) == []
    assert validate_args(s, {"t0": -1}) == ["t0 must be >= 0"]
    assert validate_args(s, {"t0": 1, "n": 5}) == ["n must be <= 3"]
    assert validate_args(s, {"t0": 1, "n": 1.5}) == ["n must be an integer"]
    assert validate_args(s, {}) == ["missing required argument 't0'"]
    assert validate_args(s, {"t0": 1, "zz": 0}) == ["unexpected arguments ['zz']"]
    assert "t0" in validate_args(s, {"t0": "99:99"})[0]


@pytest.mark.parametrize(
    "exc,category",
    [
        (ToolError("upstream", "busy"), "upstream"),
        (InvalidInput("bad"), "bad_args"),
        (ProviderError("down"), "upstream"),
        (ModuleNotFoundError("No module named 'pandas'", name="pandas"), "environment"),
        (TimeoutError("slow"), "upstream"),
        (KeyError("boom"), "environment"),
    ],
)
def test_invoke_maps_exceptions(exc, category):
    def handler(args):
        raise exc

    reg = ToolRegistry().register(spec("t", TEXT), handler)
    res = reg.invoke(ToolCall("t", {"text": "x"}))
    assert not res.ok and res.failure.category == category


def test_invoke_unknown_and_bad_args():
    reg = ToolRegistry().register(spec("t", TEXT), lambda a: a["text"].upper())
    assert reg.invoke(ToolCall("nope")).failure.category == "not_found"
    assert reg.invoke(ToolCall("t", {})).failure.category == "bad_args"
    ok = reg.invoke(ToolCall("t", {"text": "hi"}))
    assert ok.ok and ok.content == "HI" and ok.failure is None


def test_tool_result_invariant():
    with pytest.raises(InvalidInput):
        ToolResult(True, "x", failure=ToolResult.fail("upstream", "m").failure)
    with pytest.raises(InvalidInput):
        ToolResult(False, "x")


def test_rewind_request_validate():
    RewindRequest("v", 0, 10, "look").validate(10)
    for t0, t1 in [(5, 5), (6, 5), (-1, 3), (0, 11)]:
        with pytest.raises(ToolError) as err:
            RewindRequest("v", t0, t1, "look").validate(10)
        assert err.value.category == "bad_args"


def test_web_search_tool():
    handle = web_search_handler(ScriptedSearch({"reef": ["one", "two"]}))
    assert handle({"query": "reef"}).content == "1. one\n2. two"
    assert handle({"query": "moon"}).content == "No results."


def test_file_reader_is_confined(tmp_path):
    (tmp_path / "notes.txt").write_text("a\nb\nc\n")
    handle = file_reader_handler(tmp_path)
    assert handle({"path": "notes.txt", "max_lines": 2}) == "notes.txt: 3 lines\na\nb"
    for bad in ("../etc/passwd", "missing.txt"):
        with pytest.raises(ToolError):
            handle({"path": bad})


def test_code_runner_categories(tmp_path):
    run = CodeRunner(timeout=20)
    assert run({"code": "print(6 * 7)"}) == "42"
    with pytest.raises(ToolError) as err:
        run({"code": "import surely_not_installed_pkg.sub"})
    assert err.value.category == "environment" and err.value.details["module"] == "surely_not_installed_pkg"
    with pytest.raises(ToolError) as err:
        run({"code": "1/0"})
    assert err.value.category == "bad_args" and "ZeroDivisionError" in str(err.value)


# ---------------------------------------------------- against the fixture world

def test_rewinder_single_scene_reports_no_change(world):
    reg = world.ws.tools()
    res = reg.invoke(ToolCall("rewinder", {"video_id": "drama", "t0": 10, "t1": 20, "instruction": "Any scene change?"}))
    assert res.ok
    assert "No scene change observed." in res.content
    assert [a["timestamp"] for a in res.artifacts] == [f"00:00:{s:02d}" for s in range(10, 21)]


def test_rewinder_across_scenes_names_both(world):
    reg = world.ws.tools()
    res = reg.invoke(ToolCall("rewinder", {"video_id": "drama", "t0": "00:03:58", "t1": "00:04:02", "instruction": "scene change?"}))
    assert res.ok and "Scene change at 00:04:00" in res.content
    assert "terrace" in res.content and "helipad" in res.content


def test_rewinder_granularity(world):
    reg = world.ws.tools()
    res = reg.invoke(ToolCall("rewinder", {"video_id": "drama", "t0": 0, "t1": 20, "instruction": "look", "granularity": 0.25}))
    assert [a["timestamp"] for a in res.artifacts] == ["00:00:00", "00:00:04", "00:00:08", "00:00:12", "00:00:16", "00:00:20"]


def test_rewinder_bad_span(world):
    res = world.ws.tools().invoke(ToolCall("rewinder", {"video_id": "drama", "t0": 30, "t1": 30, "instruction": "x"}))
    assert res.failure.category == "bad_args"
    res = world.ws.tools().invoke(ToolCall("rewinder", {"video_id": "nosuch", "t0": 0, "t1": 3, "instruction": "x"}))
    assert not res.ok


def test_face_tool(world):
    reg = world.ws.tools()
    res = reg.invoke(ToolCall("face_recognition", {"frame_ref": "drama@341.000"}))
    assert res.ok
    assert [f["label"] for f in json.loads(res.content)] == ["Walter Crane (actor Ian Marsh)"]
    assert json.loads(reg.invoke(ToolCall("face_recognition", {"frame_ref": "drama@5.000"})).content) == []
    assert reg.invoke(ToolCall("face_recognition", {"frame_ref": "garbage"})).failure.category == "bad_args"


def test_default_registry_only_registers_what_it_can():
    assert default_registry().catalog() == []
    reg = default_registry(search=ScriptedSearch({}))
    assert [s.name for s in reg.catalog()] == ["web_search"]
    assert REWINDER_SPEC.to_dict()["args"][1] == {"name": "t0", "type": "timestamp", "required": True, "constraints": {"min": 0}}
