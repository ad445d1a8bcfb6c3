import csv
import json

import pytest
from hypothesis import given, strategies as st

from vqagent.errors import InvalidInput
from vqagent.evaluation import (
    LEGEND,
    EvalQuestion,
    EvalReport,
    FramesSttAnswerer,
    Prediction,
    QuestionRecord,
    Video2RagAnswerer,
    extract_labels,
    iou,
    judge_localization,
    load_dataset,
    run_benchmark,
    score_choice,
    score_localization,
    uniform_frames,
)
from vqagent.errors import VQAgentError
from vqagent.timecode import format_timestamp
from conftest import make_frames


def test_iou_examples():
    assert iou((0, 10), (0, 10)) == 1.0
    assert iou((0, 10), (5, 15)) == pytest.approx(1 / 3, abs=1e-9)
    assert iou((0, 10), (20, 30)) == 0.0
    assert iou((4, 4), (4, 4)) == 1.0 and iou((4, 4), (5, 5)) == 0.0
    with pytest.raises(InvalidInput):
        iou((3, 1), (0, 1))


spans = st.tuples(st.floats(0, 1e4), st.floats(0, 1e3)).map(lambda p: (p[0], p[0] + p[1]))


@given(spans, spans)
def test_iou_bounds_and_symmetry(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert iou(a, a) == 1.0


@given(st.integers(0, 3599), st.integers(0, 3599))
def test_localization_format_symmetry(p, t):
    mm = lambda x: f"{x // 60:02d}:{x % 60:02d}"
    assert score_localization(mm(p), mm(t)) == score_localization(format_timestamp(p), format_timestamp(t))
    assert score_localization(mm(p), mm(t)) == (abs(p - t) <= 2)


def test_span_midpoint_rule():
    ok, rule, _ = judge_localization("[00:02:18, 00:02:45]", "00:02:32")
    assert ok and rule == "span-midpoint"


def test_unparseable_prediction_never_raises():
    ok, rule, note = judge_localization("somewhere in the middle", "00:01:00")
    assert not ok and rule == "unparseable" and note


@pytest.mark.parametrize(
    "pred,truth,want",
    [
        ("b, d", "b, d", True),
        ("b", "a, b, c", False),
        ("The answer is a.", "a", True),
        ("a", "b, d", False),
        ("(b) and (d)", "b, d", True),
        ("d, b", "b, d", True),
        ("b, d, then maybe a", "b, d", True),
        ("none", "a", False),
        ("", "a", False),
    ],
)
def test_score_choice(pred, truth, want):
    assert score_choice(pred, truth, "abcd") is want


def test_extract_labels_runs():
    assert extract_labels("Answer: (c)", "abcd") == {"c"}
    assert extract_labels("Answer: b or c", "abcd") == {"b", "c"}


def test_question_validation():
    with pytest.raises(InvalidInput):
        EvalQuestion("1", "v", "reasoning", "why?", "a")
    with pytest.raises(InvalidInput):
        EvalQuestion("1", "v", "event_localization", "when?", "soon")
    with pytest.raises(InvalidInput):
        EvalQuestion("1", "v", "gossip", "who?", "a", {"a": "x"})
    EvalQuestion("1", "v", "event_localization", "when?", ["00:01:00", "[00:02:00, 00:02:05]"])


def test_load_dataset_reports_line(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"qid": "1", "video_id": "v", "category": "event_localization", "question": "q", "ground_truth": "00:00:01"}\n\n{"qid": 2}\n')
    with pytest.raises(InvalidInput, match=":3:"):
        load_dataset(p)


def test_run_benchmark_records_errors_and_verifies(tmp_path):
    qs = [
        EvalQuestion("1", "v", "event_localization", "q", "00:00:10"),
        EvalQuestion("2", "v", "reasoning", "q", "a", {"a": "x", "b": "y"}),
        EvalQuestion("3", "w", "event_localization", "q", "00:00:10"),
    ]

    def answerer(q):
        if q.video_id == "w":
            raise VQAgentError("video missing")
        return Prediction("00:00:11" if q.category == "event_localization" else "b")

    report = run_benchmark(qs, answerer, mode="toy", concurrency=3)
    assert [(r.qid, r.correct, r.rule) for r in report.records] == [("1", True, "point-tolerance"), ("2", False, "choice-set"), ("3", False, "error")]
    assert report.total == {"n": 3, "correct": 1, "accuracy": 1 / 3}
    assert report.by_category["event_localization"] == {"n": 2, "correct": 1, "accuracy": 0.5}
    paths = report.write(tmp_path)
    doc = json.loads(paths["json"].read_text())
    assert doc["legend"] == LEGEND and doc["total"]["n"] == 3
    rows = list(csv.reader(open(paths["tsv"]), delimiter="\t"))
    assert rows[0][:4] == ["qid", "category", "video_type", "correct"] and len(rows) == 4


def test_report_verify_catches_duplicates():
    rec = QuestionRecord("1", "reasoning", "vlog", "a", True, "choice-set")
    with pytest.raises(VQAgentError):
        EvalReport("m", [rec, rec]).verify()


@given(st.lists(st.tuples(st.sampled_from(["reasoning", "event_localization"]), st.sampled_from(["vlog", "documentary"]), st.booleans()), max_size=30))
def test_report_aggregates_recompute(rows):
    report = EvalReport("m", [QuestionRecord(str(i), c, v, "", ok, "r") for i, (c, v, ok) in enumerate(rows)]).verify()
    assert report.total["correct"] == sum(ok for _, _, ok in rows)
    assert sum(g["n"] for g in report.by_category.values()) == len(rows)
    assert sum(g["correct"] for g in report.by_video_type.values()) == report.total["correct"]


def test_uniform_frames():
    frames = make_frames(range(10), [[1]] * 10)
    assert uniform_frames(frames, 9, 20) == frames  # fewer frames than asked: use all
    frames = make_frames(range(101), [[1]] * 101)
    assert [f.timestamp for f in uniform_frames(frames, 100, 4)] == [12, 37, 62, 87]  # grid points fall on .5: ties take the earlier frame


def test_perfect_system_scores_one(world):
    qs = load_dataset(world.paths["questions"])
    truth = {q.qid: q.ground_truth for q in qs}

    def oracle(q):
        t = truth[q.qid]
        return Prediction(t[0] if isinstance(t, list) else t)

    report = run_benchmark(qs, oracle, world.ws.library, "oracle")
    assert report.accuracy() == 1.0
    assert all(g["accuracy"] == 1.0 for g in report.by_category.values())
    assert set(report.by_video_type) == {"episode_movie", "documentary"}


def test_controls_leave_no_rewinder_trace(world):
    ws = world.ws
    q = next(q for q in load_dataset(world.paths["questions"]) if q.qid == "d03")
    pred = Video2RagAnswerer(ws.store, ws.providers.embedder, ws.providers.chat)(q)
    assert not pred.trace.of("tool_invoked")
    pred = FramesSttAnswerer(ws.library, ws.providers.chat)(q)
    assert len(pred.trace.of("answered")[0]["frames"]) == 20
