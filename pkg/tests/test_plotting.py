from vqagent.evaluation import EvalReport, QuestionRecord
from vqagent.plotting import accuracy_chart, scene_score_plot


def test_charts_are_png(tmp_path):
    reports = [
        EvalReport("omagent", [QuestionRecord("1", "reasoning", "vlog", "a", True, "r")]),
        EvalReport("video2rag", [QuestionRecord("1", "reasoning", "vlog", "b", False, "r")]),
    ]
    for group in ("category", "video_type"):
        out = accuracy_chart(reports, group, tmp_path / f"{group}.png")
        assert out.read_bytes()[:4] == b"\x89PNG"
    out = scene_score_plot([1, 2, 3], [0.1, 0.9, 0.1], 0.3, [2], tmp_path / "s.png")
    assert out.read_bytes()[:4] == b"\x89PNG"
