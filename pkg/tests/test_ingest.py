import json

import numpy as np
import pytest
from PIL import Image

from vqagent.errors import InvalidInput, ProviderError
from vqagent.ingest import (
    PillowRenderer,
    SceneCaption,
    annotate_frames,
    build_transcript,
    ingest,
    parse_caption,
    write_ingest_report,
)
from vqagent.providers import Providers, ScriptedChat
from vqagent.providers.fixture import FixtureASR, FixtureDetector
from vqagent.scenes import DetectionParams
from vqagent.store import KnowledgeStore
from vqagent.video import Annotation, Frame, Utterance, VideoLibrary, source_from_dict


def two_scene_manifest():
    frames = []
    for t in range(21):
        kitchen = t < 10
        rec = {
            "t": t,
            "feature": [5, 1, 1, 1] if kitchen else [1, 1, 1, 5],
            "content": {
                "scene": "kitchen" if kitchen else "garden",
                "location": "house",
                "events": (["kettle boils"] if t == 3 else ["toast pops"] if t == 5 else []) if kitchen else ["dog digs"],
            },
        }
        if t == 15:
            rec["annotations"] = [{"box": [0.1, 0.1, 0.2, 0.3], "label": "Logan"}]
        frames.append(rec)
    return {
        "video_id": "home",
        "duration": 20,
        "video_type": "vlog",
        "frames": frames,
        "transcript": [
            {"t0": 12, "t1": 14, "speaker": "Logan", "text": "Good boy."},
            {"t0": 1, "t1": 2, "speaker": "Ana", "text": "Tea?"},
            {"t0": 1, "t1": 2, "speaker": "Ada", "text": "Yes."},
        ],
    }


@pytest.fixture
def home():
    lib = VideoLibrary()
    source = lib.add(source_from_dict(two_scene_manifest()))
    providers = Providers(chat=ScriptedChat(vision=lib.perceive), asr=FixtureASR(lib), detector=FixtureDetector())
    return lib, source, providers


def test_two_scenes_two_entries(home):
    lib, source, providers = home
    store = KnowledgeStore(providers.embedder.dimension)
    report = ingest(source, store, providers, DetectionParams(0.3, 2.0))
    assert [(e.start_ts, e.end_ts) for e in report.entries] == [(0.0, 10.0), (10.0, 20.0)]
    kitchen, garden = report.segments
    assert kitchen.caption.events_chronological == ["kettle boils", "toast pops"]
    assert "Logan" in garden.caption.characters
    assert [u.text for u in kitchen.transcript] == ["Yes.", "Tea?"]  # same t0: ordered by speaker
    assert "Dialogue" in kitchen.caption.scene_details
    # re-ingest is idempotent per span
    ingest(source, store, providers, DetectionParams(0.3, 2.0))
    assert len(store) == 2


def test_corrupt_segment_is_isolated(home, tmp_path):
    lib, source, providers = home

    class Broken(ScriptedChat):
        def _complete(self, req):
            if "home@15.000" in req.images:
                raise ProviderError("model crashed")
            return super()._complete(req)

    providers.chat = Broken(vision=lib.perceive)
    store = KnowledgeStore(providers.embedder.dimension)
    report = ingest(source, store, providers, DetectionParams(0.3, 2.0))
    assert len(report.entries) == 1 and len(report.failures) == 1
    assert "model crashed" in report.failures[0].error
    write_ingest_report(report, tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert [s["ok"] for s in doc["segments"]] == [True, False]


def test_unstructured_caption_degrades():
    warnings = []
    cap = parse_caption("a lovely garden", warnings)
    assert cap.summary == "a lovely garden" and cap.location == "unknown" and warnings


def test_caption_serialization_order():
    text = SceneCaption("night", "pier", "Ana", ["a", "b"], "foggy", "quiet").serialize()
    assert text.splitlines() == ["Time: night", "Location: pier", "Characters: Ana", "Events:", "1. a", "2. b", "Details: foggy", "Summary: quiet"]


def test_annotate_rejects_boxes_outside_unit_square():
    class Sloppy:
        def detect(self, frame):
            return [Annotation((0.5, 0.5, 0.9, 0.1), "oops", "x", 1.0), Annotation((0.1, 0.1, 0.1, 0.1), "ok", "x", 1.0)]

    warnings = []
    (f,) = annotate_frames([Frame("v", 1.0)], Sloppy(), warnings=warnings)
    assert [a.label for a in f.annotations] == ["ok"] and len(warnings) == 1
    frames = [Frame("v", 1.0)]
    assert annotate_frames(frames, None) == frames


def test_detector_failure_passes_frame_through():
    class Down:
        def detect(self, frame):
            raise ProviderError("offline")

    warnings = []
    out = annotate_frames([Frame("v", 2.0)], Down(), warnings=warnings)
    assert out[0].annotations == () and "offline" in warnings[0]


def test_transcript_failure_is_empty():
    class Deaf:
        def transcribe(self, ref):
            raise ProviderError("no audio")

    warnings = []
    assert build_transcript("x", Deaf(), warnings=warnings) == [] and warnings
    assert build_transcript("", FixtureASR()) == []


def test_renderer_draws_boxes(tmp_path):
    img = tmp_path / "f.png"
    Image.new("RGB", (100, 80), "white").save(img)
    frame = Frame("v", 1.0, np.ones(3), str(img), (Annotation((0.1, 0.1, 0.5, 0.5), "Logan", "x", 1.0),))
    out = PillowRenderer(tmp_path / "out").render(frame)
    with Image.open(out) as drawn:
        assert drawn.getpixel((10, 30)) == (255, 0, 0)


def test_manifest_validation():
    bad = two_scene_manifest()
    bad["frames"][3]["t"] = 1
    with pytest.raises(InvalidInput):
        source_from_dict(bad)
    with pytest.raises(InvalidInput):
        source_from_dict({"video_id": "x", "duration": 3})
    with pytest.raises(InvalidInput):
        Utterance("a", "hi", 3, 1)
