"""Video-to-knowledge ingestion: scenes, sampled frames, visual prompts, transcript, captions."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InvalidInput, ProviderError, VQAgentError
from .prompts import CAPTION_DIMENSIONS, caption_request
from .scenes import DetectionParams, detect_scenes, sample_frames
from .store import KnowledgeEntry, KnowledgeStore, make_entry_id
from .text import extract_json
from .timecode import format_timestamp
from .video import Frame, Utterance, VideoSource

log = logging.getLogger(__name__)


@dataclass
class SceneCaption:
    time_context: str = "unknown"
    location: str = "unknown"
    characters: str = "unknown"
    events_chronological: list[str] = field(default_factory=list)
    scene_details: str = "unknown"
    summary: str = "unknown"

    def serialize(self) -> str:
        """Fixed-order labelled text; this is what gets embedded and searched."""
        events = "\n".join(f"{i}. {e}" for i, e in enumerate(self.events_chronological, 1)) or "unknown"
        return (
            f"Time: {self.time_context}\n"
            f"Location: {self.location}\n"
            f"Characters: {self.characters}\n"
            f"Events:\n{events}\n"
            f"Details: {self.scene_details}\n"
            f"Summary: {self.summary}"
        )


@dataclass
class Segment:
    segment_id: str
    start_ts: float
    end_ts: float
    sampled_frames: list[Frame]
    transcript: list[Utterance] = field(default_factory=list)
    caption: SceneCaption | None = None
    short_sample: bool = False


class PillowRenderer:
    """Burns boxes and labels into a copy of each frame image."""

    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = Path(out_dir)

    def render(self, frame: Frame) -> str:
        from PIL import Image, ImageDraw

        self.out_dir.mkdir(parents=True, exist_ok=True)
        with Image.open(frame.image_ref) as img:
            img = img.convert("RGB")
            draw = ImageDraw.Draw(img)
            w, h = img.size
            for ann in frame.annotations:
                x, y, bw, bh = ann.box
                box = (x * w, y * h, (x + bw) * w, (y + bh) * h)
                draw.rectangle(box, outline=(255, 0, 0), width=max(1, w // 200))
                draw.text((box[0], max(0, box[1] - 12)), ann.label, fill=(255, 0, 0))
            out = self.out_dir / f"{frame.video_id}_{frame.timestamp:010.3f}.png"
            img.save(out)
        return str(out)


def annotate_frames(frames: list[Frame], detector=None, renderer=None, warnings: list | None = None) -> list[Frame]:
    """Attach detector boxes to frames; render them onto images when there are images."""
    if detector is None:
        return list(frames)
    out = []
    for f in frames:
        try:
            found = detector.detect(f)
        except VQAgentError as exc:
            _warn(warnings, f"detector failed on {f.ref}: {exc}")
            out.append(f)
            continue
        kept = []
        for ann in found:
            try:
                kept.append(ann.validate())
            except InvalidInput as exc:
                _warn(warnings, f"rejected annotation on {f.ref}: {exc}")
        annotated = f.with_annotations(kept)
        if renderer is not None and annotated.image_ref and kept:
            annotated = replace(annotated, content={**annotated.content, "rendered": renderer.render(annotated)})
        out.append(annotated)
    return out


def _warn(sink, message):
    log.warning(message)
    if sink is not None:
        sink.append(message)


def build_transcript(audio_ref, asr, diarizer=None, warnings: list | None = None) -> list[Utterance]:
    try:
        utterances = asr.transcribe(audio_ref)
        if diarizer is not None:
            utterances = diarizer.assign(audio_ref, utterances)
    except VQAgentError as exc:
        _warn(warnings, f"transcription failed for {audio_ref!r}: {exc}")
        return []
    return sorted(utterances, key=lambda u: (u.t0, u.speaker))


class CaptionError(ProviderError):
    retryable = True


def parse_caption(text: str, warnings: list | None = None) -> SceneCaption:
    obj = extract_json(text)
    names = [n for n, _ in CAPTION_DIMENSIONS]
    if obj is None or not all(n in obj for n in names):
        _warn(warnings, "caption response was not structured; keeping raw text as summary")
        return SceneCaption(summary=text.strip() or "unknown")
    events = obj["events_chronological"]
    if isinstance(events, str):
        events = [events] if events.strip() else []
    return SceneCaption(
        time_context=str(obj["time_context"] or "unknown"),
        location=str(obj["location"] or "unknown"),
        characters=str(obj["characters"] or "unknown"),
        events_chronological=[str(e) for e in events],
        scene_details=str(obj["scene_details"] or "unknown"),
        summary=str(obj["summary"] or "unknown"),
    )


def caption_segment(segment: Segment, mllm, warnings: list | None = None) -> SceneCaption:
    req = caption_request(segment.sampled_frames, segment.transcript)
    req.enforce_contract = False  # unparseable replies degrade to a raw-summary caption
    try:
        text = mllm.chat(req)
    except ProviderError as exc:
        raise CaptionError(f"captioning {segment.segment_id} failed: {exc}") from exc
    return parse_caption(text, warnings)


@dataclass
class SegmentStatus:
    segment_id: str
    start_ts: float
    end_ts: float
    ok: bool
    error: str | None = None


@dataclass
class IngestReport:
    video_id: str
    entries: list[KnowledgeEntry]
    segments: list[Segment]
    statuses: list[SegmentStatus]
    warnings: list[str]
    spans: list[tuple[float, float]]

    @property
    def failures(self) -> list[SegmentStatus]:
        return [s for s in self.statuses if not s.ok]

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "segments": [
                {"segment_id": s.segment_id, "start": format_timestamp(s.start_ts), "end": format_timestamp(s.end_ts), "ok": s.ok, "error": s.error}
                for s in self.statuses
            ],
            "warnings": self.warnings,
        }


def ingest(
    source: VideoSource,
    store: KnowledgeStore,
    providers,
    params: DetectionParams = DetectionParams(),
    renderer=None,
    concurrency: int = 4,
    caption_retries: int = 1,
) -> IngestReport:
    """Run the full pipeline for one video and upsert one entry per segment.

    Segment failures are isolated: the report lists them and the remaining
    segments are still stored.
    """
    warnings: list[str] = []
    spans = detect_scenes(source.frames, params)
    audio_ref = source.audio_ref or f"video:{source.video_id}"
    transcript = build_transcript(audio_ref, providers.asr, providers.diarizer, warnings)

    segments = []
    for start, end in spans:
        sample = sample_frames((start, end), source.frames, params.frames_per_segment)
        if sample.short:
            warnings.append(
                f"segment {format_timestamp(start)}-{format_timestamp(end)}: only {len(sample.frames)} frames"
            )
        frames = annotate_frames(sample.frames, providers.detector, renderer, warnings)
        segments.append(
            Segment(
                segment_id=make_entry_id(source.video_id, start, end),
                start_ts=start,
                end_ts=end,
                sampled_frames=frames,
                transcript=[u for u in transcript if u.overlaps(start, end)],
                short_sample=sample.short,
            )
        )

    def work(seg: Segment):
        for attempt in range(caption_retries + 1):
            try:
                seg.caption = caption_segment(seg, providers.chat, warnings)
                text = seg.caption.serialize()
                vec = providers.embedder.embed(text)
                return KnowledgeEntry(seg.segment_id, source.video_id, seg.start_ts, seg.end_ts, text, vec)
            except CaptionError:
                if attempt == caption_retries:
                    raise

    statuses, entries = [], []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(work, seg) for seg in segments]
        for seg, fut in zip(segments, futures):
            try:
                entry = fut.result()
            except VQAgentError as exc:
                statuses.append(SegmentStatus(seg.segment_id, seg.start_ts, seg.end_ts, False, str(exc)))
                continue
            store.upsert(entry)
            entries.append(entry)
            statuses.append(SegmentStatus(seg.segment_id, seg.start_ts, seg.end_ts, True))
    return IngestReport(source.video_id, entries, segments, statuses, warnings, spans)


def write_ingest_report(report: IngestReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
