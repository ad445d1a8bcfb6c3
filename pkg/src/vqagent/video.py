"""Video source model, manifest I/O and frame access.

Decoding happens out of process: an extractor (for example
``ffmpeg -i in.mp4 -vf fps=1 frames/%06d.png``) writes frames to disk and a
manifest lists them. Everything downstream reads manifests only.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .timecode import format_timestamp

VIDEO_TYPES = ("vlog", "episode_movie", "variety", "documentary")


@dataclass(frozen=True)
class Annotation:
    box: tuple[float, float, float, float]  # x, y, w, h normalized to the unit square
    label: str
    source: str = "detector"
    confidence: float = 1.0

    def validate(self):
        x, y, w, h = self.box
        if not all(math.isfinite(v) for v in self.box):
            raise InvalidInput(f"non-finite box for {self.label!r}")
        if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > 1 + 1e-9 or y + h > 1 + 1e-9:
            raise InvalidInput(f"box {self.box} for {self.label!r} leaves the unit square")
        if not self.label.strip():
            raise InvalidInput("annotation label must be non-empty")
        return self

    def describe(self) -> str:
        return f"{self.label} (box {self.box[0]:.2f},{self.box[1]:.2f},{self.box[2]:.2f},{self.box[3]:.2f})"


@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str
    t0: float
    t1: float

    def __post_init__(self):
        if self.t0 > self.t1:
            raise InvalidInput(f"utterance ends before it starts: {self.t0} > {self.t1}")

    def overlaps(self, start: float, end: float) -> bool:
        if self.t0 == self.t1:
            return start <= self.t0 <= end
        return min(self.t1, end) - max(self.t0, start) > 0

    def render(self) -> str:
        return f"{format_timestamp(self.t0)}-{format_timestamp(self.t1)} {self.speaker}: {self.text}"


@dataclass(frozen=True)
class Frame:
    video_id: str
    timestamp: float
    feature: np.ndarray | None = field(default=None, compare=False)
    image_ref: str | None = None
    annotations: tuple[Annotation, ...] = ()
    # Ground truth for fixture-backed providers: what a viewer would see,
    # plus labelled faces for the fixture detector.
    content: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def ref(self) -> str:
        return frame_ref(self.video_id, self.timestamp)

    def with_annotations(self, annotations) -> "Frame":
        return replace(self, annotations=tuple(annotations))


def frame_ref(video_id: str, timestamp: float) -> str:
    return f"{video_id}@{timestamp:.3f}"


def parse_frame_ref(ref: str) -> tuple[str, float]:
    video_id, sep, ts = ref.rpartition("@")
    if not sep or not video_id:
        raise InvalidInput(f"malformed frame reference {ref!r}")
    try:
        return video_id, float(ts)
    except ValueError:
        raise InvalidInput(f"malformed frame reference {ref!r}") from None


@dataclass
class VideoSource:
    video_id: str
    duration: float
    frames: list[Frame]
    transcript: list[Utterance] = field(default_factory=list)
    title: str = ""
    video_type: str = ""
    audio_ref: str | None = None
    manifest_path: str | None = None

    def validate(self) -> "VideoSource":
        if not self.video_id:
            raise InvalidInput("video_id is required")
        if self.duration <= 0:
            raise InvalidInput("duration must be positive")
        prev = -math.inf
        dim = None
        for f in self.frames:
            if not (prev < f.timestamp) or not (0 <= f.timestamp <= self.duration):
                raise InvalidInput(f"frame timestamps must increase within [0, duration]: {f.timestamp}")
            prev = f.timestamp
            if f.feature is not None:
                if dim is None:
                    dim = f.feature.shape[0]
                if f.feature.shape != (dim,):
                    raise InvalidInput("feature length must be constant per video")
                if not np.all(np.isfinite(f.feature)):
                    raise InvalidInput(f"non-finite feature at {f.timestamp}")
        return self


def histogram_feature(image_path: str | os.PathLike, bins: int = 64) -> np.ndarray:
    """Per-channel colour histogram (3 * ``bins`` values), used when a frame has no feature."""
    from PIL import Image

    with Image.open(image_path) as img:
        arr = np.asarray(img.convert("RGB"))
    hists = [np.histogram(arr[..., c], bins=bins, range=(0, 256))[0] for c in range(3)]
    return np.concatenate(hists).astype(float)


def load_manifest(path: str | os.PathLike) -> VideoSource:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return source_from_dict(data, base_dir=path.parent, manifest_path=str(path.resolve()))


def source_from_dict(data: dict, base_dir: Path | None = None, manifest_path: str | None = None) -> VideoSource:
    try:
        video_id = data["video_id"]
        duration = float(data["duration"])
        frame_recs = data["frames"]
    except KeyError as exc:
        raise InvalidInput(f"manifest is missing {exc.args[0]!r}") from None
    frames = []
    for rec in frame_recs:
        image = rec.get("image")
        if image and base_dir is not None and not os.path.isabs(image):
            image = str(base_dir / image)
        feature = rec.get("feature")
        if feature is not None:
            feature = np.asarray(feature, dtype=float)
        elif image:
            feature = histogram_feature(image)
        content = dict(rec.get("content") or {})
        if rec.get("annotations"):
            content["faces"] = rec["annotations"]
        frames.append(Frame(video_id, float(rec["t"]), feature, image, (), content))
    transcript = [
        Utterance(u.get("speaker", "unknown"), u["text"], float(u["t0"]), float(u["t1"]))
        for u in data.get("transcript", [])
    ]
    return VideoSource(
        video_id=video_id,
        duration=duration,
        frames=frames,
        transcript=transcript,
        title=data.get("title", ""),
        video_type=data.get("video_type", ""),
        audio_ref=data.get("audio"),
        manifest_path=manifest_path,
    ).validate()


def nearest_frame(frames: list[Frame], t: float) -> Frame:
    """Nearest frame by timestamp; ties go to the earlier frame."""
    times = [f.timestamp for f in frames]
    import bisect

    i = bisect.bisect_left(times, t)
    if i == 0:
        return frames[0]
    if i == len(frames):
        return frames[-1]
    before, after = frames[i - 1], frames[i]
    return before if t - before.timestamp <= after.timestamp - t else after


class VideoLibrary:
    """Registry of ingested sources; serves original frames to the rewinder."""

    def __init__(self):
        self._videos: dict[str, VideoSource] = {}
        self._lock = threading.Lock()

    def add(self, source: VideoSource) -> VideoSource:
        with self._lock:
            self._videos[source.video_id] = source
        return source

    def load(self, manifest: str | os.PathLike) -> VideoSource:
        return self.add(load_manifest(manifest))

    def __contains__(self, video_id) -> bool:
        return video_id in self._videos

    def get(self, video_id: str) -> VideoSource:
        try:
            return self._videos[video_id]
        except KeyError:
            raise InvalidInput(f"unknown video {video_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._videos)

    def duration(self, video_id: str) -> float:
        return self.get(video_id).duration

    def frame(self, ref: str) -> Frame:
        video_id, t = parse_frame_ref(ref)
        source = self.get(video_id)
        for f in source.frames:
            if abs(f.timestamp - t) < 5e-4:
                return f
        raise InvalidInput(f"no frame at {ref!r}")

    def frames_between(self, video_id: str, t0: float, t1: float, fps: float = 1.0) -> list[Frame]:
        """Resample ``[t0, t1]`` at ``fps`` using nearest original frames, without duplicates."""
        if fps <= 0:
            raise InvalidInput("granularity must be positive")
        source = self.get(video_id)
        inside = [f for f in source.frames if t0 - 0.5 / fps <= f.timestamp <= t1 + 0.5 / fps]
        if not inside:
            return []
        picked: list[Frame] = []
        step = 1.0 / fps
        n = int(math.floor((t1 - t0) / step + 1e-9))
        for i in range(n + 1):
            f = nearest_frame(inside, t0 + i * step)
            if not picked or picked[-1] is not f:
                picked.append(f)
        return picked

    def perceive(self, ref: str) -> str:
        """Text rendering of what a frame shows, for fixture-backed vision mocks."""
        frame = self.frame(ref)
        c = frame.content
        parts = [format_timestamp(frame.timestamp)]
        if c.get("scene"):
            parts.append(f"scene: {c['scene']}")
        if c.get("location"):
            parts.append(f"location: {c['location']}")
        if c.get("time"):
            parts.append(f"time: {c['time']}")
        if c.get("events"):
            parts.append("events: " + "; ".join(c["events"]))
        if c.get("objects"):
            parts.append("objects: " + ", ".join(c["objects"]))
        return " | ".join(parts)

    def save_index(self, path: str | os.PathLike):
        index = {vid: v.manifest_path for vid, v in sorted(self._videos.items()) if v.manifest_path}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(index, fh, indent=2, sort_keys=True)

    @classmethod
    def from_index(cls, path: str | os.PathLike) -> "VideoLibrary":
        lib = cls()
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for manifest in json.load(fh).values():
                    lib.load(manifest)
        return lib
