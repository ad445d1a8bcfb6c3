"""Scene detection over per-frame feature vectors, and uniform frame sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .video import Frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionParams:
    diff_threshold: float = 0.3
    min_segment_seconds: float = 2.0
    frames_per_segment: int = 10
    allow_single_frame: bool = False

    def __post_init__(self):
        if not 0 < self.diff_threshold < 1:
            raise InvalidInput("diff_threshold must lie in (0, 1)")
        if self.min_segment_seconds <= 0:
            raise InvalidInput("min_segment_seconds must be positive")
        if self.frames_per_segment < 1:
            raise InvalidInput("frames_per_segment must be at least 1")


def _unit_sum(features: np.ndarray) -> np.ndarray:
    sums = features.sum(axis=1, keepdims=True)
    return np.divide(features, sums, out=np.zeros_like(features), where=sums > 0)


def frame_distances(frames: list[Frame]) -> np.ndarray:
    """Change score between consecutive frames, in [0, 1].

    Each feature vector is scaled to unit sum and the score is half their L1
    distance (total variation), so 1.0 means fully disjoint histograms.
    """
    if len(frames) < 2:
        return np.zeros(0)
    if any(f.feature is None for f in frames):
        raise InvalidInput("every frame needs a feature vector for scene detection")
    feats = np.stack([np.asarray(f.feature, dtype=float) for f in frames])
    if feats.ndim != 2:
        raise InvalidInput("feature vectors must be one-dimensional and equal length")
    if not np.all(np.isfinite(feats)):
        raise InvalidInput("features contain NaN or infinity")
    if np.any(feats < 0):
        raise InvalidInput("features must be non-negative")
    norm = _unit_sum(feats)
    return 0.5 * np.abs(np.diff(norm, axis=0)).sum(axis=1)


def _merge_short(spans: list[tuple[float, float]], min_len: float) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    start = spans[0][0]
    last = len(spans) - 1
    for i, (_, end) in enumerate(spans):
        if end - start < min_len and i < last:
            continue  # fold into the successor
        out.append((start, end))
        start = end
    if len(out) > 1 and out[-1][1] - out[-1][0] < min_len:
        tail = out.pop()
        out[-1] = (out[-1][0], tail[1])
    return out


def detect_scenes(frames: list[Frame], params: DetectionParams = DetectionParams()) -> list[tuple[float, float]]:
    """Split a frame stream into contiguous scenes.

    A cut is placed before frame ``i + 1`` whenever the change score between
    frames ``i`` and ``i + 1`` exceeds ``params.diff_threshold``. Spans shorter
    than ``min_segment_seconds`` are folded into the following span; a short
    final span folds into its predecessor.
    """
    if len(frames) < 2:
        if len(frames) == 1 and params.allow_single_frame:
            t = frames[0].timestamp
            return [(t, t)]
        raise InvalidInput("scene detection needs at least two frames")
    dist = frame_distances(frames)
    cuts = [frames[i + 1].timestamp for i in np.flatnonzero(dist > params.diff_threshold)]
    bounds = [frames[0].timestamp, *cuts, frames[-1].timestamp]
    spans = [(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]
    if not spans:
        raise InvalidInput("frames span zero time")
    return _merge_short(spans, params.min_segment_seconds)


@dataclass
class Sample:
    frames: list[Frame]
    short: bool  # fewer frames than requested were available


def frames_in_span(span: tuple[float, float], frames: list[Frame]) -> list[Frame]:
    """Frames in ``[start, end)``; the end is closed when no frame follows it."""
    start, end = span
    closed = not frames or end >= frames[-1].timestamp
    return [f for f in frames if start <= f.timestamp and (f.timestamp < end or (closed and f.timestamp <= end))]


def sample_frames(span: tuple[float, float], frames: list[Frame], k: int = 10) -> Sample:
    """Pick ``k`` frames nearest the interior grid ``start + (i + 0.5) * len / k``."""
    if k < 1:
        raise InvalidInput("k must be at least 1")
    start, end = span
    if end < start:
        raise InvalidInput(f"empty span {span}")
    pool = frames_in_span(span, frames)
    if len(pool) <= k:
        if len(pool) < k:
            log.debug("span %s has %d frames, wanted %d", span, len(pool), k)
        return Sample(pool, len(pool) < k)
    times = np.array([f.timestamp for f in pool])
    grid = start + (np.arange(k) + 0.5) * (end - start) / k
    idx = []
    for g in grid:
        j = int(np.searchsorted(times, g))
        if j == 0:
            best = 0
        elif j == len(times):
            best = len(times) - 1
        else:
            best = j - 1 if g - times[j - 1] <= times[j] - g else j
        idx.append(best)
    # Collisions can only occur with irregular frame spacing; push them apart.
    for i in range(1, k):
        idx[i] = max(idx[i], idx[i - 1] + 1)
    for i in range(k - 1, -1, -1):
        idx[i] = min(idx[i], len(pool) - k + i)
        if i < k - 1:
            idx[i] = min(idx[i], idx[i + 1] - 1)
    return Sample([pool[i] for i in idx], False)
