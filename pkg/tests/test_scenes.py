import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_frames
from vqagent.errors import InvalidInput
from vqagent.scenes import DetectionParams, detect_scenes, frame_distances, frames_in_span, sample_frames


def two_scene_frames(n_first=5, n_second=5):
    a, b = [1, 0, 0, 0], [0, 0, 0, 1]
    times = range(n_first + n_second)
    return make_frames(times, [a] * n_first + [b] * n_second)


def test_distance_is_total_variation():
    frames = make_frames([0, 1, 2], [[2, 2], [4, 0], [4, 0]])
    assert frame_distances(frames) == pytest.approx([0.5, 0.0])
    assert frame_distances(make_frames([0, 1], [[1, 0], [0, 5]])) == pytest.approx([1.0])


def test_distance_scale_invariant():
    frames = make_frames([0, 1], [[1, 2, 3], [2, 4, 6]])
    assert frame_distances(frames) == pytest.approx([0.0])


@pytest.mark.parametrize("bad", [[-1, 2], [np.nan, 1], [np.inf, 1]])
def test_distance_rejects_bad_features(bad):
    with pytest.raises(InvalidInput):
        frame_distances(make_frames([0, 1], [[1, 1], bad]))


def test_single_cut():
    spans = detect_scenes(two_scene_frames())
    assert spans == [(0.0, 5.0), (5.0, 9.0)]


def test_short_middle_span_folds_forward():
    a, b, c = [1, 0, 0], [0, 1, 0], [0, 0, 1]
    frames = make_frames(range(12), [a] * 5 + [b] + [c] * 6)
    spans = detect_scenes(frames, DetectionParams(0.3, 2.0))
    assert spans == [(0.0, 5.0), (5.0, 11.0)]


def test_short_tail_folds_back():
    frames = make_frames(range(8), [[1, 0]] * 7 + [[0, 1]])
    assert detect_scenes(frames, DetectionParams(0.3, 2.0)) == [(0.0, 7.0)]


def test_uniform_stream_is_one_span():
    frames = make_frames(range(30), [[3, 1, 1]] * 30)
    assert detect_scenes(frames) == [(0.0, 29.0)]


def test_too_few_frames():
    with pytest.raises(InvalidInput):
        detect_scenes(make_frames([0], [[1]]))
    assert detect_scenes(make_frames([4], [[1]]), DetectionParams(allow_single_frame=True)) == [(4.0, 4.0)]


@pytest.mark.parametrize("kw", [{"diff_threshold": 0}, {"diff_threshold": 1}, {"min_segment_seconds": 0}, {"frames_per_segment": 0}])
def test_params_validated(kw):
    with pytest.raises(InvalidInput):
        DetectionParams(**kw)


streams = st.integers(min_value=2, max_value=60).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=n - 1, max_size=n - 1),
        st.lists(st.lists(st.integers(min_value=0, max_value=9), min_size=4, max_size=4).filter(any), min_size=n, max_size=n),
    )
)


@settings(max_examples=150, deadline=None)
@given(streams, st.floats(min_value=0.01, max_value=0.99), st.floats(min_value=0.1, max_value=20))
def test_spans_cover_stream_without_overlap(stream, threshold, min_len):
    gaps, feats = stream
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    frames = make_frames(times, feats)
    spans = detect_scenes(frames, DetectionParams(threshold, min_len))
    assert spans[0][0] == frames[0].timestamp and spans[-1][1] == frames[-1].timestamp
    for (s0, e0), (s1, _) in zip(spans, spans[1:]):
        assert e0 == s1
    assert all(s < e for s, e in spans)
    if len(spans) > 1:
        assert all(e - s >= min_len for s, e in spans)
    # every frame falls in exactly one span under the half-open rule
    for f in frames:
        assert sum(1 for sp in spans if f in frames_in_span(sp, frames)) == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=15))
def test_sampling_returns_k_ordered_frames(n, k):
    frames = make_frames(range(n), [[1]] * n)
    sample = sample_frames((0, n - 1), frames, k)
    ts = [f.timestamp for f in sample.frames]
    assert ts == sorted(set(ts))
    assert len(ts) == min(n, k)
    assert sample.short == (n < k)


def test_sampling_uses_interior_grid():
    frames = make_frames(range(121), [[1]] * 121)
    ts = [f.timestamp for f in sample_frames((0, 120), frames, 10).frames]
    assert ts == [6, 18, 30, 42, 54, 66, 78, 90, 102, 114]


def test_sampling_tie_goes_to_earlier_frame():
    frames = make_frames(range(11), [[1]] * 11)
    # grid point 5.0 +- 0: exact; with k=2 grid is 2.5 and 7.5, both exact ties
    assert [f.timestamp for f in sample_frames((0, 10), frames, 2).frames] == [2, 7]


def test_frames_in_span_half_open():
    frames = make_frames(range(6), [[1]] * 6)
    assert [f.timestamp for f in frames_in_span((0, 3), frames)] == [0, 1, 2]
    assert [f.timestamp for f in frames_in_span((3, 5), frames)] == [3, 4, 5]
