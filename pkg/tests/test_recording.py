import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geltouch.events import Frame, GestureLabel, GestureType, make_events
from geltouch.geometry import GeometryConfig
from geltouch.recording import (CoordinateBoundsError, FormatError, Recording,
                                TimestampOrderError, decode_recording,
                                encode_recording, export_events_csv,
                                read_recording, recordings_equal,
                                write_recording)


def _frame(t, fill=0):
    return Frame(t=t, pixels=np.full((260, 346), fill, dtype=np.uint8))


def test_empty_recording_round_trips(tmp_path):
    rec = Recording()
    path = tmp_path / "empty.ntrc"
    write_recording(rec, path)
    back = read_recording(path)
    assert recordings_equal(rec, back)


def test_single_event_and_frame_round_trip(tmp_path):
    rec = Recording(
        events=make_events([10], [20], [5], [1]),
        frames=[_frame(0), _frame(40_000, fill=3)],
        labels=[GestureLabel(t=100, gesture_type=GestureType.PUSH,
                             contact_points=[(12.5, 30.25)], intensity_mm=2.5)],
        metadata="unit test")
    path = tmp_path / "one.ntrc"
    write_recording(rec, path)
    back = read_recording(path)
    assert recordings_equal(rec, back)
    assert back.metadata == "unit test"
    assert back.labels[0].intensity_mm == 2.5


@st.composite
def recordings(draw):
    n_ev = draw(st.integers(0, 200))
    ts = sorted(draw(st.lists(st.integers(0, 10_000_000), min_size=n_ev, max_size=n_ev)))
    xs = draw(st.lists(st.integers(0, 345), min_size=n_ev, max_size=n_ev))
    ys = draw(st.lists(st.integers(0, 259), min_size=n_ev, max_size=n_ev))
    ps = draw(st.lists(st.integers(0, 1), min_size=n_ev, max_size=n_ev))
    n_fr = draw(st.integers(0, 3))
    fts = sorted(draw(st.lists(st.integers(0, 10_000_000), min_size=n_fr, max_size=n_fr)))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 31)))
    frames = [Frame(t=t, pixels=rng.integers(0, 256, (260, 346)).astype(np.uint8))
              for t in fts]
    labels = []
    if (n_ev or n_fr) and draw(st.booleans()):
        span = Recording(events=make_events(xs, ys, ts, ps), frames=frames).time_span()
        lt = draw(st.integers(span[0], span[1]))
        labels = [GestureLabel(t=lt, gesture_type=GestureType.ZOOM,
                               contact_points=[(1.0, 2.0), (3.0, 4.0)],
                               intensity_mm=draw(st.floats(0, 18, allow_nan=False)))]
    return Recording(events=make_events(xs, ys, ts, ps), frames=frames, labels=labels,
                     metadata=draw(st.text(max_size=20)))


@settings(max_examples=40, deadline=None)
@given(recordings())
def test_round_trip_is_identity(rec):
    blob = encode_recording(rec)
    back = decode_recording(blob)
    assert recordings_equal(rec, back)
    # re-serialization is byte identical
    assert encode_recording(back) == blob


def test_bad_magic_rejected():
    with pytest.raises(FormatError):
        decode_recording(b"XXXX" + b"\x00" * 100)


def test_bad_version_rejected():
    blob = bytearray(encode_recording(Recording()))
    blob[4] = 99
    with pytest.raises(FormatError):
        decode_recording(bytes(blob))


def test_truncation_rejected():
    blob = encode_recording(Recording(events=make_events([1], [1], [1], [1])))
    with pytest.raises(FormatError):
        decode_recording(blob[:-4])


def test_trailing_garbage_rejected():
    blob = encode_recording(Recording())
    with pytest.raises(FormatError):
        decode_recording(blob + b"extra")


def test_non_monotone_events_rejected():
    rec = Recording(events=make_events([1, 2], [1, 2], [10, 5], [1, 0]))
    with pytest.raises(TimestampOrderError):
        encode_recording(rec)
    # and a crafted byte stream with swapped timestamps fails on decode
    ok = encode_recording(Recording(events=make_events([1, 2], [1, 2], [5, 10], [1, 0])))
    idx = ok.index(b"\x05\x00\x00\x00\x00\x00\x00\x00")
    bad = ok[:idx] + b"\x0b" + ok[idx + 1:]
    with pytest.raises(TimestampOrderError):
        decode_recording(bad)


def test_out_of_bounds_coordinates_rejected():
    ok = encode_recording(Recording(events=make_events([5], [7], [1], [1])))
    # event record starts after the header; x is its first u16
    idx = len(encode_recording(Recording()))
    bad = ok[:idx] + b"\xff\xff" + ok[idx + 2:]
    with pytest.raises(CoordinateBoundsError):
        decode_recording(bad)


def test_label_outside_span_rejected():
    rec = Recording(events=make_events([1], [1], [100], [1]),
                    labels=[GestureLabel(t=500, gesture_type=GestureType.NO_GESTURE)])
    with pytest.raises(ValueError):
        encode_recording(rec)


def test_csv_export(tmp_path):
    rec = Recording(events=make_events([3, 4], [5, 6], [7, 8], [1, 0]))
    path = tmp_path / "events.csv"
    export_events_csv(rec, path)
    assert path.read_text() == "7,3,5,1\n8,4,6,0\n"


def test_geometry_survives_round_trip():
    g = GeometryConfig(px_per_mm=3.0, gel_radius_mm=20.0, image_center=(150.0, 120.0))
    rec = Recording(geometry=g)
    back = decode_recording(encode_recording(rec))
    assert back.geometry == g
