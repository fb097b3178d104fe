import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geltouch.events import Frame, make_events
from geltouch.simulator import EventSynthesizer, GelScene, render_frame, render_markers
from geltouch.tracking import BlobTracker, EventOrderError, InitializationError


def make_frame(scene, displacement=None):
    if displacement is None:
        displacement = np.zeros_like(scene.marker_positions)
    return render_frame(scene, displacement, 0)


class TestInit:
    def test_full_grid_gives_177_states(self, scene):
        tracker = BlobTracker(expected_count=177).fit(make_frame(scene))
        assert tracker.n_markers_ == 177
        assert np.allclose(tracker.displacement_field(), 0.0)

    def test_all_black_frame_errors(self):
        frame = Frame(t=0, pixels=np.zeros((260, 346), dtype=np.uint8))
        with pytest.raises(InitializationError) as exc:
            BlobTracker().fit(frame)
        assert exc.value.found == 0

    def test_unexpected_count_errors(self, scene):
        with pytest.raises(InitializationError) as exc:
            BlobTracker(expected_count=5).fit(make_frame(scene))
        assert exc.value.found == 177

    def test_single_disk_centroid(self):
        single = GelScene(marker_positions=np.array([[100.0, 50.0]]))
        frame = Frame(t=0, pixels=render_markers(single.marker_positions, single))
        tracker = BlobTracker().fit(frame)
        assert tracker.n_markers_ == 1
        assert np.linalg.norm(tracker.positions_[0] - [100.0, 50.0]) < 0.5

    def test_states_view(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        states = tracker.states()
        assert len(states) == 177
        assert states[0].id == 0
        assert states[0].health == 0
        assert np.array_equal(states[3].anchor, states[3].position)


class TestProcessEvent:
    def test_event_at_blob_position_shrinks_covariance(self):
        single = GelScene(marker_positions=np.array([[100.0, 50.0]]))
        tracker = BlobTracker().fit(Frame(t=0, pixels=render_markers(
            single.marker_positions, single)))
        pos_before = tracker.positions_[0].copy()
        cov_before = tracker.covariances_[0].copy()
        x, y = tracker.positions_[0]
        tracker.partial_fit(make_events([round(x)], [round(y)], [10], [1]))
        # measurement at (round x, round y): sub-pixel innovation only
        assert np.linalg.norm(tracker.positions_[0] - pos_before) < 0.5
        assert (np.trace(tracker.covariances_[0][:2, :2])
                < np.trace(cov_before[:2, :2]))
        eig = np.linalg.eigvalsh(tracker.covariances_[0])
        assert np.all(eig > 0)

    def test_gated_event_changes_nothing(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        pos = tracker.positions_.copy()
        cov = tracker.covariances_.copy()
        # (0, 0) is far outside the gel: farther than the gate from any blob
        tracker.partial_fit(make_events([0], [0], [5], [1]))
        assert np.array_equal(tracker.positions_, pos)
        assert np.array_equal(tracker.covariances_, cov)
        assert tracker.accepted_ == 0

    def test_out_of_order_batch_rejected(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        tracker.partial_fit(make_events([173], [130], [1000], [1]))
        with pytest.raises(EventOrderError):
            tracker.partial_fit(make_events([173], [130], [500], [1]))
        with pytest.raises(EventOrderError):
            tracker.partial_fit(make_events([10, 11], [10, 10], [50, 40], [1, 1]))

    def test_linear_motion_tracked(self, single_marker_scene):
        synth = EventSynthesizer(single_marker_scene, seed=1)
        tracker = BlobTracker().fit(synth.frame(0))
        times = np.arange(1000, 100_001, 1000, dtype=np.int64)
        pos_seq = np.zeros((len(times), 1, 2))
        pos_seq[:, 0, 0] = 100.0 + 50.0 * times / 100_000.0
        pos_seq[:, 0, 1] = 130.0
        tracker.partial_fit(synth.advance(pos_seq, times))
        assert np.linalg.norm(tracker.positions_[0] - [150.0, 130.0]) < 1.0
        assert tracker.velocities_[0][0] == pytest.approx(500.0, rel=0.10)


class TestDisplacementField:
    def test_zero_after_init(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        assert np.allclose(tracker.displacement_field(), 0.0)

    def test_motion_reflected_for_one_marker(self, single_marker_scene):
        synth = EventSynthesizer(single_marker_scene, seed=2)
        tracker = BlobTracker().fit(synth.frame(0))
        times = np.arange(1000, 100_001, 1000, dtype=np.int64)
        pos_seq = np.zeros((len(times), 1, 2))
        pos_seq[:, 0, 0] = 100.0 + 50.0 * times / 100_000.0
        pos_seq[:, 0, 1] = 130.0
        tracker.partial_fit(synth.advance(pos_seq, times))
        v = tracker.displacement_field()
        assert np.linalg.norm(v[0]) == pytest.approx(50.0, abs=1.0)

    def test_no_events_means_constant_field(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        tracker.partial_fit(make_events([173], [130], [100], [1]))
        v1 = tracker.displacement_field().copy()
        tracker.partial_fit(make_events([], [], [], []))
        assert np.array_equal(tracker.displacement_field(), v1)

    def test_zero_after_reset(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        tracker.partial_fit(make_events([173, 174], [130, 130], [100, 200], [1, 0]))
        tracker.reset(make_frame(scene))
        assert np.allclose(tracker.displacement_field(), 0.0)


class TestReset:
    def test_reset_preserves_ids_by_anchor(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        anchors_before = tracker.anchors_.copy()
        tracker.reset(make_frame(scene))
        shift = np.linalg.norm(tracker.anchors_ - anchors_before, axis=1)
        assert shift.max() < scene.geometry.marker_pitch_px / 2

    def test_reset_all_black_errors(self, scene):
        tracker = BlobTracker().fit(make_frame(scene))
        with pytest.raises(InitializationError):
            tracker.reset(Frame(t=0, pixels=np.zeros((260, 346), dtype=np.uint8)))


class TestInvariants:
    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.tuples(st.integers(90, 110), st.integers(120, 140),
                              st.integers(0, 1)), min_size=1, max_size=60))
    def test_covariance_positive_definite_under_random_events(self, raw):
        single = GelScene(marker_positions=np.array([[100.0, 130.0]]))
        tracker = BlobTracker().fit(Frame(t=0, pixels=render_markers(
            single.marker_positions, single)))
        xs = [r[0] for r in raw]
        ys = [r[1] for r in raw]
        ps = [r[2] for r in raw]
        ts = np.arange(1, len(raw) + 1) * 137
        tracker.partial_fit(make_events(xs, ys, ts, ps))
        cov = tracker.covariances_[0]
        assert np.allclose(cov, cov.T, atol=1e-9)
        assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_throughput_at_least_1_mev_s(self, single_marker_scene):
        import time
        synth = EventSynthesizer(single_marker_scene, seed=3)
        tracker = BlobTracker().fit(synth.frame(0))
        times = np.arange(1000, 2_000_001, 1000, dtype=np.int64)
        pos_seq = np.zeros((len(times), 1, 2))
        pos_seq[:, 0, 0] = 100.0 + 40.0 * np.sin(2 * np.pi * times / 500_000)
        pos_seq[:, 0, 1] = 130.0
        events = synth.advance(pos_seq, times)
        assert len(events) > 30_000
        tracker.partial_fit(events[:1000])  # warm the jit path
        t0 = time.perf_counter()
        tracker.partial_fit(events[1000:])
        rate = (len(events) - 1000) / (time.perf_counter() - t0)
        assert rate > 1_000_000
