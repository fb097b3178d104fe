import numpy as np
import pytest

from geltouch.events import GestureType
from geltouch.pipeline import (GesturePipeline, PipelineError, bench,
                               format_output, parse_output, read_outputs,
                               write_outputs)
from geltouch.recording import Recording
from geltouch.simulator import GelScene, generate_labeled_recording

from conftest import push_script


def run_all(rec, **kw):
    return list(GesturePipeline(**kw).run(rec))


class TestBatching:
    def test_empty_recording_no_outputs(self):
        assert run_all(Recording()) == []

    def test_events_only_recording_fails_cleanly(self, push_recording):
        rec = Recording(geometry=push_recording.geometry,
                        events=push_recording.events)
        with pytest.raises(PipelineError):
            run_all(rec)

    def test_batch_count_tiles_stream(self):
        scene = GelScene(noise_rate=0.1)
        rec = generate_labeled_recording(scene, [], duration_us=1_000_000)
        outputs = run_all(rec)
        assert len(outputs) == 100
        assert outputs[0].t_us == 10_000
        assert outputs[-1].t_us == 1_000_000

    def test_noise_only_all_no_gesture_with_resets(self):
        scene = GelScene(noise_rate=0.1)
        rec = generate_labeled_recording(scene, [], duration_us=1_000_000)
        outputs = run_all(rec)
        assert all(o.estimate.gesture_type == GestureType.NO_GESTURE for o in outputs)
        assert sum(1 for o in outputs if o.reset_applied) >= 1

    def test_push_timeline(self, push_recording):
        outputs = run_all(push_recording)
        types = [o.estimate.gesture_type for o in outputs]
        # NoGesture before the script starts
        assert all(t == GestureType.NO_GESTURE for t in types[:45])
        # push detected through the hold phase (script holds 800..1400 ms)
        hold = types[85:135]
        assert hold.count(GestureType.PUSH) / len(hold) > 0.9
        # back to rest at the end
        assert all(t == GestureType.NO_GESTURE for t in types[-15:])
        # intensity rises to ~4 mm during hold
        peak = max(o.estimate.intensity_mm for o in outputs)
        assert peak == pytest.approx(4.0, abs=0.8)

    def test_reset_zeroes_displacement(self, push_recording):
        pipe = GesturePipeline()
        for out in pipe.run(push_recording):
            if out.reset_applied:
                assert out.estimate.gesture_type == GestureType.NO_GESTURE
                assert out.estimate.intensity_mm == 0.0
                assert np.linalg.norm(pipe.tracker.displacement_field(), axis=1).max() == 0.0


class TestDeterminism:
    def test_identical_runs(self, push_recording):
        a = run_all(push_recording)
        b = run_all(push_recording)
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.estimate.gesture_type == y.estimate.gesture_type
            assert x.estimate.intensity_mm == y.estimate.intensity_mm
            assert np.array_equal(x.estimate.contact_points, y.estimate.contact_points)
            assert x.reset_applied == y.reset_applied

    def test_threaded_rest_lane_matches_offline(self, push_recording):
        a = run_all(push_recording)
        b = run_all(push_recording, threaded_rest=True)
        for x, y in zip(a, b):
            assert x.estimate.gesture_type == y.estimate.gesture_type
            assert x.estimate.intensity_mm == y.estimate.intensity_mm
            assert x.resting == y.resting
            assert x.reset_applied == y.reset_applied


class TestOutputsFile:
    def test_round_trip(self, push_recording, tmp_path):
        outputs = run_all(push_recording)
        path = tmp_path / "outputs.txt"
        write_outputs(outputs, path)
        back = read_outputs(path)
        assert len(back) == len(outputs)
        for x, y in zip(outputs, back):
            assert x.t_us == y.t_us
            assert x.estimate.gesture_type == y.estimate.gesture_type
            assert np.allclose(x.estimate.contact_points, y.estimate.contact_points,
                               atol=1e-4)
            assert y.estimate.intensity_mm == pytest.approx(x.estimate.intensity_mm,
                                                            abs=1e-6)

    def test_format_stable(self):
        from geltouch.engine import GestureEstimate
        from geltouch.pipeline import BatchLatency, PipelineOutput
        out = PipelineOutput(
            t_us=12345, resting=False, latency=BatchLatency(1.0, 2.0, 3.0),
            estimate=GestureEstimate(gesture_type=GestureType.NO_GESTURE))
        line = format_output(out)
        assert line.startswith("t=12345 type=NoGesture points= intensity_mm=0.000000")
        assert parse_output(line).estimate.gesture_type == GestureType.NO_GESTURE


class TestBench:
    def test_report_fields(self, push_recording):
        report = bench(push_recording)
        assert report.n_events == len(push_recording.events)
        assert report.n_batches == 200
        assert report.throughput_mev_s > 0
        assert report.total_ms[0] >= 0
        text = report.to_text()
        assert "throughput_mev_s" in text
        assert "rest_ms_mean" in text
