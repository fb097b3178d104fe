import collections

import numpy as np
import pytest

from geltouch.events import GestureType
from geltouch.geometry import GeometryConfig, mm_to_px
from geltouch.recording import encode_recording
from geltouch.simulator import (CompiledScript, EventSynthesizer, GelScene,
                                GestureScript, benchmark_scripts,
                                generate_events, generate_labeled_recording,
                                render_frame, true_displacement_field)

from conftest import push_script, two_finger_script


def bfs_label_count(binary):
    """Flood-fill connected component count; independent of scipy."""
    visited = np.zeros_like(binary, dtype=bool)
    h, w = binary.shape
    count = 0
    for sy, sx in zip(*np.nonzero(binary)):
        if visited[sy, sx]:
            continue
        count += 1
        stack = [(sy, sx)]
        visited[sy, sx] = True
        while stack:
            y, x = stack.pop()
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and binary[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    stack.append((ny, nx))
    return count


class TestDisplacementField:
    def test_zero_at_start(self, scene):
        script = push_script(t_start=100_000)
        field = true_displacement_field(script, scene, 100_000)
        assert np.allclose(field, 0.0)
        assert np.allclose(true_displacement_field(script, scene, 0), 0.0)

    def test_gaussian_tail_negligible(self, scene):
        # small enough that the kernel is not widened past its base sigma
        script = push_script(peak_mm=1.0, center=(150.0, 130.0), t_start=0)
        cs = CompiledScript(script, scene)
        field = cs.field_at(script.attack_us)  # peak
        d = np.linalg.norm(scene.marker_positions - [150.0, 130.0], axis=1)
        far = d > 3.5 * max(cs.script.deformation_sigma_px, 30.0)
        assert far.any()
        assert np.linalg.norm(field[far], axis=1).max() < 1e-3

    def test_peak_intensity_normalization(self, scene):
        # mean displacement of markers within r of the contacts equals the
        # scripted peak; oracle: average the closed-form field directly
        script = push_script(peak_mm=4.0, t_start=0)
        cs = CompiledScript(script, scene)
        t_peak = script.attack_us + script.hold_us // 2
        field = cs.field_at(t_peak)
        positions = scene.marker_positions + field
        contacts = positions[cs.contact_ids]
        d = np.linalg.norm(positions[:, None, :] - contacts[None, :, :], axis=2).min(axis=1)
        members = d <= 30.0
        mean_px = np.linalg.norm(field[members], axis=1).mean()
        assert mean_px == pytest.approx(mm_to_px(4.0, scene.geometry), rel=0.01)

    def test_envelope_phases(self):
        script = push_script(t_start=1_000_000, attack=200_000, hold=300_000,
                             release=400_000)
        assert script.envelope(1_000_000) == 0.0
        assert script.envelope(1_100_000) == pytest.approx(0.5)
        assert script.envelope(1_250_000) == 1.0
        assert script.envelope(1_500_000) == 1.0
        assert script.envelope(1_700_000) == pytest.approx(0.5)
        assert script.envelope(1_900_000) == 0.0
        assert script.envelope(2_500_000) == 0.0

    def test_finger_count_validated(self):
        with pytest.raises(ValueError):
            GestureScript(gesture_type=GestureType.PUSH,
                          finger_centers=((100.0, 100.0), (120.0, 100.0)),
                          peak_intensity_mm=2.0)
        with pytest.raises(ValueError):
            GestureScript(gesture_type=GestureType.ZOOM,
                          finger_centers=((100.0, 100.0),), peak_intensity_mm=2.0)

    def test_intensity_and_speed_limits(self):
        with pytest.raises(ValueError):
            push_script(peak_mm=19.0)
        with pytest.raises(ValueError):
            # 18 mm over a 50 ms attack implies > 210 mm/s
            push_script(peak_mm=18.0, attack=50_000)

    def test_twist_signs_mirror(self, scene):
        ccw = two_finger_script(GestureType.TWIST_CCW, t_start=0)
        cw = two_finger_script(GestureType.TWIST_CW, t_start=0)
        f1 = CompiledScript(ccw, scene).field_at(300_000)
        f2 = CompiledScript(cw, scene).field_at(300_000)
        assert np.allclose(f1, -f2)


class TestRenderFrame:
    def test_resting_frame_has_177_components(self, scene):
        frame = render_frame(scene, np.zeros_like(scene.marker_positions))
        assert bfs_label_count(frame.pixels >= 128) == 177

    def test_shifted_marker_centroid_moves(self, scene):
        field = np.zeros_like(scene.marker_positions)
        field[80] = (10.0, 0.0)
        ref = render_frame(scene, np.zeros_like(field))
        moved = render_frame(scene, field)

        def centroid(pix, center, box=6):
            x0, y0 = int(center[0]) - box, int(center[1]) - box
            patch = pix[y0:y0 + 2 * box, x0:x0 + 2 * box].astype(float) - 10.0
            patch[patch < 0] = 0
            ys, xs = np.mgrid[y0:y0 + 2 * box, x0:x0 + 2 * box]
            return np.array([(patch * xs).sum(), (patch * ys).sum()]) / patch.sum()

        p = scene.marker_positions[80]
        c_ref = centroid(ref.pixels, p)
        c_moved = centroid(moved.pixels, p + [10, 0])
        shift = c_moved - c_ref
        assert shift[0] == pytest.approx(10.0, abs=0.2)
        assert abs(shift[1]) < 0.2

    def test_out_of_bounds_markers_black_frame(self):
        scene = GelScene()
        field = np.full_like(scene.marker_positions, 10_000.0)
        frame = render_frame(scene, field)
        assert frame.pixels.max() == scene.background


class TestGenerateEvents:
    def test_static_scene_no_events(self, scene):
        ev = generate_events(scene, [], 0, 200_000)
        assert len(ev) == 0

    def test_noise_rate_poisson_count(self):
        scene = GelScene(noise_rate=0.5)
        ev = generate_events(scene, [], 0, 1_000_000)
        expected = 0.5 * 346 * 260 * 1.0
        assert abs(len(ev) - expected) < 3 * np.sqrt(expected)
        assert np.all(np.diff(ev["t"].astype(np.int64)) >= 0)

    def test_moving_marker_polarity_layout(self):
        # white dot moving right: positive events lead, negative trail
        scene = GelScene(marker_positions=np.array([[100.0, 130.0]]))
        synth = EventSynthesizer(scene, seed=0)
        times = np.arange(1000, 200_001, 1000, dtype=np.int64)
        pos = np.zeros((len(times), 1, 2))
        pos[:, 0, 0] = 100.0 + 20.0 * times / 200_000.0
        pos[:, 0, 1] = 130.0
        ev = synth.advance(pos, times)
        assert len(ev) > 0
        pos_x = ev["x"][ev["p"] == 1].astype(float).mean()
        neg_x = ev["x"][ev["p"] == 0].astype(float).mean()
        assert pos_x > neg_x

    def test_determinism(self, scene):
        script = push_script(t_start=50_000, attack=100_000, hold=100_000,
                             release=100_000)
        noisy = GelScene(noise_rate=0.2)
        a = generate_events(noisy, [script], 0, 400_000, seed=5)
        b = generate_events(noisy, [script], 0, 400_000, seed=5)
        assert np.array_equal(a, b)

    def test_polarity_balance_over_full_cycle(self, scene):
        script = push_script(peak_mm=3.0, t_start=50_000, attack=150_000,
                             hold=100_000, release=150_000)
        ev = generate_events(scene, [script], 0, 500_000)
        idx = ev["y"].astype(np.int64) * 346 + ev["x"].astype(np.int64)
        pos = np.bincount(idx[ev["p"] == 1], minlength=346 * 260).astype(np.int64)
        neg = np.bincount(idx[ev["p"] == 0], minlength=346 * 260).astype(np.int64)
        assert np.abs(pos - neg).max() <= 1

    def test_sorted_and_in_bounds(self):
        noisy = GelScene(noise_rate=0.3)
        script = push_script(t_start=20_000, attack=100_000, hold=50_000,
                             release=100_000)
        ev = generate_events(noisy, [script], 0, 300_000, seed=3)
        assert np.all(np.diff(ev["t"].astype(np.int64)) >= 0)
        assert ev["x"].max() < 346 and ev["y"].max() < 260


class TestLabeledRecording:
    def test_empty_script_list(self):
        rec = generate_labeled_recording(GelScene(), [], duration_us=1_000_000)
        assert len(rec.frames) == 26  # 25 Hz plus the initial frame
        assert all(lab.gesture_type == GestureType.NO_GESTURE for lab in rec.labels)
        assert all(lab.intensity_mm == 0.0 for lab in rec.labels)

    def test_push_labels_trace_envelope(self, push_recording):
        labels = push_recording.labels
        script_labels = [lab for lab in labels
                        if lab.gesture_type == GestureType.PUSH]
        assert script_labels
        intensities = [lab.intensity_mm for lab in script_labels]
        # rises to within tolerance of the scripted 4 mm peak, then falls
        assert max(intensities) == pytest.approx(4.0, abs=0.05)
        assert intensities[0] < 0.5 and intensities[-1] < 0.5
        # zero outside the script span
        for lab in labels:
            if lab.gesture_type == GestureType.NO_GESTURE:
                assert lab.intensity_mm == 0.0

    def test_label_intensity_continuous(self, push_recording):
        vals = [lab.intensity_mm for lab in push_recording.labels]
        jumps = np.abs(np.diff(vals))
        # 40 ms between labels; a 4 mm peak over 300 ms cannot jump more
        # than ~0.9 mm between frames
        assert jumps.max() < 1.0

    def test_overlapping_scripts_rejected(self, scene):
        s1 = push_script(t_start=100_000)
        s2 = push_script(t_start=200_000)
        with pytest.raises(ValueError):
            generate_labeled_recording(scene, [s1, s2], duration_us=4_000_000)

    def test_determinism_bit_identical(self):
        scene = GelScene(noise_rate=0.1)
        script = push_script(t_start=50_000, attack=100_000, hold=50_000,
                             release=100_000)
        a = generate_labeled_recording(scene, [script], duration_us=600_000)
        b = generate_labeled_recording(scene, [script], duration_us=600_000)
        assert encode_recording(a) == encode_recording(b)

    def test_benchmark_scripts_cover_requirements(self):
        scene = GelScene()
        scripts = benchmark_scripts(scene, 120_000_000, seed=3)
        types = collections.Counter(s.gesture_type for s in scripts)
        assert set(types) == {GestureType.PUSH, GestureType.PINCH, GestureType.ZOOM,
                              GestureType.TWIST_CW, GestureType.TWIST_CCW}
        fingers = collections.Counter(len(s.finger_centers) for s in scripts)
        assert set(fingers) >= {1, 2}
        peaks = [s.peak_intensity_mm for s in scripts]
        assert min(peaks) < 3.0 and max(peaks) > 12.0
        for a, b in zip(scripts, scripts[1:]):
            assert b.t_start_us > a.t_end_us
