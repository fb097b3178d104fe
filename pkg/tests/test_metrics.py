import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geltouch.engine import GestureEstimate
from geltouch.events import GestureLabel, GestureType
from geltouch.geometry import GeometryConfig
from geltouch.metrics import (AlignedPair, align_labels, distance_error_px,
                              evaluate)
from geltouch.pipeline import BatchLatency, PipelineOutput


def out_at(t, gtype=GestureType.NO_GESTURE, points=(), intensity=0.0):
    pts = np.array(points, dtype=float).reshape(-1, 2)
    return PipelineOutput(
        t_us=t, resting=False, latency=BatchLatency(),
        estimate=GestureEstimate(gesture_type=gtype, contact_points=pts,
                                 intensity_mm=intensity))


def label_at(t, gtype=GestureType.NO_GESTURE, points=(), intensity=0.0):
    return GestureLabel(t=t, gesture_type=gtype,
                        contact_points=np.array(points, dtype=float).reshape(-1, 2),
                        intensity_mm=intensity)


class TestAlign:
    def test_output_at_label_time_verbatim(self):
        labels = [label_at(100, GestureType.PUSH, [(5, 5)], 2.0),
                  label_at(200, GestureType.PUSH, [(6, 5)], 4.0)]
        pairs = align_labels([out_at(100, GestureType.PUSH, [(5, 5)], 2.0)], labels)
        assert pairs[0].true_intensity_mm == 2.0
        assert np.array_equal(pairs[0].true_points, [[5.0, 5.0]])

    def test_midpoint_interpolates(self):
        labels = [label_at(100, GestureType.PUSH, [(0, 0)], 2.0),
                  label_at(200, GestureType.PUSH, [(10, 0)], 4.0)]
        pairs = align_labels([out_at(150)], labels)
        assert pairs[0].true_intensity_mm == pytest.approx(3.0)
        assert np.allclose(pairs[0].true_points, [[5.0, 0.0]])
        assert pairs[0].true_type == GestureType.PUSH

    def test_type_is_most_recent(self):
        labels = [label_at(100, GestureType.PUSH, [(0, 0)], 2.0),
                  label_at(200)]
        pairs = align_labels([out_at(199)], labels)
        assert pairs[0].true_type == GestureType.PUSH
        pairs = align_labels([out_at(200)], labels)
        assert pairs[0].true_type == GestureType.NO_GESTURE
        assert len(pairs[0].true_points) == 0

    def test_outputs_before_first_label_skipped_with_warning(self):
        labels = [label_at(100)]
        with pytest.warns(UserWarning):
            pairs = align_labels([out_at(50), out_at(150)], labels)
        assert len(pairs) == 1

    def test_dense_vs_subsampled_interpolation(self):
        # analytic dense labels vs an interpolated subsampled copy; the
        # envelope is gentle enough that 80 ms linear interpolation stays
        # within 0.05 mm (the error is curvature-bound)
        from geltouch.simulator import CompiledScript, GelScene
        from conftest import push_script
        scene = GelScene()
        script = push_script(peak_mm=4.0, t_start=0, attack=700_000,
                             hold=400_000, release=700_000)
        cs = CompiledScript(script, scene)
        dense = [cs.label_at(t) for t in range(0, 1_800_001, 40_000)]
        sparse = dense[::2]
        outputs = [out_at(lab.t) for lab in dense]
        pairs_sparse = align_labels(outputs, sparse)
        for pair, lab in zip(pairs_sparse, dense):
            assert pair.true_intensity_mm == pytest.approx(lab.intensity_mm, abs=0.05)


class TestDistanceError:
    def test_exact_match_zero(self):
        pts = np.array([[1.0, 2.0], [30.0, 40.0]])
        assert distance_error_px(pts, pts) == 0.0

    def test_surplus_prediction_discarded(self):
        pred = np.array([[0.0, 0.0], [100.0, 0.0]])
        true = np.array([[0.0, 0.0]])
        assert distance_error_px(pred, true) == 0.0

    def test_fewer_predictions_than_truth(self):
        pred = np.array([[0.0, 0.0]])
        true = np.array([[0.0, 0.0], [50.0, 0.0]])
        assert distance_error_px(pred, true) == 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        pred = rng.uniform(0, 100, (3, 2))
        true = rng.uniform(0, 100, (2, 2))
        base = distance_error_px(pred, true)
        assert distance_error_px(pred[::-1], true[::-1]) == pytest.approx(base)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5))
    def test_matches_exhaustive_oracle(self, seed, n_pred, n_true):
        rng = np.random.default_rng(seed)
        pred = rng.uniform(0, 300, (n_pred, 2))
        true = rng.uniform(0, 300, (n_true, 2))
        # oracle: plain loops implementing the stated rule
        nearest = [min(np.hypot(*(p - t)) for t in true) for p in pred]
        nearest.sort()
        keep = nearest[:len(true)] if len(pred) > len(true) else nearest
        oracle = sum(keep) / len(keep)
        assert distance_error_px(pred, true) == pytest.approx(oracle, rel=1e-9)


class TestEvaluate:
    def _mixed(self):
        labels = [
            label_at(0),
            label_at(100, GestureType.PUSH, [(10, 10)], 2.0),
            label_at(200, GestureType.PUSH, [(10, 10)], 4.0),
            label_at(300),
            label_at(400, GestureType.ZOOM, [(5, 5), (20, 20)], 3.0),
            label_at(500),
        ]
        return labels

    def test_perfect_outputs(self):
        labels = self._mixed()
        outputs = []
        for lab in labels:
            outputs.append(out_at(lab.t, lab.gesture_type,
                                  lab.contact_points, lab.intensity_mm))
        rep = evaluate(outputs, labels, GeometryConfig())
        assert rep.accuracy == 1.0
        assert rep.count_accuracy == 1.0
        assert rep.distance_error_mm == 0.0
        assert rep.intensity_mae_mm == 0.0

    def test_all_no_gesture_recall_zero(self):
        labels = self._mixed()
        outputs = [out_at(lab.t) for lab in labels]
        rep = evaluate(outputs, labels, GeometryConfig())
        assert rep.per_class["Push"][1] == 0.0  # recall
        assert rep.per_class["Zoom"][1] == 0.0
        assert rep.per_class["NoGesture"][1] == 1.0

    def test_confusion_rows_sum_to_one_where_class_present(self):
        labels = self._mixed()
        outputs = [out_at(lab.t, GestureType.PUSH, [(1, 1)], 1.0) for lab in labels]
        rep = evaluate(outputs, labels, GeometryConfig())
        # row-normalized component contributes 0.5 per present row; the
        # column-normalized half may add more, so check the row-normalized
        # structure through the balanced matrix bounds
        assert rep.confusion_balanced.min() >= 0.0
        assert rep.confusion_balanced.max() <= 1.0

    def test_bin_recombination_matches_gesture_accuracy(self):
        labels = self._mixed()
        outputs = [
            out_at(0),
            out_at(100, GestureType.PUSH, [(10, 10)], 2.0),
            out_at(200),  # miss
            out_at(300),
            out_at(400, GestureType.ZOOM, [(5, 5), (20, 20)], 3.0),
            out_at(500),
        ]
        rep = evaluate(outputs, labels, GeometryConfig())
        recombined = ((rep.bin_accuracy * rep.bin_counts).sum()
                      / rep.bin_counts.sum())
        assert recombined == pytest.approx(rep.gesture_only_accuracy)

    def test_report_text_deterministic(self):
        labels = self._mixed()
        outputs = [out_at(lab.t, lab.gesture_type, lab.contact_points,
                          lab.intensity_mm) for lab in labels]
        a = evaluate(outputs, labels, GeometryConfig()).to_text()
        b = evaluate(outputs, labels, GeometryConfig()).to_text()
        assert a == b
        assert "accuracy: 1.000000" in a
