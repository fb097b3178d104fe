"""Evaluation of pipeline outputs against a recording's label track.

Alignment takes, for each output timestamp, the most recent label's gesture
type and linearly interpolates contact points and intensity between the
bracketing labels. Reported metrics: per-class precision/recall/F1, overall
type accuracy, contact-point count accuracy, mean nearest-point distance
error in mm, intensity MAE in mm (over gesture-labeled observations),
accuracy binned by true intensity, and a balanced confusion matrix (mean of
row- and column-normalized counts).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .events import GestureLabel, GestureType
from .geometry import GeometryConfig
from .pipeline import PipelineOutput

N_CLASSES = len(GestureType)
DEFAULT_BIN_WIDTH_MM = 0.6


@dataclass
class AlignedPair:
    """One pipeline output matched with interpolated ground truth."""

    t_us: int
    pred_type: GestureType
    true_type: GestureType
    pred_points: np.ndarray
    true_points: np.ndarray
    pred_intensity_mm: float
    true_intensity_mm: float


@dataclass
class EvalReport:
    n_observations: int
    accuracy: float
    gesture_only_accuracy: float
    count_accuracy: float
    distance_error_mm: float
    intensity_mae_mm: float
    per_class: dict[str, tuple[float, float, float, int]]  # precision, recall, f1, support
    confusion_balanced: np.ndarray
    bin_edges_mm: np.ndarray
    bin_accuracy: np.ndarray
    bin_counts: np.ndarray

    def to_text(self) -> str:
        lines = [
            f"observations: {self.n_observations}",
            f"accuracy: {self.accuracy:.6f}",
            f"gesture_only_accuracy: {self.gesture_only_accuracy:.6f}",
            f"count_accuracy: {self.count_accuracy:.6f}",
            f"distance_error_mm: {self.distance_error_mm:.6f}",
            f"intensity_mae_mm: {self.intensity_mae_mm:.6f}",
            "",
            "class precision recall f1 support",
        ]
        for name, (p, r, f1, support) in self.per_class.items():
            lines.append(f"{name} {p:.6f} {r:.6f} {f1:.6f} {support}")
        lines.append("")
        lines.append("confusion_balanced (rows true, cols predicted)")
        names = [g.label for g in GestureType]
        lines.append("_ " + " ".join(names))
        for i, row in enumerate(self.confusion_balanced):
            lines.append(names[i] + " " + " ".join(f"{v:.4f}" for v in row))
        lines.append("")
        lines.append("intensity_bin_mm accuracy count")
        for lo, acc, cnt in zip(self.bin_edges_mm[:-1], self.bin_accuracy, self.bin_counts):
            lines.append(f"{lo:.1f} {acc:.6f} {int(cnt)}")
        return "\n".join(lines) + "\n"


def _interp_points(p0: np.ndarray, p1: np.ndarray, w: float) -> np.ndarray:
    """Interpolate p0 toward p1 by weight w, one output point per p0 point.

    Points are paired greedily by nearest distance without reuse; p0 points
    left unmatched (count mismatch between labels) are held constant.
    """
    if len(p0) == 0 or len(p1) == 0:
        return p0.copy()
    d = np.linalg.norm(p0[:, None, :] - p1[None, :, :], axis=2)
    out = p0.copy()
    flat_order = np.argsort(d, axis=None, kind="stable")
    used0 = np.full(len(p0), False)
    used1 = np.full(len(p1), False)
    for flat in flat_order:
        i, j = divmod(int(flat), len(p1))
        if used0[i] or used1[j]:
            continue
        used0[i] = True
        used1[j] = True
        out[i] = (1 - w) * p0[i] + w * p1[j]
    return out


def align_labels(outputs: list[PipelineOutput],
                 labels: list[GestureLabel]) -> list[AlignedPair]:
    """Match each output with interpolated ground truth at its timestamp."""
    if not labels:
        raise ValueError("no labels to align against")
    label_ts = np.array([lab.t for lab in labels], dtype=np.int64)
    pairs: list[AlignedPair] = []
    skipped = 0
    for out in outputs:
        t = out.t_us
        idx = int(np.searchsorted(label_ts, t, side="right")) - 1
        if idx < 0:
            skipped += 1
            continue
        cur = labels[idx]
        if idx + 1 < len(labels) and labels[idx + 1].t > cur.t:
            nxt = labels[idx + 1]
            w = (t - cur.t) / (nxt.t - cur.t)
        else:
            nxt = cur
            w = 0.0
        # Type: most recent label. Points/intensity: interpolate between the
        # bracketing labels, pairing points by nearest match.
        true_intensity = (1 - w) * cur.intensity_mm + w * nxt.intensity_mm
        true_points = _interp_points(cur.contact_points, nxt.contact_points, w)
        pairs.append(AlignedPair(
            t_us=t, pred_type=out.estimate.gesture_type, true_type=cur.gesture_type,
            pred_points=out.estimate.contact_points, true_points=true_points,
            pred_intensity_mm=out.estimate.intensity_mm,
            true_intensity_mm=true_intensity))
    if skipped:
        warnings.warn(f"skipped {skipped} outputs before the first label")
    return pairs


def distance_error_px(pred: np.ndarray, true: np.ndarray) -> float:
    """Mean nearest-truth distance; surplus predictions farthest from any
    truth are discarded first."""
    if len(true) == 0:
        raise ValueError("ground truth point set is empty")
    if len(pred) == 0:
        raise ValueError("no predicted points to score")
    d = np.linalg.norm(pred[:, None, :] - true[None, :, :], axis=2)
    nearest = d.min(axis=1)
    if len(pred) > len(true):
        keep = np.argsort(nearest, kind="stable")[:len(true)]
        nearest = nearest[keep]
    return float(nearest.mean())


def evaluate(outputs: list[PipelineOutput], labels: list[GestureLabel],
             geometry: GeometryConfig | None = None,
             bin_width_mm: float = DEFAULT_BIN_WIDTH_MM) -> EvalReport:
    """Score a pipeline run against its recording's label track."""
    geometry = geometry if geometry is not None else GeometryConfig()
    pairs = align_labels(outputs, labels)
    if not pairs:
        raise ValueError("no aligned observation pairs")
    true_types = np.array([int(p.true_type) for p in pairs])
    pred_types = np.array([int(p.pred_type) for p in pairs])
    correct = true_types == pred_types
    accuracy = float(correct.mean())

    counts_ok = np.array([len(p.pred_points) == len(p.true_points) for p in pairs])
    count_accuracy = float(counts_ok.mean())

    dists = [distance_error_px(p.pred_points, p.true_points)
             for p in pairs if len(p.true_points) and len(p.pred_points)]
    distance_mm = float(np.mean(dists)) / geometry.px_per_mm if dists else 0.0

    gesture_mask = true_types != int(GestureType.NO_GESTURE)
    if gesture_mask.any():
        maes = [abs(p.pred_intensity_mm - p.true_intensity_mm)
                for p, m in zip(pairs, gesture_mask) if m]
        intensity_mae = float(np.mean(maes))
        gesture_only_accuracy = float(correct[gesture_mask].mean())
    else:
        intensity_mae = 0.0
        gesture_only_accuracy = 0.0

    confusion = np.zeros((N_CLASSES, N_CLASSES))
    for t, p in zip(true_types, pred_types):
        confusion[t, p] += 1
    row_sum = confusion.sum(axis=1, keepdims=True)
    col_sum = confusion.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        row_norm = np.where(row_sum > 0, confusion / row_sum, 0.0)
        col_norm = np.where(col_sum > 0, confusion / col_sum, 0.0)
    balanced = 0.5 * (row_norm + col_norm)

    per_class: dict[str, tuple[float, float, float, int]] = {}
    for g in GestureType:
        tp = float(confusion[int(g), int(g)])
        support = int(row_sum[int(g), 0])
        pred_total = float(col_sum[0, int(g)])
        precision = tp / pred_total if pred_total > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class[g.label] = (precision, recall, f1, support)

    # Accuracy vs true intensity, gesture-labeled observations only.
    intensities = np.array([p.true_intensity_mm for p in pairs])
    gi = intensities[gesture_mask]
    gc = correct[gesture_mask]
    max_mm = float(gi.max()) if len(gi) else bin_width_mm
    n_bins = max(int(np.ceil(max_mm / bin_width_mm)), 1)
    edges = np.arange(n_bins + 1) * bin_width_mm
    bin_idx = np.minimum((gi / bin_width_mm).astype(int), n_bins - 1)
    bin_counts = np.bincount(bin_idx, minlength=n_bins).astype(float)
    bin_hits = np.bincount(bin_idx, weights=gc.astype(float), minlength=n_bins)
    with np.errstate(invalid="ignore"):
        bin_accuracy = np.where(bin_counts > 0, bin_hits / np.maximum(bin_counts, 1), 0.0)

    return EvalReport(
        n_observations=len(pairs), accuracy=accuracy,
        gesture_only_accuracy=gesture_only_accuracy,
        count_accuracy=count_accuracy, distance_error_mm=distance_mm,
        intensity_mae_mm=intensity_mae, per_class=per_class,
        confusion_balanced=balanced, bin_edges_mm=edges,
        bin_accuracy=bin_accuracy, bin_counts=bin_counts)


def export_plot_tables(report: EvalReport, bins_path=None, confusion_path=None) -> None:
    """Optional CSV tables for external plotting."""
    if bins_path is not None:
        with open(bins_path, "w") as fh:
            fh.write("bin_lo_mm,bin_hi_mm,accuracy,count\n")
            for lo, hi, acc, cnt in zip(report.bin_edges_mm[:-1], report.bin_edges_mm[1:],
                                        report.bin_accuracy, report.bin_counts):
                fh.write(f"{lo:.3f},{hi:.3f},{acc:.6f},{int(cnt)}\n")
    if confusion_path is not None:
        names = [g.label for g in GestureType]
        with open(confusion_path, "w") as fh:
            fh.write("true\\pred," + ",".join(names) + "\n")
            for i, row in enumerate(report.confusion_balanced):
                fh.write(names[i] + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
