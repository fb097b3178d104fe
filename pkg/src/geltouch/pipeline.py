"""Two-lane gesture pipeline: event batches drive tracking and gesture
inference at 100 Hz while frames drive resting detection at 25 Hz.

Offline runs are single-threaded in timestamp order and fully deterministic
(per-batch seeded RANSAC). With threaded_rest=True the frame lane runs on its
own worker and the event lane synchronizes with it at batch boundaries, which
keeps outputs identical while exercising the two-worker layout.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

from .engine import GestureEngine, GestureEstimate, TransformParams
from .events import Frame, GestureType, GESTURE_BY_LABEL
from .recording import Recording
from .resting import RestingDetector
from .tracking import BlobTracker

DEFAULT_BATCH_WINDOW_US = 10_000


class PipelineError(RuntimeError):
    """Pipeline could not start or continue (e.g. tracker init failed)."""


@dataclass
class BatchLatency:
    tracking_us: float = 0.0
    contact_us: float = 0.0
    classify_us: float = 0.0

    @property
    def total_us(self) -> float:
        return self.tracking_us + self.contact_us + self.classify_us


@dataclass
class PipelineOutput:
    t_us: int  # batch end timestamp
    estimate: GestureEstimate
    resting: bool
    latency: BatchLatency
    reset_applied: bool = False


@dataclass
class BenchReport:
    """Runtime statistics of one pipeline run."""

    n_events: int
    n_batches: int
    n_frames: int
    tracking_ms: tuple[float, float]
    contact_ms: tuple[float, float]
    classify_ms: tuple[float, float]
    total_ms: tuple[float, float]
    rest_ms: tuple[float, float]
    throughput_mev_s: float
    batches_per_s: float

    def to_text(self) -> str:
        lines = [
            f"events: {self.n_events}",
            f"batches: {self.n_batches}",
            f"frames: {self.n_frames}",
            f"tracking_ms_mean: {self.tracking_ms[0]:.4f}",
            f"tracking_ms_std: {self.tracking_ms[1]:.4f}",
            f"contact_ms_mean: {self.contact_ms[0]:.4f}",
            f"contact_ms_std: {self.contact_ms[1]:.4f}",
            f"classify_ms_mean: {self.classify_ms[0]:.4f}",
            f"classify_ms_std: {self.classify_ms[1]:.4f}",
            f"total_ms_mean: {self.total_ms[0]:.4f}",
            f"total_ms_std: {self.total_ms[1]:.4f}",
            f"rest_ms_mean: {self.rest_ms[0]:.4f}",
            f"rest_ms_std: {self.rest_ms[1]:.4f}",
            f"throughput_mev_s: {self.throughput_mev_s:.4f}",
            f"batches_per_s: {self.batches_per_s:.2f}",
        ]
        return "\n".join(lines) + "\n"


class _FrameLaneWorker:
    """Owns the resting detector on a separate thread."""

    def __init__(self, detector: RestingDetector):
        self.detector = detector
        self.in_q: queue.Queue = queue.Queue()
        self.out_q: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self.thread.start()

    def _loop(self):
        while True:
            frame = self.in_q.get()
            if frame is None:
                return
            t0 = time.perf_counter()
            resting, dist = self.detector.predict(frame)
            elapsed_ms = (time.perf_counter() - t0) * 1e3
            self.out_q.put((frame, resting, dist, elapsed_ms))

    def stop(self):
        self.in_q.put(None)
        self.thread.join()


class GesturePipeline:
    """Batch-window orchestration of tracker, gesture engine, rest detector."""

    def __init__(self, tracker: BlobTracker | None = None,
                 engine: GestureEngine | None = None,
                 rest_detector: RestingDetector | None = None,
                 batch_window_us: int = DEFAULT_BATCH_WINDOW_US,
                 reset_staleness_batches: int = 2,
                 seed: int = 0, threaded_rest: bool = False):
        if batch_window_us <= 0:
            raise ValueError("batch window must be positive")
        self.tracker = tracker if tracker is not None else BlobTracker()
        self.engine = engine if engine is not None else GestureEngine()
        self.rest_detector = rest_detector if rest_detector is not None else RestingDetector()
        self.batch_window_us = int(batch_window_us)
        self.reset_staleness_batches = int(reset_staleness_batches)
        self.seed = int(seed)
        self.threaded_rest = threaded_rest
        self.rest_latencies_ms: list[float] = []

    def run(self, recording: Recording):
        """Process a recording; yields one PipelineOutput per batch window."""
        events = recording.events
        frames = recording.frames
        if len(events) == 0 and not frames:
            return
        if not frames:
            raise PipelineError("recording has no frames; cannot initialize the tracker")
        try:
            self.tracker.fit(frames[0])
        except Exception as exc:
            raise PipelineError(f"tracker initialization failed: {exc}") from exc
        self.rest_detector.fit(frames[0])
        self.rest_latencies_ms = []

        window = self.batch_window_us
        ev_t = events["t"]  # unsigned view, no copy
        # Events before the initialization frame predate any tracker state.
        pre_init = int(np.searchsorted(ev_t, np.uint64(frames[0].t), side="left"))
        events = events[pre_init:]
        ev_t = events["t"]
        frame_ts = np.array([f.t for f in frames], dtype=np.int64)
        t_start = int(min(frame_ts[0], int(ev_t[0]))) if len(ev_t) else int(frame_ts[0])
        t_end = int(max(frame_ts[-1], int(ev_t[-1]))) if len(ev_t) else int(frame_ts[-1])
        n_batches = (t_end - t_start) // window + 1
        boundaries = t_start + window * np.arange(1, n_batches + 1, dtype=np.int64)
        ev_split = np.searchsorted(ev_t, boundaries.astype(np.uint64), side="left")
        frame_split = np.searchsorted(frame_ts, boundaries, side="left")

        worker = _FrameLaneWorker(self.rest_detector) if self.threaded_rest else None
        pending_rest: tuple[Frame, bool] | None = None
        last_verdict_resting = True
        last_reset_frame_t = frames[0].t
        frames_sent = 1  # the init frame needs no verdict
        frames_received = 1
        ev_lo = 0
        frame_lo = 1

        try:
            for k in range(n_batches):
                batch_end = int(boundaries[k])
                # Frame lane: route every frame due in this window.
                for fi in range(frame_lo, int(frame_split[k])):
                    frame = frames[fi]
                    if worker is not None:
                        worker.in_q.put(frame)
                        frames_sent += 1
                    else:
                        t0 = time.perf_counter()
                        resting, _dist = self.rest_detector.predict(frame)
                        self.rest_latencies_ms.append((time.perf_counter() - t0) * 1e3)
                        last_verdict_resting = resting
                        if resting:
                            pending_rest = (frame, resting)
                frame_lo = int(frame_split[k])
                if worker is not None:
                    while frames_received < frames_sent:
                        frame, resting, _dist, ms = worker.out_q.get()
                        frames_received += 1
                        self.rest_latencies_ms.append(ms)
                        last_verdict_resting = resting
                        if resting:
                            pending_rest = (frame, resting)

                # Event lane: consume this window's slice.
                ev_hi = int(ev_split[k])
                lat = BatchLatency()
                if ev_hi > ev_lo:
                    t0 = time.perf_counter()
                    self.tracker.partial_fit(events[ev_lo:ev_hi])
                    lat.tracking_us = (time.perf_counter() - t0) * 1e6
                ev_lo = ev_hi

                reset_applied = False
                if pending_rest is not None:
                    frame = pending_rest[0]
                    if frame.t < batch_end - self.reset_staleness_batches * window:
                        pending_rest = None  # stale verdict, ignore
                    elif frame.t != last_reset_frame_t:
                        try:
                            self.tracker.reset(frame)
                            reset_applied = True
                            last_reset_frame_t = frame.t
                        except Exception:
                            pass  # bad extraction; keep tracking, retry next verdict
                        pending_rest = None
                    else:
                        pending_rest = None

                if reset_applied:
                    estimate = GestureEstimate(gesture_type=GestureType.NO_GESTURE)
                else:
                    t0 = time.perf_counter()
                    detection = self.engine.detect_contact_points(
                        self.tracker.anchors_, self.tracker.positions_,
                        seed=self.seed + k)
                    t1 = time.perf_counter()
                    estimate = self.engine.estimate_from_detection(
                        self.tracker.anchors_, self.tracker.positions_, detection,
                        seed=self.seed + k)
                    t2 = time.perf_counter()
                    lat.contact_us = (t1 - t0) * 1e6
                    lat.classify_us = (t2 - t1) * 1e6
                self.tracker.reset_health_window()
                yield PipelineOutput(t_us=batch_end, estimate=estimate,
                                     resting=last_verdict_resting, latency=lat,
                                     reset_applied=reset_applied)
        finally:
            if worker is not None:
                worker.stop()


def bench(recording: Recording, pipeline: GesturePipeline | None = None) -> BenchReport:
    """Run the pipeline over a recording and report per-stage runtimes."""
    pipe = pipeline if pipeline is not None else GesturePipeline()
    track, contact, classify, total = [], [], [], []
    n = 0
    wall0 = time.perf_counter()
    for out in pipe.run(recording):
        n += 1
        track.append(out.latency.tracking_us / 1e3)
        contact.append(out.latency.contact_us / 1e3)
        classify.append(out.latency.classify_us / 1e3)
        total.append(out.latency.total_us / 1e3)
    wall = time.perf_counter() - wall0

    def stats(xs):
        if not xs:
            return (0.0, 0.0)
        arr = np.asarray(xs)
        return float(arr.mean()), float(arr.std())

    rest = pipe.rest_latencies_ms
    tracking_s = sum(track) / 1e3
    return BenchReport(
        n_events=len(recording.events), n_batches=n, n_frames=len(recording.frames),
        tracking_ms=stats(track), contact_ms=stats(contact),
        classify_ms=stats(classify), total_ms=stats(total), rest_ms=stats(rest),
        throughput_mev_s=(len(recording.events) / tracking_s / 1e6) if tracking_s > 0 else 0.0,
        batches_per_s=n / wall if wall > 0 else 0.0)


# ---------------------------------------------------------------------------
# Output records


def format_output(out: PipelineOutput) -> str:
    est = out.estimate
    pts = ";".join(f"{p[0]:.4f}:{p[1]:.4f}" for p in est.contact_points)
    parts = [
        f"t={out.t_us}",
        f"type={est.gesture_type.label}",
        f"points={pts}",
        f"intensity_mm={est.intensity_mm:.6f}",
    ]
    if est.transform is not None:
        tr = est.transform
        parts.append(f"s={tr.s:.9g}")
        parts.append(f"theta={tr.theta:.9g}")
        parts.append(f"tx={tr.t[0]:.9g}")
        parts.append(f"ty={tr.t[1]:.9g}")
    parts.append(f"outliers={est.outlier_count}")
    parts.append(f"resting={1 if out.resting else 0}")
    parts.append(f"reset={1 if out.reset_applied else 0}")
    parts.append(f"lat_track_us={out.latency.tracking_us:.1f}")
    parts.append(f"lat_contact_us={out.latency.contact_us:.1f}")
    parts.append(f"lat_classify_us={out.latency.classify_us:.1f}")
    return " ".join(parts)


def parse_output(line: str) -> PipelineOutput:
    kv = {}
    for token in line.strip().split(" "):
        key, _, value = token.partition("=")
        kv[key] = value
    pts = np.array([[float(c) for c in p.split(":")]
                    for p in kv["points"].split(";") if p], dtype=np.float64).reshape(-1, 2)
    transform = None
    if "s" in kv:
        transform = TransformParams(s=float(kv["s"]), theta=float(kv["theta"]),
                                    t=(float(kv["tx"]), float(kv["ty"])))
    est = GestureEstimate(gesture_type=GESTURE_BY_LABEL[kv["type"]],
                          contact_points=pts,
                          intensity_mm=float(kv["intensity_mm"]),
                          transform=transform,
                          outlier_count=int(kv.get("outliers", 0)))
    lat = BatchLatency(tracking_us=float(kv.get("lat_track_us", 0)),
                       contact_us=float(kv.get("lat_contact_us", 0)),
                       classify_us=float(kv.get("lat_classify_us", 0)))
    return PipelineOutput(t_us=int(kv["t"]), estimate=est,
                          resting=kv.get("resting", "0") == "1", latency=lat,
                          reset_applied=kv.get("reset", "0") == "1")


def write_outputs(outputs, path) -> None:
    with open(path, "w") as fh:
        for out in outputs:
            fh.write(format_output(out) + "\n")


def read_outputs(path) -> list[PipelineOutput]:
    with open(path) as fh:
        return [parse_output(line) for line in fh if line.strip()]
