"""Interactive demo server: virtual fingers in, live detections out.

Each websocket session owns an independent simulator + pipeline. The session
clock is driven entirely by client timestamps (finger moves and idle ticks),
so a replayed input trace reproduces the exact same detection sequence. Gel
deformation follows finger drag deltas through the simulator's Gaussian
kernel; released fingers relax over a short fade.

Wire protocol (text lines over the websocket; the websocket provides the
length-prefixed framing):

  client -> server
    hello version=1
    finger t_ms=<float> id=<0..2> x=<[-1,1]> y=<[-1,1]> pressed=<0|1>
    tick t_ms=<float>
    bye
  server -> client
    hello version=1 width=.. height=.. radius_px=.. markers=.. window_us=..
    detect t=<us> type=<label> points=x:y;.. intensity_mm=.. s=.. theta=..
           tx=.. ty=.. outliers=.. resting=<0|1> events_pos=.. events_neg=..
           [markers=x:y;..]
    error msg=...

Coordinates on the wire are normalized gel coordinates: x right, y up,
unit = gel radius, origin at the gel center. A positive rotation (theta) is
counter-clockwise on screen.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import GestureEngine, GestureEstimate, _fit_similarity
from .events import Frame, GestureType, make_events
from .geometry import GeometryConfig
from .recording import Recording, write_recording
from .resting import RestingDetector
from .simulator import FRAME_PERIOD_US, EventSynthesizer, GelScene, _finger_kernel
from .tracking import BlobTracker

PROTOCOL_VERSION = 1
RELEASE_FADE_US = 150_000
IDLE_SKIP_US = 1_500_000
MARKER_PUSH_EVERY = 3
MAX_FINGERS = 3


class ProtocolError(ValueError):
    """Malformed or out-of-order client message; the session must close."""


def _parse_line(line: str) -> tuple[str, dict[str, str]]:
    parts = line.strip().split(" ")
    kind = parts[0]
    kv: dict[str, str] = {}
    for token in parts[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ProtocolError(f"bad token {token!r}")
        kv[key] = value
    return kind, kv


@dataclass
class _Finger:
    anchor_px: np.ndarray  # where this grip episode stuck to the gel
    pos_px: np.ndarray
    prev_px: np.ndarray
    seg_t0: int
    seg_t1: int

    def at(self, t_us: int) -> np.ndarray:
        if t_us >= self.seg_t1 or self.seg_t1 <= self.seg_t0:
            return self.pos_px
        w = (t_us - self.seg_t0) / (self.seg_t1 - self.seg_t0)
        return self.prev_px + w * (self.pos_px - self.prev_px)


@dataclass
class _Fade:
    """A frozen displacement field relaxing to zero after a grip change."""

    field: np.ndarray
    t0: int

    def weight(self, t_us: int) -> float:
        u = (t_us - self.t0) / RELEASE_FADE_US
        if u >= 1.0:
            return 0.0
        return 0.5 * (1 + np.cos(np.pi * u))


class LiveSession:
    """One client's gel: synthesizes streams from finger input and runs the
    pipeline incrementally with the same batching as the offline runner."""

    def __init__(self, scene: GelScene | None = None,
                 tracker: BlobTracker | None = None,
                 engine: GestureEngine | None = None,
                 rest_detector: RestingDetector | None = None,
                 batch_window_us: int = 10_000,
                 reset_staleness_batches: int = 2,
                 seed: int = 0,
                 finger_sigma_px: float = 12.0,
                 keep_recording: bool = False):
        self.scene = scene if scene is not None else GelScene()
        self.geometry = self.scene.geometry
        self.tracker = tracker if tracker is not None else BlobTracker()
        self.engine = engine if engine is not None else GestureEngine()
        self.rest = rest_detector if rest_detector is not None else RestingDetector()
        self.window = int(batch_window_us)
        self.staleness = int(reset_staleness_batches)
        self.seed = int(seed)
        self.sigma0 = float(finger_sigma_px)
        self.keep_recording = keep_recording

        self.synth = EventSynthesizer(self.scene, seed=self.seed)
        frame0 = self.synth.frame(0)
        self.tracker.fit(frame0)
        self.rest.fit(frame0)
        self.fingers: dict[int, _Finger] = {}
        self.fades: list[_Fade] = []
        self.t_us = 0
        self.batch_index = 0
        self.next_batch_end = self.window
        self.next_frame_t = FRAME_PERIOD_US
        self.pending_rest: Frame | None = None
        self.last_verdict_resting = True
        self.last_reset_frame_t = 0
        self._ev_buffer: list[np.ndarray] = []
        self._frames = [frame0] if keep_recording else []
        self._all_events: list[np.ndarray] = [] if keep_recording else []

    # -- coordinates ------------------------------------------------------

    def _norm_to_px(self, gx: float, gy: float) -> np.ndarray:
        cx, cy = self.geometry.image_center
        r = self.geometry.gel_radius_px
        return np.array([cx + gx * r, cy - gy * r])

    def _px_to_norm(self, p) -> tuple[float, float]:
        cx, cy = self.geometry.image_center
        r = self.geometry.gel_radius_px
        return ((p[0] - cx) / r, (cy - p[1]) / r)

    # -- deformation ------------------------------------------------------

    def _field_at(self, t_us: int) -> np.ndarray:
        """Gel displacement: the grip's rigid similarity motion, kernel
        attenuated, plus any relaxing fields from earlier grips."""
        rest_pos = self.scene.marker_positions
        out = np.zeros_like(rest_pos)
        if self.fingers:
            anchors = np.array([f.anchor_px for f in self.fingers.values()])
            currents = np.array([f.at(t_us) for f in self.fingers.values()])
            out += self._grip_field(anchors, currents)
        for fade in self.fades:
            w = fade.weight(t_us)
            if w > 0:
                out += w * fade.field
        return out

    def _grip_field(self, anchors: np.ndarray, currents: np.ndarray) -> np.ndarray:
        rest_pos = self.scene.marker_positions
        deltas = currents - anchors
        if len(anchors) == 1 or np.allclose(anchors, anchors[0]):
            offsets = np.broadcast_to(deltas.mean(axis=0), rest_pos.shape).copy()
        else:
            params = _fit_similarity(anchors, currents)
            if params is None:
                offsets = np.broadcast_to(deltas.mean(axis=0), rest_pos.shape).copy()
            else:
                s, theta, t = params
                rot = s * np.array([[np.cos(theta), -np.sin(theta)],
                                    [np.sin(theta), np.cos(theta)]])
                offsets = rest_pos @ rot.T + np.asarray(t) - rest_pos
        amps = np.linalg.norm(deltas, axis=1)
        all_w = np.column_stack(
            [_finger_kernel(((rest_pos - a) ** 2).sum(axis=1), float(amp), self.sigma0)
             for a, amp in zip(anchors, amps)])
        owner = np.argmax(all_w, axis=1)
        w = np.take_along_axis(all_w, owner[:, None], axis=1)[:, 0]
        # Nothing moves farther than the finger dragging it.
        bound = amps[owner]
        mag = np.linalg.norm(offsets, axis=1)
        excess = np.maximum(mag / np.maximum(bound, 1e-12) - 1.0, 0.0)
        target = bound * np.exp(-0.7 * excess)
        scale = np.where(mag > bound, target / np.maximum(mag, 1e-12), 1.0)
        return (w * scale)[:, None] * offsets

    def _rebase_grip(self, t_us: int) -> None:
        """Freeze the current field into a fade and restart the grip from
        the fingers' present positions. Called whenever the pressed set
        changes, keeping the total field continuous."""
        field = self._field_at(t_us)
        if np.abs(field).max() > 1e-9:
            self.fades.append(_Fade(field=field, t0=t_us))
        for f in self.fingers.values():
            now = f.at(t_us).copy()
            f.anchor_px = now
            f.prev_px = now
            f.pos_px = now
            f.seg_t0 = t_us
            f.seg_t1 = t_us

    # -- message handling ---------------------------------------------------

    def handle(self, line: str) -> list[str]:
        """Apply one client message; returns outbound lines."""
        kind, kv = _parse_line(line)
        if kind == "tick":
            return self._advance(self._t_from(kv))
        if kind == "finger":
            t_target = self._t_from(kv)
            try:
                fid = int(kv["id"])
                gx = float(kv["x"])
                gy = float(kv["y"])
                pressed = kv["pressed"] == "1"
            except (KeyError, ValueError) as exc:
                raise ProtocolError(f"bad finger message: {exc}") from exc
            if not 0 <= fid < MAX_FINGERS:
                raise ProtocolError(f"finger id {fid} out of range")
            if pressed and gx * gx + gy * gy > 1.0 + 1e-6:
                raise ProtocolError("pressed finger outside the gel disk")
            if pressed:
                # Install the motion segment first so the advance interpolates
                # the finger from its previous position to this sample.
                self._press_or_move(fid, gx, gy, t_target)
                return self._advance(t_target)
            out = self._advance(t_target)
            self._release(fid, t_target)
            return out
        if kind == "bye":
            return []
        raise ProtocolError(f"unknown message kind {kind!r}")

    def _t_from(self, kv: dict[str, str]) -> int:
        try:
            t_us = int(float(kv["t_ms"]) * 1000.0)
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"bad timestamp: {exc}") from exc
        if t_us < self.t_us:
            raise ProtocolError(f"timestamp {t_us} runs backwards (now {self.t_us})")
        return t_us

    def _press_or_move(self, fid: int, gx: float, gy: float, t_us: int) -> None:
        pos = self._norm_to_px(gx, gy)
        cur = self.fingers.get(fid)
        if cur is None:
            if len(self.fingers) >= MAX_FINGERS:
                raise ProtocolError("too many concurrent fingers")
            self._rebase_grip(self.t_us)
            self.fingers[fid] = _Finger(anchor_px=pos.copy(), pos_px=pos.copy(),
                                        prev_px=pos.copy(), seg_t0=t_us, seg_t1=t_us)
        else:
            cur.prev_px = cur.at(self.t_us).copy()
            cur.pos_px = pos
            cur.seg_t0 = self.t_us
            cur.seg_t1 = t_us

    def _release(self, fid: int, t_us: int) -> None:
        if fid not in self.fingers:
            return
        self._rebase_grip(t_us)
        del self.fingers[fid]

    # -- simulation ---------------------------------------------------------

    def _is_static(self) -> bool:
        return not self.fingers and all(f.weight(self.t_us) == 0.0 for f in self.fades)

    def _advance(self, t_target: int) -> list[str]:
        out: list[str] = []
        if t_target <= self.t_us:
            return out
        # Long idle gaps while at rest are skipped, not simulated.
        if self._is_static() and t_target - self.t_us > IDLE_SKIP_US:
            skip_to = ((t_target - self.window) // self.window) * self.window
            if skip_to > self.t_us:
                self.fades.clear()
                self.synth.skip_to(skip_to)
                self.t_us = skip_to
                self.batch_index = skip_to // self.window
                self.next_batch_end = skip_to + self.window
                self.next_frame_t = ((skip_to // FRAME_PERIOD_US) + 1) * FRAME_PERIOD_US
        while self.t_us < t_target:
            seg_end = min(self.next_batch_end, self.next_frame_t, t_target)
            self._simulate_to(seg_end)
            if self.t_us == self.next_batch_end:
                out.append(self._finish_batch())
                self.next_batch_end += self.window
            if self.t_us == self.next_frame_t:
                frame = self.synth.frame(self.t_us)
                if self.keep_recording:
                    self._frames.append(frame)
                resting, _dist = self.rest.predict(frame)
                self.last_verdict_resting = resting
                if resting:
                    self.pending_rest = frame
                self.next_frame_t += FRAME_PERIOD_US
        return out

    def _simulate_to(self, t_end: int) -> None:
        if t_end <= self.t_us:
            return
        sub = self.scene.substep_us
        first = (self.t_us // sub + 1) * sub
        times = np.arange(first, t_end + 1, sub, dtype=np.int64)
        if len(times) == 0 or times[-1] != t_end:
            times = np.append(times, t_end)
        pos_seq = np.empty((len(times), self.scene.n_markers, 2))
        for i, t in enumerate(times):
            pos_seq[i] = self.scene.marker_positions + self._field_at(int(t))
        events = self.synth.advance(pos_seq, times)
        self.fades = [f for f in self.fades if f.weight(t_end) > 0.0]
        if len(events):
            self._ev_buffer.append(events)
            if self.keep_recording:
                self._all_events.append(events)
        self.t_us = t_end

    def _finish_batch(self) -> str:
        batch_end = self.next_batch_end
        buffered = (np.concatenate(self._ev_buffer) if self._ev_buffer
                    else make_events([], [], [], []))
        # The offline runner puts events at exactly the boundary into the
        # next batch; match it so replays reproduce offline runs.
        cut = int(np.searchsorted(buffered["t"], np.uint64(batch_end), side="left"))
        events, leftover = buffered[:cut], buffered[cut:]
        self._ev_buffer = [leftover] if len(leftover) else []
        if len(events):
            self.tracker.partial_fit(events)
        reset_applied = False
        if self.pending_rest is not None:
            frame = self.pending_rest
            if frame.t < batch_end - self.staleness * self.window:
                self.pending_rest = None
            elif frame.t != self.last_reset_frame_t:
                try:
                    self.tracker.reset(frame)
                    reset_applied = True
                    self.last_reset_frame_t = frame.t
                except Exception:
                    pass
                self.pending_rest = None
            else:
                self.pending_rest = None

        if reset_applied:
            estimate = GestureEstimate(gesture_type=GestureType.NO_GESTURE)
        else:
            seed = self.seed + self.batch_index
            detection = self.engine.detect_contact_points(
                self.tracker.anchors_, self.tracker.positions_, seed=seed)
            estimate = self.engine.estimate_from_detection(
                self.tracker.anchors_, self.tracker.positions_, detection, seed=seed)
        self.tracker.reset_health_window()
        n_pos = int((events["p"] == 1).sum()) if len(events) else 0
        n_neg = len(events) - n_pos
        msg = self._format_push(batch_end, estimate, n_pos, n_neg,
                                include_markers=self.batch_index % MARKER_PUSH_EVERY == 0)
        self.batch_index += 1
        return msg

    def _format_push(self, t_us: int, est: GestureEstimate, n_pos: int, n_neg: int,
                     include_markers: bool) -> str:
        pts = ";".join("{:.4f}:{:.4f}".format(*self._px_to_norm(p))
                       for p in est.contact_points)
        r = self.geometry.gel_radius_px
        parts = [f"detect t={t_us}",
                 f"type={est.gesture_type.label}",
                 f"points={pts}",
                 f"intensity_mm={est.intensity_mm:.4f}"]
        if est.transform is not None:
            tr = est.transform
            parts.append(f"s={tr.s:.6f}")
            parts.append(f"theta={tr.theta:.6f}")
            parts.append(f"tx={tr.t[0] / r:.6f}")
            parts.append(f"ty={tr.t[1] / r:.6f}")
        parts.append(f"outliers={est.outlier_count}")
        parts.append(f"resting={1 if self.last_verdict_resting else 0}")
        parts.append(f"events_pos={n_pos}")
        parts.append(f"events_neg={n_neg}")
        if include_markers:
            snap = ";".join("{:.4f}:{:.4f}".format(*self._px_to_norm(p))
                            for p in self.tracker.positions_)
            parts.append(f"markers={snap}")
        return " ".join(parts)

    # -- export -------------------------------------------------------------

    def recording(self) -> Recording:
        """The streams synthesized so far, as an offline-runnable recording."""
        if not self.keep_recording:
            raise RuntimeError("session was created with keep_recording=False")
        events = (np.concatenate(self._all_events) if self._all_events
                  else make_events([], [], [], []))
        return Recording(geometry=self.geometry, events=events,
                         frames=list(self._frames), metadata="demo session")

    def hello_line(self) -> str:
        g = self.geometry
        return (f"hello version={PROTOCOL_VERSION} width=346 height=260"
                f" center_x={g.image_center[0]} center_y={g.image_center[1]}"
                f" radius_px={g.gel_radius_px} markers={self.scene.n_markers}"
                f" window_us={self.window}")


def replay_trace(lines, session: LiveSession | None = None) -> tuple[list[str], LiveSession]:
    """Feed recorded input lines through a fresh session; returns the pushes."""
    sess = session if session is not None else LiveSession(keep_recording=True)
    pushes: list[str] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("hello"):
            continue
        pushes.extend(sess.handle(line))
        if line.startswith("bye"):
            break
    return pushes, sess


def parse_push(line: str) -> dict:
    """Parse a detect line into plain values (normalized coordinates)."""
    kind, kv = _parse_line(line)
    if kind != "detect":
        raise ValueError(f"not a detect line: {line[:40]}")
    points = [tuple(float(v) for v in p.split(":"))
              for p in kv["points"].split(";") if p]
    out = {
        "t": int(kv["t"]), "type": kv["type"], "points": points,
        "intensity_mm": float(kv["intensity_mm"]),
        "resting": kv["resting"] == "1",
        "events_pos": int(kv["events_pos"]), "events_neg": int(kv["events_neg"]),
    }
    if "s" in kv:
        out["s"] = float(kv["s"])
        out["theta"] = float(kv["theta"])
        out["t_vec"] = (float(kv["tx"]), float(kv["ty"]))
    if "markers" in kv:
        out["markers"] = [tuple(float(v) for v in p.split(":"))
                          for p in kv["markers"].split(";") if p]
    return out


# ---------------------------------------------------------------------------
# FastAPI wiring


def create_app(pipeline_cfg: dict | None = None, record_dir: str | None = None,
               static_dir: str | None = None):
    """Build the FastAPI app serving /ws plus optional static frontend files."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    from .config import PIPELINE_DEFAULTS, geometry_from_config, pipeline_from_config

    cfg = dict(PIPELINE_DEFAULTS)
    if pipeline_cfg:
        cfg.update(pipeline_cfg)
    app = FastAPI(title="geltouch demo")

    def make_session() -> LiveSession:
        pipe = pipeline_from_config(cfg)
        scene = GelScene(geometry=geometry_from_config(cfg))
        return LiveSession(scene=scene, tracker=pipe.tracker, engine=pipe.engine,
                           rest_detector=pipe.rest_detector,
                           batch_window_us=pipe.batch_window_us,
                           reset_staleness_batches=pipe.reset_staleness_batches,
                           seed=pipe.seed,
                           keep_recording=record_dir is not None)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session: LiveSession | None = None
        try:
            first = await websocket.receive_text()
            kind, kv = _parse_line(first)
            if kind != "hello" or kv.get("version") != str(PROTOCOL_VERSION):
                await websocket.send_text("error msg=expected hello version=1")
                await websocket.close(code=1002)
                return
            session = make_session()
            await websocket.send_text(session.hello_line())
            while True:
                line = await websocket.receive_text()
                for push in session.handle(line):
                    await websocket.send_text(push)
                if line.strip().startswith("bye"):
                    await websocket.close()
                    return
        except WebSocketDisconnect:
            pass
        except ProtocolError as exc:
            try:
                await websocket.send_text(f"error msg={exc}")
                await websocket.close(code=1002)
            except RuntimeError:
                pass
        finally:
            if session is not None and record_dir is not None:
                os.makedirs(record_dir, exist_ok=True)
                name = f"session-{int(time.time() * 1000)}.ntrc"
                write_recording(session.recording(), os.path.join(record_dir, name))

    if static_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        static_dir = candidate if os.path.isdir(candidate) else None
    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def serve(pipeline_cfg: dict | None = None, host: str = "127.0.0.1",
          port: int = 8765, record_dir: str | None = None) -> None:
    """Run the demo server until interrupted."""
    import uvicorn

    app = create_app(pipeline_cfg, record_dir=record_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
