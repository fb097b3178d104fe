"""Recording container and its bit-exact binary file format.

Layout (all little-endian):

    magic   4 bytes  "NTRC"
    u16     version (currently 1)
    u16     metadata length, followed by that many UTF-8 bytes
    f64 x6  px_per_mm, gel_radius_mm, marker_pitch_mm, marker_diameter_mm,
            image_center_x, image_center_y
    u64     marker_count
    u64 x2  frame width, frame height
    u64 x3  event count, frame count, label count
    events  packed records: u16 x, u16 y, u64 t, u8 polarity
    frames  per frame: u64 t, then width*height row-major u8 pixels
    labels  per label: u64 t, u8 gesture type, u8 point count,
            (f64 x, f64 y) per point, f64 intensity_mm
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .events import EVENT_DTYPE, Frame, GestureLabel, GestureType, empty_events
from .geometry import SENSOR_HEIGHT, SENSOR_WIDTH, GeometryConfig

MAGIC = b"NTRC"
VERSION = 1

_HEADER_GEOM = struct.Struct("<6d")
_HEADER_COUNTS = struct.Struct("<5Q")


class DecodeError(ValueError):
    """Base class for recording decode failures."""


class FormatError(DecodeError):
    """Bad magic, unsupported version, or truncated/corrupt structure."""


class TimestampOrderError(DecodeError):
    """A stream's timestamps are not monotone non-decreasing."""


class CoordinateBoundsError(DecodeError):
    """Coordinates fall outside the sensor bounds declared in the header."""


@dataclass
class Recording:
    """A captured or simulated session: events, frames, optional labels."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    events: np.ndarray = field(default_factory=empty_events)
    frames: list[Frame] = field(default_factory=list)
    labels: list[GestureLabel] = field(default_factory=list)
    metadata: str = ""

    @property
    def width(self) -> int:
        return self.frames[0].width if self.frames else SENSOR_WIDTH

    @property
    def height(self) -> int:
        return self.frames[0].height if self.frames else SENSOR_HEIGHT

    def time_span(self) -> tuple[int, int] | None:
        """(start, end) over both streams, or None when empty."""
        ts = []
        if len(self.events):
            ts.append((int(self.events["t"][0]), int(self.events["t"][-1])))
        if self.frames:
            ts.append((int(self.frames[0].t), int(self.frames[-1].t)))
        if not ts:
            return None
        return min(t0 for t0, _ in ts), max(t1 for _, t1 in ts)

    def validate(self) -> None:
        ev = self.events
        if ev.dtype != EVENT_DTYPE:
            raise ValueError(f"expected event dtype {EVENT_DTYPE}, got {ev.dtype}")
        if len(ev):
            if np.any(np.diff(ev["t"].astype(np.int64)) < 0):
                raise TimestampOrderError(
                    "event timestamps are not monotone non-decreasing")
            if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
                raise CoordinateBoundsError(
                    f"event coordinates out of {self.width}x{self.height} bounds")
            if ev["p"].max() > 1:
                raise ValueError("event polarity must be 0 or 1")
        frame_ts = [f.t for f in self.frames]
        if any(b < a for a, b in zip(frame_ts, frame_ts[1:])):
            raise TimestampOrderError("frame timestamps are not monotone non-decreasing")
        for f in self.frames:
            if f.pixels.shape != (self.height, self.width):
                raise ValueError("all frames in a recording must share one resolution")
        if self.labels:
            span = self.time_span()
            if span is None:
                raise ValueError("labels require at least one event or frame")
            lo, hi = span
            for lab in self.labels:
                if not lo <= lab.t <= hi:
                    raise ValueError(
                        f"label at t={lab.t} outside stream span [{lo}, {hi}]")


def _equal_arrays(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(a == b))


def recordings_equal(a: Recording, b: Recording) -> bool:
    """Field-by-field equality, used by round-trip tests."""
    if a.geometry != b.geometry or a.metadata != b.metadata:
        return False
    if not _equal_arrays(a.events, b.events):
        return False
    if len(a.frames) != len(b.frames) or len(a.labels) != len(b.labels):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if fa.t != fb.t or not _equal_arrays(fa.pixels, fb.pixels):
            return False
    for la, lb in zip(a.labels, b.labels):
        if (la.t != lb.t or la.gesture_type != lb.gesture_type
                or la.intensity_mm != lb.intensity_mm
                or not _equal_arrays(la.contact_points, lb.contact_points)):
            return False
    return True


def encode_recording(rec: Recording) -> bytes:
    """Serialize to the binary layout. Validates invariants first."""
    rec.validate()
    g = rec.geometry
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    meta = rec.metadata.encode("utf-8")
    if len(meta) > 0xFFFF:
        raise ValueError("metadata longer than 65535 bytes")
    buf.write(struct.pack("<H", len(meta)))
    buf.write(meta)
    buf.write(_HEADER_GEOM.pack(g.px_per_mm, g.gel_radius_mm, g.marker_pitch_mm,
                                g.marker_diameter_mm, *g.image_center))
    buf.write(struct.pack("<Q", g.marker_count))
    buf.write(_HEADER_COUNTS.pack(rec.width, rec.height,
                                  len(rec.events), len(rec.frames), len(rec.labels)))
    buf.write(np.ascontiguousarray(rec.events).tobytes())
    for f in rec.frames:
        buf.write(struct.pack("<Q", f.t))
        buf.write(np.ascontiguousarray(f.pixels).tobytes())
    for lab in rec.labels:
        pts = lab.contact_points
        buf.write(struct.pack("<QBB", lab.t, int(lab.gesture_type), len(pts)))
        buf.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
        buf.write(struct.pack("<d", lab.intensity_mm))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated recording file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))


def decode_recording(data: bytes) -> Recording:
    """Parse the binary layout, enforcing every stream invariant."""
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic: not a gel recording file")
    (version,) = struct.unpack("<H", r.take(2))
    if version != VERSION:
        raise FormatError(f"unsupported recording version {version}")
    (meta_len,) = struct.unpack("<H", r.take(2))
    metadata = r.take(meta_len).decode("utf-8")
    px_per_mm, gel_r, pitch, diam, cx, cy = r.unpack(_HEADER_GEOM)
    (marker_count,) = struct.unpack("<Q", r.take(8))
    width, height, n_events, n_frames, n_labels = r.unpack(_HEADER_COUNTS)
    try:
        geometry = GeometryConfig(px_per_mm=px_per_mm, gel_radius_mm=gel_r,
                                  marker_pitch_mm=pitch, marker_diameter_mm=diam,
                                  marker_count=int(marker_count), image_center=(cx, cy))
    except ValueError as exc:
        raise FormatError(f"invalid geometry header: {exc}") from exc

    events = np.frombuffer(r.take(n_events * EVENT_DTYPE.itemsize),
                           dtype=EVENT_DTYPE).copy()
    if len(events):
        if np.any(np.diff(events["t"].astype(np.int64)) < 0):
            raise TimestampOrderError("event timestamps are not monotone non-decreasing")
        if events["x"].max() >= width or events["y"].max() >= height:
            raise CoordinateBoundsError(
                f"event coordinates out of {width}x{height} bounds")
        if events["p"].max() > 1:
            raise FormatError("event polarity must be 0 or 1")

    frames: list[Frame] = []
    npx = width * height
    prev_t = -1
    for _ in range(n_frames):
        (t,) = struct.unpack("<Q", r.take(8))
        if t < prev_t:
            raise TimestampOrderError("frame timestamps are not monotone non-decreasing")
        prev_t = t
        pixels = np.frombuffer(r.take(npx), dtype=np.uint8).reshape(height, width).copy()
        frames.append(Frame(t=int(t), pixels=pixels))

    labels: list[GestureLabel] = []
    for _ in range(n_labels):
        t, gtype, n_pts = struct.unpack("<QBB", r.take(10))
        if gtype > max(GestureType):
            raise FormatError(f"unknown gesture type code {gtype}")
        pts = np.frombuffer(r.take(16 * n_pts), dtype="<f8").reshape(n_pts, 2).copy()
        (intensity,) = struct.unpack("<d", r.take(8))
        try:
            labels.append(GestureLabel(t=int(t), gesture_type=GestureType(gtype),
                                       contact_points=pts, intensity_mm=intensity))
        except ValueError as exc:
            raise FormatError(f"invalid label at t={t}: {exc}") from exc
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after recording payload")

    rec = Recording(geometry=geometry, events=events, frames=frames,
                    labels=labels, metadata=metadata)
    try:
        rec.validate()
    except DecodeError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return rec


def write_recording(rec: Recording, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_recording(rec))


def read_recording(path) -> Recording:
    with open(path, "rb") as fh:
        return decode_recording(fh.read())


def export_events_csv(rec: Recording, path) -> None:
    """Write one event per line as ``t,x,y,p`` for quick inspection."""
    ev = rec.events
    with open(path, "w") as fh:
        for i in range(len(ev)):
            fh.write(f"{ev['t'][i]},{ev['x'][i]},{ev['y'][i]},{ev['p'][i]}\n")
