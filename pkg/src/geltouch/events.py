"""Primitive stream types: events, frames, gesture labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import SENSOR_HEIGHT, SENSOR_WIDTH

# Packed event record, identical to the on-disk layout (13 bytes, little-endian).
EVENT_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<u8"), ("p", "u1")])

POLARITY_POSITIVE = 1
POLARITY_NEGATIVE = 0


class GestureType(IntEnum):
    NO_GESTURE = 0
    PUSH = 1
    PINCH = 2
    ZOOM = 3
    TWIST_CW = 4
    TWIST_CCW = 5

    @property
    def label(self) -> str:
        return _GESTURE_LABELS[self]


_GESTURE_LABELS = {
    GestureType.NO_GESTURE: "NoGesture",
    GestureType.PUSH: "Push",
    GestureType.PINCH: "Pinch",
    GestureType.ZOOM: "Zoom",
    GestureType.TWIST_CW: "TwistCW",
    GestureType.TWIST_CCW: "TwistCCW",
}

GESTURE_BY_LABEL = {v: k for k, v in _GESTURE_LABELS.items()}


def empty_events() -> np.ndarray:
    return np.empty(0, dtype=EVENT_DTYPE)


def make_events(x, y, t, p) -> np.ndarray:
    """Assemble a structured event array from parallel coordinate arrays."""
    x = np.asarray(x)
    ev = np.empty(len(x), dtype=EVENT_DTYPE)
    ev["x"] = x
    ev["y"] = y
    ev["t"] = t
    ev["p"] = p
    return ev


def validate_events(events: np.ndarray, width: int = SENSOR_WIDTH,
                    height: int = SENSOR_HEIGHT) -> None:
    """Check stream invariants: sorted timestamps, in-bounds coordinates.

    Raises ValueError on the first violation; never clamps.
    """
    if events.dtype != EVENT_DTYPE:
        raise ValueError(f"expected event dtype {EVENT_DTYPE}, got {events.dtype}")
    if len(events) == 0:
        return
    if np.any(np.diff(events["t"].astype(np.int64)) < 0):
        raise ValueError("event timestamps are not monotone non-decreasing")
    if events["x"].max() >= width or events["y"].max() >= height:
        raise ValueError(f"event coordinates out of {width}x{height} sensor bounds")
    if events["p"].max() > 1:
        raise ValueError("event polarity must be 0 or 1")


@dataclass
class Frame:
    """One grayscale camera frame (8-bit, row-major pixels[y, x])."""

    t: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError("frame pixels must be a 2-D array")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class GestureLabel:
    """Ground-truth annotation at one timestamp."""

    t: int
    gesture_type: GestureType
    contact_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    intensity_mm: float = 0.0

    def __post_init__(self) -> None:
        self.gesture_type = GestureType(self.gesture_type)
        self.contact_points = np.asarray(self.contact_points, dtype=np.float64).reshape(-1, 2)
        if self.intensity_mm < 0:
            raise ValueError("intensity_mm must be non-negative")
        if len(self.contact_points) > 3:
            raise ValueError("at most 3 contact points per label")
        if self.gesture_type == GestureType.NO_GESTURE:
            if len(self.contact_points) != 0 or self.intensity_mm != 0.0:
                raise ValueError("NoGesture labels carry no contact points and zero intensity")
