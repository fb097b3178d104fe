"""Sensor geometry: gel disk, marker grid, and mm/px unit conversions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Fixed sensor resolution of the combined frame/event camera.
SENSOR_WIDTH = 346
SENSOR_HEIGHT = 260


@dataclass(frozen=True)
class GeometryConfig:
    """Physical layout of the gel as seen by the camera.

    The default scale of 2.5 px/mm maps the 30 mm gel radius to 75 px,
    comfortably inside the 346x260 sensor.
    """

    px_per_mm: float = 2.5
    gel_radius_mm: float = 30.0
    marker_pitch_mm: float = 4.0
    marker_diameter_mm: float = 1.0
    marker_count: int = 177
    image_center: tuple[float, float] = (SENSOR_WIDTH / 2.0, SENSOR_HEIGHT / 2.0)

    def __post_init__(self) -> None:
        if self.px_per_mm <= 0:
            raise ValueError(f"px_per_mm must be positive, got {self.px_per_mm}")
        radius_px = self.gel_radius_mm * self.px_per_mm
        cx, cy = self.image_center
        if (cx - radius_px < 0 or cx + radius_px > SENSOR_WIDTH
                or cy - radius_px < 0 or cy + radius_px > SENSOR_HEIGHT):
            raise ValueError(
                f"gel disk (radius {radius_px} px at {self.image_center}) does not fit "
                f"inside the {SENSOR_WIDTH}x{SENSOR_HEIGHT} sensor")

    @property
    def gel_radius_px(self) -> float:
        return self.gel_radius_mm * self.px_per_mm

    @property
    def marker_pitch_px(self) -> float:
        return self.marker_pitch_mm * self.px_per_mm

    @property
    def marker_radius_px(self) -> float:
        return self.marker_diameter_mm * self.px_per_mm / 2.0


def mm_to_px(d_mm, geometry: GeometryConfig):
    """Convert a length in millimeters to pixels."""
    return d_mm * geometry.px_per_mm


def px_to_mm(d_px, geometry: GeometryConfig):
    """Convert a length in pixels to millimeters. Inverse of :func:`mm_to_px`."""
    return d_px / geometry.px_per_mm


def marker_grid(geometry: GeometryConfig) -> np.ndarray:
    """Resting marker positions: a square grid clipped to the gel disk.

    Grid nodes sit at integer multiples of the marker pitch around the image
    center; nodes whose distance from the center exceeds the gel radius are
    dropped. With the default geometry this yields exactly 177 markers.
    Returned as an (N, 2) float array of (x, y) pixel positions, ordered
    row-major (by y, then x) so marker ids are stable.
    """
    pitch = geometry.marker_pitch_px
    radius = geometry.gel_radius_px
    cx, cy = geometry.image_center
    half = int(np.floor(radius / pitch))
    ii, jj = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1))
    xx = ii.ravel() * pitch
    yy = jj.ravel() * pitch
    keep = xx * xx + yy * yy <= radius * radius
    pts = np.column_stack([cx + xx[keep], cy + yy[keep]])
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    return np.ascontiguousarray(pts[order])
