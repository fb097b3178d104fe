"""Resting-position detection from frames via the Chamfer distance.

The current frame's marker pixels are compared against a reference set from
the launch frame. The symmetric sum of squared nearest-neighbor distances,
normalized by the total point count, stays near zero while the gel is at
rest and rises steeply under deformation; a static threshold decides.

Squared Euclidean distance transforms use the exact two-pass parabolic
lower-envelope method, so values match a brute-force oracle bit for bit on
integer grids.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .events import Frame
from .geometry import SENSOR_HEIGHT, SENSOR_WIDTH

_INF = 1e18


class EmptyPointSetError(ValueError):
    """Chamfer distance is undefined for an empty point set."""


def marker_pixels(frame: Frame, binarize_threshold: int) -> np.ndarray:
    """(x, y) coordinates of all pixels at or above the threshold."""
    ys, xs = np.nonzero(frame.pixels >= binarize_threshold)
    return np.column_stack([xs, ys]).astype(np.int64)


@njit(cache=True)
def _edt_1d(f, d, v, z):
    """Exact 1-D squared-distance lower envelope (parabola method)."""
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -_INF
    z[1] = _INF
    for q in range(1, n):
        if f[q] >= _INF and f[v[k]] >= _INF:
            continue
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit(cache=True)
def _sq_edt(grid):
    """Exact squared Euclidean distance transform of a boolean grid."""
    height, width = grid.shape
    out = np.empty((height, width), dtype=np.float64)
    for y in range(height):
        for x in range(width):
            out[y, x] = 0.0 if grid[y, x] else _INF
    size = max(height, width)
    f = np.empty(size, dtype=np.float64)
    d = np.empty(size, dtype=np.float64)
    v = np.empty(size, dtype=np.int64)
    z = np.empty(size + 1, dtype=np.float64)
    for x in range(width):
        for y in range(height):
            f[y] = out[y, x]
        _edt_1d(f[:height], d[:height], v[:height], z[:height + 1])
        for y in range(height):
            out[y, x] = d[y]
    for y in range(height):
        for x in range(width):
            f[x] = out[y, x]
        _edt_1d(f[:width], d[:width], v[:width], z[:width + 1])
        for x in range(width):
            out[y, x] = d[x]
    return out


def _point_grid(points: np.ndarray, width: int, height: int) -> np.ndarray:
    grid = np.zeros((height, width), dtype=np.bool_)
    if np.any((points[:, 0] < 0) | (points[:, 0] >= width)
              | (points[:, 1] < 0) | (points[:, 1] >= height)):
        raise ValueError(f"points outside the {width}x{height} grid")
    grid[points[:, 1], points[:, 0]] = True
    return grid


def squared_edt(points: np.ndarray, width: int = SENSOR_WIDTH,
                height: int = SENSOR_HEIGHT) -> np.ndarray:
    """Grid of squared distances to the nearest point of the set."""
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyPointSetError("cannot build a distance transform of an empty set")
    return _sq_edt(_point_grid(pts, width, height))


def chamfer(p: np.ndarray, q: np.ndarray, width: int = SENSOR_WIDTH,
            height: int = SENSOR_HEIGHT, normalized: bool = True) -> float:
    """Symmetric sum of squared nearest-neighbor distances between point sets.

    With normalized=True the raw sum is divided by (|P| + |Q|), giving a mean
    squared distance per point that a size-independent threshold can judge.
    """
    p = np.asarray(p, dtype=np.int64).reshape(-1, 2)
    q = np.asarray(q, dtype=np.int64).reshape(-1, 2)
    if len(p) == 0 or len(q) == 0:
        raise EmptyPointSetError("chamfer distance needs two nonempty point sets")
    dt_q = squared_edt(q, width, height)
    dt_p = squared_edt(p, width, height)
    raw = float(dt_q[p[:, 1], p[:, 0]].sum() + dt_p[q[:, 1], q[:, 0]].sum())
    return raw / (len(p) + len(q)) if normalized else raw


class RestingDetector(BaseEstimator):
    """Static-threshold resting-state detector against a reference frame.

    Parameters
    ----------
    binarize_threshold : intensity cut for marker pixels.
    chamfer_threshold : normalized chamfer distance at or below which the
        gel counts as resting.
    """

    def __init__(self, binarize_threshold=128, chamfer_threshold=0.2):
        self.binarize_threshold = binarize_threshold
        self.chamfer_threshold = chamfer_threshold

    def fit(self, frame: Frame):
        """Capture the reference point set from the launch (resting) frame."""
        pts = marker_pixels(frame, self.binarize_threshold)
        if len(pts) == 0:
            raise EmptyPointSetError("reference frame has no marker pixels")
        self.reference_points_ = pts
        self._width = frame.width
        self._height = frame.height
        self._ref_dt = squared_edt(pts, frame.width, frame.height)
        return self

    def decision_function(self, frame: Frame) -> float:
        """Normalized chamfer distance to the reference; inf when empty."""
        if not hasattr(self, "reference_points_"):
            raise RuntimeError("detector not fitted; call fit(reference_frame) first")
        cur = marker_pixels(frame, self.binarize_threshold)
        if len(cur) == 0:
            return float("inf")
        ref = self.reference_points_
        cur_dt = squared_edt(cur, self._width, self._height)
        raw = float(self._ref_dt[cur[:, 1], cur[:, 0]].sum()
                    + cur_dt[ref[:, 1], ref[:, 0]].sum())
        return raw / (len(cur) + len(ref))

    def predict(self, frame: Frame) -> tuple[bool, float]:
        """(is_resting, normalized distance) for one frame."""
        d = self.decision_function(frame)
        return d <= self.chamfer_threshold, d
