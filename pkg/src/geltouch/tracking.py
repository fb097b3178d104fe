"""Asynchronous per-event multi-blob tracking of the gel markers.

Each marker is a fixed-size circular blob whose (x, y, vx, vy) state evolves
under a constant-velocity linear Kalman filter with exponential velocity
damping. Every event is associated to the nearest blob through a uniform
spatial grid and, if it falls within the association gate, applied as a
position measurement. The displacement field is the set of differences
between current position estimates and the anchors captured at
initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage
from sklearn.base import BaseEstimator

from .events import EVENT_DTYPE, Frame
from .geometry import SENSOR_HEIGHT, SENSOR_WIDTH

_GRID_CAP = 64


class InitializationError(RuntimeError):
    """Marker extraction found an unexpected number of regions."""

    def __init__(self, message: str, found: int):
        super().__init__(message)
        self.found = found


class EventOrderError(ValueError):
    """An event batch ran backwards in time."""


@dataclass
class MarkerState:
    """Introspection view of one tracked marker."""

    id: int
    anchor: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    covariance: np.ndarray
    last_update_us: int
    health: int


def extract_marker_regions(frame: Frame, binarize_threshold: int,
                           min_area: int = 2, max_area: int = 200):
    """Connected white regions of a binarized frame.

    Returns (centroids, areas) with intensity-weighted centroids as (x, y)
    pixel coordinates, ordered by (y, x) for stable ids.
    """
    binary = frame.pixels >= binarize_threshold
    labeled, n = ndimage.label(binary)
    if n == 0:
        return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
    areas = ndimage.sum_labels(binary, labeled, index=np.arange(1, n + 1))
    keep = np.flatnonzero((areas >= min_area) & (areas <= max_area)) + 1
    if len(keep) == 0:
        return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
    coms = ndimage.center_of_mass(frame.pixels.astype(np.float64), labeled, index=keep)
    centroids = np.array([(c[1], c[0]) for c in coms])
    order = np.lexsort((centroids[:, 0], centroids[:, 1]))
    return centroids[order], areas[keep - 1][order].astype(np.int64)


@njit(cache=True)
def _grid_insert(grid_count, grid_ids, blob_cell, pos, cell_size):
    grid_count[:, :] = 0
    ncy, ncx = grid_count.shape
    for i in range(pos.shape[0]):
        gx = min(max(int(pos[i, 0] / cell_size), 0), ncx - 1)
        gy = min(max(int(pos[i, 1] / cell_size), 0), ncy - 1)
        k = grid_count[gy, gx]
        if k < grid_ids.shape[2]:
            grid_ids[gy, gx, k] = i
            grid_count[gy, gx] = k + 1
        blob_cell[i, 0] = gx
        blob_cell[i, 1] = gy


@njit(cache=True)
def _process_events(ex, ey, et, pos, vel, cov, last_t, ev_count, support,
                    grid_count, grid_ids, blob_cell,
                    cell_size, gate2, r_meas, q_pos, q_vel, damp_lambda,
                    max_coast_s, max_step, support_lambda, support_full, support_floor):
    """Sequential per-event Kalman updates. Returns accepted event count.

    Marker evidence arrives as locally correlated event bursts, while sensor
    background noise is isolated in time. Each blob keeps an exponentially
    decaying event-support score; the measurement gain is scaled by
    support/support_full (floored), so a lone noise event barely moves an
    idle blob but a genuine burst reaches full weight within a few events.
    Corrections are additionally clamped to max_step pixels per event.
    """
    n_acc = 0
    ncy, ncx = grid_count.shape
    cap = grid_ids.shape[2]
    for e in range(ex.shape[0]):
        x = ex[e]
        y = ey[e]
        t = et[e]
        ecx = min(max(int(x / cell_size), 0), ncx - 1)
        ecy = min(max(int(y / cell_size), 0), ncy - 1)
        best = -1
        best_d2 = 1e30
        second_d2 = 1e30
        for gy in range(max(ecy - 1, 0), min(ecy + 2, ncy)):
            for gx in range(max(ecx - 1, 0), min(ecx + 2, ncx)):
                for k in range(grid_count[gy, gx]):
                    i = grid_ids[gy, gx, k]
                    dx = pos[i, 0] - x
                    dy = pos[i, 1] - y
                    d2 = dx * dx + dy * dy
                    if d2 < best_d2:
                        second_d2 = best_d2
                        best_d2 = d2
                        best = i
                    elif d2 < second_d2:
                        second_d2 = d2
        if best < 0 or best_d2 > gate2:
            continue
        # Ambiguity gate: an event nearly equidistant between two blobs is
        # as likely to belong to either; feeding it to one would swap
        # identities in dense pile-up zones.
        if second_d2 < 1.6 * best_d2:
            continue
        i = best
        P = cov[i]

        dt = (t - last_t[i]) * 1e-6
        if dt > max_coast_s:
            dt = max_coast_s  # uncertainty growth saturates without data
        if dt > 0:
            if damp_lambda > 0:
                alpha = np.exp(-damp_lambda * dt)
                beta = (1.0 - alpha) / damp_lambda
            else:
                alpha = 1.0
                beta = dt
            pos[i, 0] += vel[i, 0] * beta
            pos[i, 1] += vel[i, 1] * beta
            vel[i, 0] *= alpha
            vel[i, 1] *= alpha
            # P <- F P F^T + Q with F = [[1,0,b,0],[0,1,0,b],[0,0,a,0],[0,0,0,a]]
            fp = np.empty((4, 4))
            for j in range(4):
                fp[0, j] = P[0, j] + beta * P[2, j]
                fp[1, j] = P[1, j] + beta * P[3, j]
                fp[2, j] = alpha * P[2, j]
                fp[3, j] = alpha * P[3, j]
            for r in range(4):
                p0 = fp[r, 0] + beta * fp[r, 2]
                p1 = fp[r, 1] + beta * fp[r, 3]
                p2 = alpha * fp[r, 2]
                p3 = alpha * fp[r, 3]
                P[r, 0] = p0
                P[r, 1] = p1
                P[r, 2] = p2
                P[r, 3] = p3
            P[0, 0] += q_pos * dt
            P[1, 1] += q_pos * dt
            P[2, 2] += q_vel * dt
            P[3, 3] += q_vel * dt

        # Event-burst support weighting.
        gap = (t - last_t[i]) * 1e-6
        sup = support[i] * np.exp(-support_lambda * gap)
        w = sup / support_full
        if w > 1.0:
            w = 1.0
        elif w < support_floor:
            w = support_floor
        support[i] = sup + 1.0

        # Measurement update, Joseph form for positive definiteness.
        s00 = P[0, 0] + r_meas
        s01 = P[0, 1]
        s11 = P[1, 1] + r_meas
        det = s00 * s11 - s01 * s01
        if det <= 0:
            continue
        i00 = s11 / det
        i01 = -s01 / det
        i11 = s00 / det
        K = np.empty((4, 2))
        for r in range(4):
            K[r, 0] = w * (P[r, 0] * i00 + P[r, 1] * i01)
            K[r, 1] = w * (P[r, 0] * i01 + P[r, 1] * i11)
        inn0 = x - pos[i, 0]
        inn1 = y - pos[i, 1]
        cx0 = K[0, 0] * inn0 + K[0, 1] * inn1
        cx1 = K[1, 0] * inn0 + K[1, 1] * inn1
        step = np.sqrt(cx0 * cx0 + cx1 * cx1)
        scale = max_step / step if step > max_step else 1.0
        pos[i, 0] += scale * cx0
        pos[i, 1] += scale * cx1
        # Velocity is only observable from sustained bursts; weight it again.
        vel[i, 0] += w * scale * (K[2, 0] * inn0 + K[2, 1] * inn1)
        vel[i, 1] += w * scale * (K[3, 0] * inn0 + K[3, 1] * inn1)
        ap = np.empty((4, 4))
        for r in range(4):
            for c in range(4):
                ap[r, c] = P[r, c] - K[r, 0] * P[0, c] - K[r, 1] * P[1, c]
        for r in range(4):
            for c in range(r, 4):
                v = (ap[r, c] - ap[r, 0] * K[c, 0] - ap[r, 1] * K[c, 1]
                     + r_meas * (K[r, 0] * K[c, 0] + K[r, 1] * K[c, 1]))
                P[r, c] = v
                P[c, r] = v

        last_t[i] = t
        ev_count[i] += 1
        n_acc += 1

        gx = min(max(int(pos[i, 0] / cell_size), 0), ncx - 1)
        gy = min(max(int(pos[i, 1] / cell_size), 0), ncy - 1)
        if gx != blob_cell[i, 0] or gy != blob_cell[i, 1]:
            ox = blob_cell[i, 0]
            oy = blob_cell[i, 1]
            cnt = grid_count[oy, ox]
            for k in range(cnt):
                if grid_ids[oy, ox, k] == i:
                    grid_ids[oy, ox, k] = grid_ids[oy, ox, cnt - 1]
                    grid_count[oy, ox] = cnt - 1
                    break
            k = grid_count[gy, gx]
            if k < cap:
                grid_ids[gy, gx, k] = i
                grid_count[gy, gx] = k + 1
            blob_cell[i, 0] = gx
            blob_cell[i, 1] = gy
    return n_acc


class BlobTracker(BaseEstimator):
    """Event-driven marker tracker with a fixed blob size.

    Parameters
    ----------
    blob_sigma_px : assumed blob radius; the measurement variance is its square.
    gate_px : association gate; events farther than this from every blob are noise.
    q_pos, q_vel : process noise densities (px^2/s and (px/s)^2/s).
    vel_half_life_ms : exponential velocity damping half-life.
    binarize_threshold : frame threshold for marker extraction.
    expected_count : when set, initialization fails unless exactly this many
        regions are found.
    """

    def __init__(self, blob_sigma_px=1.25, gate_px=5.0, q_pos=25.0, q_vel=1.0e6,
                 vel_half_life_ms=150.0, init_pos_var=1.0, init_vel_var=1.0e4,
                 max_coast_ms=50.0, max_step_px=0.6,
                 support_tau_ms=20.0, support_full=5.0, support_floor=0.02,
                 binarize_threshold=128, expected_count=None,
                 min_area=2, max_area=200):
        self.blob_sigma_px = blob_sigma_px
        self.gate_px = gate_px
        self.q_pos = q_pos
        self.q_vel = q_vel
        self.vel_half_life_ms = vel_half_life_ms
        self.init_pos_var = init_pos_var
        self.init_vel_var = init_vel_var
        self.max_coast_ms = max_coast_ms
        self.max_step_px = max_step_px
        self.support_tau_ms = support_tau_ms
        self.support_full = support_full
        self.support_floor = support_floor
        self.binarize_threshold = binarize_threshold
        self.expected_count = expected_count
        self.min_area = min_area
        self.max_area = max_area

    # -- lifecycle -----------------------------------------------------

    def fit(self, frame: Frame):
        """Initialize one blob per white region of a resting frame."""
        centroids, _ = extract_marker_regions(
            frame, self.binarize_threshold, self.min_area, self.max_area)
        n = len(centroids)
        if n == 0:
            raise InitializationError("no marker regions found in frame", found=0)
        if self.expected_count is not None and n != self.expected_count:
            raise InitializationError(
                f"expected {self.expected_count} marker regions, found {n}", found=n)
        self._init_state(centroids, frame.t)
        return self

    def _init_state(self, centroids: np.ndarray, t_us: int) -> None:
        n = len(centroids)
        self.n_markers_ = n
        self.anchors_ = centroids.astype(np.float64).copy()
        self.positions_ = centroids.astype(np.float64).copy()
        self.velocities_ = np.zeros((n, 2))
        cov = np.zeros((n, 4, 4))
        cov[:, 0, 0] = cov[:, 1, 1] = self.init_pos_var
        cov[:, 2, 2] = cov[:, 3, 3] = self.init_vel_var
        self.covariances_ = cov
        self.last_update_us_ = np.full(n, int(t_us), dtype=np.int64)
        self.event_counts_ = np.zeros(n, dtype=np.int64)
        self.support_ = np.zeros(n)
        self._last_event_t = int(t_us)
        ncx = int(np.ceil(SENSOR_WIDTH / self.gate_px))
        ncy = int(np.ceil(SENSOR_HEIGHT / self.gate_px))
        self._grid_count = np.zeros((ncy, ncx), dtype=np.int32)
        self._grid_ids = np.zeros((ncy, ncx, _GRID_CAP), dtype=np.int32)
        self._blob_cell = np.zeros((n, 2), dtype=np.int32)
        _grid_insert(self._grid_count, self._grid_ids, self._blob_cell,
                     self.positions_, float(self.gate_px))

    def reset(self, frame: Frame):
        """Reinitialize from a resting frame, keeping ids by nearest anchor."""
        from scipy.optimize import linear_sum_assignment

        centroids, _ = extract_marker_regions(
            frame, self.binarize_threshold, self.min_area, self.max_area)
        n = len(centroids)
        if n == 0:
            raise InitializationError("no marker regions found in frame", found=0)
        if self.expected_count is not None and n != self.expected_count:
            raise InitializationError(
                f"expected {self.expected_count} marker regions, found {n}", found=n)
        if hasattr(self, "anchors_") and len(self.anchors_) == n:
            d = np.linalg.norm(self.anchors_[:, None, :] - centroids[None, :, :], axis=2)
            rows, cols = linear_sum_assignment(d)
            matched = centroids[cols[np.argsort(rows)]]
            self._init_state(matched, frame.t)
        else:
            self._init_state(centroids, frame.t)
        return self

    # -- event processing ----------------------------------------------

    def partial_fit(self, events: np.ndarray):
        """Consume a time-sorted event batch, updating blob states in order."""
        self._check_fitted()
        if events.dtype != EVENT_DTYPE:
            raise ValueError(f"expected event dtype {EVENT_DTYPE}")
        if len(events) == 0:
            return self
        t = events["t"].astype(np.int64)
        if np.any(np.diff(t) < 0):
            raise EventOrderError("event batch is not time-sorted")
        if t[0] < self._last_event_t:
            raise EventOrderError(
                f"event batch starts at {t[0]}, before tracker time {self._last_event_t}")
        lam = np.log(2.0) / (self.vel_half_life_ms * 1e-3) if self.vel_half_life_ms > 0 else 0.0
        sup_lam = 1.0 / (self.support_tau_ms * 1e-3) if self.support_tau_ms > 0 else 0.0
        n_acc = _process_events(
            events["x"].astype(np.float64), events["y"].astype(np.float64), t,
            self.positions_, self.velocities_, self.covariances_,
            self.last_update_us_, self.event_counts_, self.support_,
            self._grid_count, self._grid_ids, self._blob_cell,
            float(self.gate_px), float(self.gate_px) ** 2,
            float(self.blob_sigma_px) ** 2,
            float(self.q_pos), float(self.q_vel), lam,
            float(self.max_coast_ms) * 1e-3, float(self.max_step_px),
            sup_lam, float(self.support_full), float(self.support_floor))
        self._last_event_t = int(t[-1])
        self.accepted_ = int(n_acc)
        return self

    # -- outputs ---------------------------------------------------------

    def displacement_field(self) -> np.ndarray:
        """Current minus anchor position for every marker, ordered by id."""
        self._check_fitted()
        return self.positions_ - self.anchors_

    def states(self) -> list[MarkerState]:
        self._check_fitted()
        return [MarkerState(id=i, anchor=self.anchors_[i].copy(),
                            position=self.positions_[i].copy(),
                            velocity=self.velocities_[i].copy(),
                            covariance=self.covariances_[i].copy(),
                            last_update_us=int(self.last_update_us_[i]),
                            health=int(self.event_counts_[i]))
                for i in range(self.n_markers_)]

    def reset_health_window(self) -> None:
        self.event_counts_[:] = 0

    def _check_fitted(self) -> None:
        if not hasattr(self, "positions_"):
            raise RuntimeError("tracker not initialized; call fit(frame) first")
