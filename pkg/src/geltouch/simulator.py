"""Deterministic gel simulator: scripted gestures to frames, events, and labels.

Deformation is modeled directly in the image plane: each finger drags nearby
markers through a Gaussian influence kernel, scaled by an attack/hold/release
envelope. Events come from per-pixel log-intensity threshold crossings of the
rendered marker canvas, with optional Poisson background noise.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .events import EVENT_DTYPE, Frame, GestureLabel, GestureType, make_events
from .geometry import SENSOR_HEIGHT, SENSOR_WIDTH, GeometryConfig, marker_grid, mm_to_px, px_to_mm
from .recording import Recording

MAX_INTENSITY_MM = 18.1
MAX_SPEED_MM_S = 220.0
FRAME_PERIOD_US = 40_000  # 25 Hz

_FINGER_RANGE = {
    GestureType.PUSH: (1, 1),
    GestureType.PINCH: (2, 3),
    GestureType.ZOOM: (2, 3),
    GestureType.TWIST_CW: (2, 3),
    GestureType.TWIST_CCW: (2, 3),
}


@dataclass(frozen=True)
class GestureScript:
    """One scripted gesture: where the fingers are and how hard they press."""

    gesture_type: GestureType
    finger_centers: tuple[tuple[float, float], ...]
    peak_intensity_mm: float
    t_start_us: int = 0
    attack_us: int = 400_000
    hold_us: int = 600_000
    release_us: int = 400_000
    speed_cap_mm_s: float = 210.0
    deformation_sigma_px: float = 12.0
    push_direction: tuple[float, float] = (1.0, 0.0)
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = _FINGER_RANGE[GestureType(self.gesture_type)]
        n = len(self.finger_centers)
        if not lo <= n <= hi:
            raise ValueError(
                f"{GestureType(self.gesture_type).label} needs {lo}..{hi} fingers, got {n}")
        if not 0 < self.peak_intensity_mm <= MAX_INTENSITY_MM:
            raise ValueError(f"peak intensity must be in (0, {MAX_INTENSITY_MM}] mm")
        if not 0 < self.speed_cap_mm_s <= MAX_SPEED_MM_S:
            raise ValueError(f"speed cap must be in (0, {MAX_SPEED_MM_S}] mm/s")
        if self.attack_us < 1000 or self.release_us < 1000 or self.hold_us < 0:
            raise ValueError("attack/release must be >= 1 ms and hold >= 0")
        if self.deformation_sigma_px <= 0:
            raise ValueError("deformation sigma must be positive")
        # Raised-cosine ramps peak at slope pi/2 over the ramp duration.
        for ramp_us in (self.attack_us, self.release_us):
            speed = self.peak_intensity_mm * np.pi / 2.0 / (ramp_us * 1e-6)
            if speed > self.speed_cap_mm_s * (1 + 1e-9):
                raise ValueError(
                    f"envelope peak speed {speed:.1f} mm/s exceeds cap {self.speed_cap_mm_s}")
        norm = float(np.hypot(*self.push_direction))
        if norm == 0.0:
            raise ValueError("push direction must be a nonzero vector")
        object.__setattr__(self, "push_direction",
                           (self.push_direction[0] / norm, self.push_direction[1] / norm))

    @property
    def duration_us(self) -> int:
        return self.attack_us + self.hold_us + self.release_us

    @property
    def t_end_us(self) -> int:
        return self.t_start_us + self.duration_us

    def envelope(self, t_us) -> np.ndarray:
        """Deformation envelope in [0, 1] at absolute time(s) t_us."""
        scalar = np.isscalar(t_us) or np.ndim(t_us) == 0
        tau = np.atleast_1d(np.asarray(t_us, dtype=np.float64)) - self.t_start_us
        out = np.zeros_like(tau)
        rising = (tau > 0) & (tau < self.attack_us)
        out[rising] = 0.5 * (1 - np.cos(np.pi * tau[rising] / self.attack_us))
        out[(tau >= self.attack_us) & (tau <= self.attack_us + self.hold_us)] = 1.0
        falling = (tau > self.attack_us + self.hold_us) & (tau < self.duration_us)
        out[falling] = 0.5 * (1 - np.cos(np.pi * (self.duration_us - tau[falling])
                                         / self.release_us))
        return out[0] if scalar else out


@dataclass
class GelScene:
    """Static description of the virtual gel in front of the camera."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    marker_positions: np.ndarray | None = None
    background: int = 10
    foreground: int = 230
    contrast_threshold: float = 0.2
    noise_rate: float = 0.0  # background events per pixel per second
    substep_us: int = 1000  # event synthesis step (1 kHz)

    def __post_init__(self) -> None:
        if self.marker_positions is None:
            self.marker_positions = marker_grid(self.geometry)
        self.marker_positions = np.asarray(self.marker_positions, dtype=np.float64).reshape(-1, 2)
        if not 0 <= self.background < self.foreground <= 255:
            raise ValueError("need 0 <= background < foreground <= 255")
        if self.contrast_threshold <= 0 or self.noise_rate < 0 or self.substep_us <= 0:
            raise ValueError("bad contrast threshold, noise rate, or substep")
        p = self.marker_positions
        if len(p) and (p[:, 0].min() < 0 or p[:, 0].max() >= SENSOR_WIDTH
                       or p[:, 1].min() < 0 or p[:, 1].max() >= SENSOR_HEIGHT):
            raise ValueError("marker positions outside sensor bounds")

    @property
    def n_markers(self) -> int:
        return len(self.marker_positions)


# ---------------------------------------------------------------------------
# Displacement fields

# A fingertip sticks to the gel over a small contact patch that travels
# rigidly with the drag; around it the surface follows with a Gaussian
# falloff. The falloff widens with drag amplitude (up to a cap) so the
# displacement gradient stays below the fold-over limit: real gel responds
# to a harder drag by moving a wider cohesive region, it cannot let markers
# cross paths.
_PLATEAU_RADIUS = 10.0
_MAX_FIELD_GRADIENT = 0.45
_SKIRT_SIGMA_CAP = 30.0
_GAUSS_PEAK_SLOPE = float(np.exp(-0.5))  # max slope of exp(-x^2/2s^2) is this /s


def _finger_kernel(d2: np.ndarray, amplitude: float, sigma0: float) -> np.ndarray:
    """Unit-peak influence weights at squared distances d2 from a finger.

    The contact patch is nearly rigid with a slight central crown, so the
    displacement maximum sits at the finger instead of tying across the
    whole patch.
    """
    widened = amplitude * _GAUSS_PEAK_SLOPE / _MAX_FIELD_GRADIENT
    sigma = max(sigma0, min(widened, _SKIRT_SIGMA_CAP))
    d = np.sqrt(d2)
    t = np.maximum(d - _PLATEAU_RADIUS, 0.0)
    # The crown keeps the displacement maximum decisively at the finger: a
    # fixed ~3.5 px drop across the patch (capped at 25% for soft touches)
    # stays above tracking bias without steepening the patch interior.
    depth = min(0.25, 3.5 / max(amplitude, 1e-9))
    crown = 1.0 - depth * np.minimum(d, _PLATEAU_RADIUS) / _PLATEAU_RADIUS
    return crown * np.exp(-t * t / (2.0 * sigma * sigma))


def _visual_rotation(phi: float) -> np.ndarray:
    """Rotation matrix that looks counter-clockwise on screen (y points down)."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


class CompiledScript:
    """A script bound to a scene: solved field parameters and ground truth.

    A push drags the gel along one direction. Multi-finger gestures move the
    finger set under a rigid similarity (rotation or scaling about the finger
    centroid); the gel follows that motion, attenuated by the per-finger
    kernel, so the stuck patches under the fingertips move exactly like the
    fingers do. The motion magnitude is solved so that the intensity (mean
    displacement of markers within r of the displaced contact markers) at
    the envelope peak equals the scripted peak intensity.
    """

    def __init__(self, script: GestureScript, scene: GelScene,
                 neighborhood_radius_px: float = 30.0):
        self.script = script
        self.radius_px = neighborhood_radius_px
        rest = scene.marker_positions
        centers = np.asarray(script.finger_centers, dtype=np.float64)
        self._centers = centers
        self._centroid = centers.mean(axis=0)
        self._gtype = GestureType(script.gesture_type)
        # Contact marker of a finger: the marker nearest the finger's
        # displacement peak (the peak of the kernel sits at the finger).
        self.contact_ids = np.array(
            [int(np.argmin(np.sum((rest - c) ** 2, axis=1))) for c in centers])
        self._rest = rest
        self._geometry = scene.geometry
        self._d2 = ((rest[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        peak_px = mm_to_px(script.peak_intensity_mm, scene.geometry)

        if self._gtype == GestureType.PUSH:
            hi = max(20.0 * peak_px, 8.0 * script.deformation_sigma_px)
        elif self._gtype in (GestureType.ZOOM, GestureType.TWIST_CW,
                             GestureType.TWIST_CCW):
            hi = 2.5
        else:
            hi = 0.95  # pinch scale offset; the gel cannot contract past itself
        if self._peak_intensity_for(hi) < peak_px:
            raise ValueError(
                "script intensity unreachable for this finger layout; opposing "
                "drags cancel or the gel cannot deform that far")
        lo = 0.0
        hi0 = hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._peak_intensity_for(mid) < peak_px:
                lo = mid
            else:
                hi = mid
        self.magnitude = 0.5 * (lo + hi)
        # The contact point is the marker nearest the deformation peak, which
        # for radial motions sits slightly outside the fingertip center; pick
        # the per-finger field argmax and re-solve the magnitude once with
        # the final contact set.
        self._pick_contacts_by_peak()
        lo, hi = 0.0, hi0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._peak_intensity_for(mid) < peak_px:
                lo = mid
            else:
                hi = mid
        self.magnitude = 0.5 * (lo + hi)
        self._pick_contacts_by_peak()
        self._weights = self._weights_for(self.magnitude)

    def _pick_contacts_by_peak(self) -> None:
        v = self._field_for(self.magnitude)
        vn = np.linalg.norm(v, axis=1)
        ids = []
        for f in range(len(self._centers)):
            near = np.flatnonzero(self._d2[:, f] <= 24.0 ** 2)
            if len(near) == 0:
                near = np.array([int(np.argmin(self._d2[:, f]))])
            ids.append(int(near[np.argmax(vn[near])]))
        self.contact_ids = np.array(ids)

    # -- field construction -------------------------------------------------

    def _transform_offsets(self, magnitude: float) -> np.ndarray:
        """Displacement of every rest position under the finger-set motion."""
        rest = self._rest
        gtype = self._gtype
        if gtype == GestureType.PUSH:
            direction = np.asarray(self.script.push_direction)
            return np.broadcast_to(magnitude * direction, rest.shape).copy()
        rel = rest - self._centroid
        if gtype == GestureType.ZOOM:
            return magnitude * rel
        if gtype == GestureType.PINCH:
            return -magnitude * rel
        phi = magnitude if gtype == GestureType.TWIST_CCW else -magnitude
        return rel @ _visual_rotation(phi).T - rel

    def _finger_amplitudes(self, magnitude: float) -> np.ndarray:
        if self._gtype == GestureType.PUSH:
            return np.array([magnitude])
        rel = self._centers - self._centroid
        radii = np.linalg.norm(rel, axis=1)
        if self._gtype in (GestureType.ZOOM, GestureType.PINCH):
            return magnitude * radii
        return 2.0 * np.abs(np.sin(magnitude / 2.0)) * radii

    def _weights_for(self, magnitude: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-marker kernel weight and owning-finger index."""
        amps = self._finger_amplitudes(magnitude)
        sigma0 = self.script.deformation_sigma_px
        all_w = np.column_stack(
            [_finger_kernel(self._d2[:, f], float(amps[f]), sigma0)
             for f in range(len(self._centers))])
        owner = np.argmax(all_w, axis=1)
        return np.take_along_axis(all_w, owner[:, None], axis=1)[:, 0], owner

    def _field_for(self, magnitude: float,
                   weights: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        if magnitude <= 0:
            return np.zeros_like(self._rest)
        w, owner = self._weights_for(magnitude) if weights is None else weights
        if self._gtype in (GestureType.ZOOM, GestureType.PINCH):
            # A fingertip pad translates rigidly when fingers spread or
            # squeeze; only the surroundings follow the scale field. Evaluate
            # the motion at a point pulled toward the owning finger inside
            # the patch so the pad does not expand with the scale.
            own_centers = self._centers[owner]
            d_own = np.sqrt(np.take_along_axis(self._d2, owner[:, None], axis=1))[:, 0]
            shrink = np.clip((d_own - _PLATEAU_RADIUS) / 20.0, 0.0, 1.0)[:, None]
            q = own_centers + shrink * (self._rest - own_centers)
            rel_q = q - self._centroid
            sign = 1.0 if self._gtype == GestureType.ZOOM else -1.0
            offsets = sign * magnitude * rel_q
        else:
            offsets = self._transform_offsets(magnitude)
        # Nothing is dragged farther than the finger dragging it: clip each
        # marker's motion to its owning finger's own displacement.
        amps = self._finger_amplitudes(magnitude)
        bound = amps[owner]
        mag = np.linalg.norm(offsets, axis=1)
        # Soft clip: decay gently past the bound so the maximum stays at the
        # finger instead of tying along the whole clipped ray.
        excess = np.maximum(mag / np.maximum(bound, 1e-12) - 1.0, 0.0)
        target = bound * np.exp(-0.7 * excess)
        scale = np.where(mag > bound, target / np.maximum(mag, 1e-12), 1.0)
        return (w * scale)[:, None] * offsets

    def _peak_intensity_for(self, magnitude: float) -> float:
        v = self._field_for(magnitude)
        members = self._members_within_radius(self._rest + v)
        return float(np.linalg.norm(v[members], axis=1).mean())

    def _members_within_radius(self, positions: np.ndarray) -> np.ndarray:
        contacts = positions[self.contact_ids]
        d2 = ((positions[:, None, :] - contacts[None, :, :]) ** 2).sum(axis=2)
        return d2.min(axis=1) <= self.radius_px ** 2

    def field_at(self, t_us) -> np.ndarray:
        """True displacement of every marker at absolute time t_us, in px.

        The kernel footprint is frozen at its peak shape; only the motion
        magnitude follows the envelope.
        """
        e = float(self.script.envelope(t_us))
        if e <= 0:
            return np.zeros_like(self._rest)
        return self._field_for(self.magnitude * e, weights=self._weights)

    def label_at(self, t_us: int) -> GestureLabel:
        """Analytic ground truth from the true field."""
        v = self.field_at(t_us)
        positions = self._rest + v
        members = self._members_within_radius(positions)
        intensity_px = float(np.linalg.norm(v[members], axis=1).mean())
        return GestureLabel(
            t=t_us, gesture_type=self.script.gesture_type,
            contact_points=positions[self.contact_ids],
            intensity_mm=px_to_mm(intensity_px, self._geometry))


def true_displacement_field(script: GestureScript, scene: GelScene, t_us,
                            neighborhood_radius_px: float = 30.0) -> np.ndarray:
    """Per-marker displacement vectors (px) of a script at time t_us."""
    return CompiledScript(script, scene, neighborhood_radius_px).field_at(t_us)


# ---------------------------------------------------------------------------
# Rendering


@njit(cache=True)
def _stamp(canvas, mask_mode, mask, positions, radius, bg, fg):
    """Draw anti-aliased white disks with max blending.

    mask_mode 0: stamp everywhere. mask_mode 1: stamp only where mask is set
    (the canvas must already hold bg on those pixels).
    """
    height, width = canvas.shape
    span = int(np.ceil(radius + 1.0))
    amp = float(fg - bg)
    for m in range(positions.shape[0]):
        cx = positions[m, 0]
        cy = positions[m, 1]
        x0 = int(np.floor(cx)) - span
        y0 = int(np.floor(cy)) - span
        for py in range(max(y0, 0), min(y0 + 2 * span + 1, height - 1) + 1):
            for px in range(max(x0, 0), min(x0 + 2 * span + 1, width - 1) + 1):
                if mask_mode == 1 and mask[py, px] == 0:
                    continue
                dx = px - cx
                dy = py - cy
                cov = 0.5 + (radius - np.sqrt(dx * dx + dy * dy))
                if cov <= 0.0:
                    continue
                if cov > 1.0:
                    cov = 1.0
                val = np.uint8(bg + amp * cov + 0.5)
                if val > canvas[py, px]:
                    canvas[py, px] = val


def render_markers(positions: np.ndarray, scene: GelScene) -> np.ndarray:
    """Render marker disks at the given centers onto a fresh canvas."""
    canvas = np.full((SENSOR_HEIGHT, SENSOR_WIDTH), scene.background, dtype=np.uint8)
    dummy = np.zeros((1, 1), dtype=np.uint8)
    _stamp(canvas, 0, dummy, np.ascontiguousarray(positions, dtype=np.float64),
           scene.geometry.marker_radius_px, scene.background, scene.foreground)
    return canvas


def render_frame(scene: GelScene, displacement: np.ndarray, t_us: int = 0) -> Frame:
    """Render one frame with every marker shifted by its displacement vector."""
    if displacement.shape != scene.marker_positions.shape:
        raise ValueError("displacement field shape must match marker count")
    return Frame(t=t_us, pixels=render_markers(scene.marker_positions + displacement, scene))


# ---------------------------------------------------------------------------
# Event synthesis


@njit(cache=True)
def _synth_chunk(canvas, log_ref, log_lut, mask, last_pos, pos_seq, times,
                 radius, bg, fg, contrast,
                 out_t, out_x, out_y, out_p):
    """Advance the pixel canvas through a sequence of marker positions.

    For every substep: re-render the dirty region around moved markers, then
    emit one event per log-intensity threshold crossing since that pixel's
    last event, with timestamps interpolated inside the substep. Returns the
    number of events produced (may exceed the buffer; callers must retry with
    a larger buffer when it does).
    """
    height, width = canvas.shape
    n_steps = pos_seq.shape[0]
    n_markers = pos_seq.shape[1]
    span = int(np.ceil(radius + 1.0))
    cap = out_t.shape[0]
    count = 0
    dirty = np.empty((height * width, 2), dtype=np.int64)
    for s in range(n_steps):
        t0 = times[s]
        t1 = times[s + 1]
        n_dirty = 0
        moved_any = False
        for m in range(n_markers):
            nx = pos_seq[s, m, 0]
            ny = pos_seq[s, m, 1]
            ox = last_pos[m, 0]
            oy = last_pos[m, 1]
            if nx == ox and ny == oy:
                continue
            moved_any = True
            x_lo = max(int(np.floor(min(nx, ox))) - span, 0)
            x_hi = min(int(np.floor(max(nx, ox))) + span, width - 1)
            y_lo = max(int(np.floor(min(ny, oy))) - span, 0)
            y_hi = min(int(np.floor(max(ny, oy))) + span, height - 1)
            for py in range(y_lo, y_hi + 1):
                for px in range(x_lo, x_hi + 1):
                    if mask[py, px] == 0:
                        mask[py, px] = 1
                        dirty[n_dirty, 0] = px
                        dirty[n_dirty, 1] = py
                        n_dirty += 1
            last_pos[m, 0] = nx
            last_pos[m, 1] = ny
        if not moved_any:
            continue
        # Re-render dirty pixels from scratch into a side buffer.
        old_vals = np.empty(n_dirty, dtype=np.uint8)
        for d in range(n_dirty):
            old_vals[d] = canvas[dirty[d, 1], dirty[d, 0]]
            canvas[dirty[d, 1], dirty[d, 0]] = bg
        _stamp(canvas, 1, mask, pos_seq[s], radius, bg, fg)
        dt = float(t1 - t0)
        for d in range(n_dirty):
            px = dirty[d, 0]
            py = dirty[d, 1]
            mask[py, px] = 0
            new_val = canvas[py, px]
            old_val = old_vals[d]
            if new_val == old_val:
                continue
            l_new = log_lut[new_val]
            l_old = log_lut[old_val]
            ref = log_ref[py, px]
            if l_new > ref:
                n_cross = int(np.floor((l_new - ref) / contrast))
                pol = np.uint8(1)
                step = contrast
            else:
                n_cross = int(np.floor((ref - l_new) / contrast))
                pol = np.uint8(0)
                step = -contrast
            if n_cross == 0:
                continue
            denom = l_new - l_old
            for k in range(1, n_cross + 1):
                level = ref + step * k
                frac = 0.5 if denom == 0.0 else (level - l_old) / denom
                if frac < 0.0:
                    frac = 0.0
                elif frac > 1.0:
                    frac = 1.0
                if count < cap:
                    out_t[count] = t0 + np.int64(frac * dt)
                    out_x[count] = px
                    out_y[count] = py
                    out_p[count] = pol
                count += 1
            log_ref[py, px] = ref + step * n_cross
    return count


class EventSynthesizer:
    """Incremental event generator over a live marker canvas.

    Drives the same pixel model for scripted recordings and for the
    interactive demo server: push marker positions forward in time and
    collect the events they cause.
    """

    def __init__(self, scene: GelScene, seed: int = 0, start_t_us: int = 0):
        self.scene = scene
        self._positions = np.array(scene.marker_positions, dtype=np.float64)
        self._canvas = render_markers(self._positions, scene)
        lut = np.log(np.maximum(np.arange(256, dtype=np.float64), 1.0))
        self._log_lut = lut
        self._log_ref = lut[self._canvas].astype(np.float64)
        self._mask = np.zeros_like(self._canvas)
        self._t = int(start_t_us)
        self._rng = np.random.default_rng(seed)
        self._cap = 262_144

    @property
    def t_us(self) -> int:
        return self._t

    def frame(self, t_us: int | None = None) -> Frame:
        """Snapshot of the current canvas."""
        return Frame(t=self._t if t_us is None else t_us, pixels=self._canvas.copy())

    def skip_to(self, t_us: int) -> None:
        """Jump the clock forward across a static interval (no events, no noise)."""
        if t_us < self._t:
            raise ValueError("cannot skip backwards")
        self._t = int(t_us)

    def advance(self, pos_seq: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Step through marker positions pos_seq[i] reached at times[i].

        times must start strictly after the current clock and be increasing.
        Returns the events of the covered interval, time-sorted, noise included.
        """
        pos_seq = np.ascontiguousarray(pos_seq, dtype=np.float64)
        times = np.asarray(times, dtype=np.int64)
        if len(times) != len(pos_seq):
            raise ValueError("need one timestamp per position row")
        if pos_seq.ndim != 3 or pos_seq.shape[1:] != self._positions.shape:
            raise ValueError("position rows must match the scene's marker count")
        if len(times) == 0:
            return make_events([], [], [], [])
        if times[0] <= self._t or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing past the current clock")
        bounds = np.concatenate([[self._t], times])
        scene = self.scene
        while True:
            out_t = np.empty(self._cap, dtype=np.int64)
            out_x = np.empty(self._cap, dtype=np.int32)
            out_y = np.empty(self._cap, dtype=np.int32)
            out_p = np.empty(self._cap, dtype=np.uint8)
            saved = (self._canvas.copy(), self._log_ref.copy(), self._positions.copy())
            n = _synth_chunk(self._canvas, self._log_ref, self._log_lut, self._mask,
                             self._positions, pos_seq, bounds,
                             scene.geometry.marker_radius_px,
                             np.uint8(scene.background), np.uint8(scene.foreground),
                             scene.contrast_threshold,
                             out_t, out_x, out_y, out_p)
            if n <= self._cap:
                break
            self._canvas, self._log_ref, self._positions = saved
            self._cap = int(1.5 * n) + 1
        t_arr, x_arr, y_arr, p_arr = out_t[:n], out_x[:n], out_y[:n], out_p[:n]

        if scene.noise_rate > 0:
            duration_s = (times[-1] - self._t) * 1e-6
            npx = SENSOR_WIDTH * SENSOR_HEIGHT
            n_noise = self._rng.poisson(scene.noise_rate * npx * duration_s)
            if n_noise:
                t_arr = np.concatenate([t_arr, self._rng.integers(
                    self._t + 1, times[-1] + 1, size=n_noise)])
                x_arr = np.concatenate([x_arr, self._rng.integers(
                    0, SENSOR_WIDTH, size=n_noise, dtype=np.int32)])
                y_arr = np.concatenate([y_arr, self._rng.integers(
                    0, SENSOR_HEIGHT, size=n_noise, dtype=np.int32)])
                p_arr = np.concatenate([p_arr, self._rng.integers(
                    0, 2, size=n_noise).astype(np.uint8)])
        self._t = int(times[-1])
        order = np.argsort(t_arr, kind="stable")
        return make_events(x_arr[order], y_arr[order], t_arr[order], p_arr[order])


def _mix_seed(scene: GelScene, scripts) -> int:
    blob = repr((scene.noise_rate, [s.seed for s in scripts])).encode()
    return zlib.crc32(blob)


def _substep_grid(t0: int, t1: int, substep_us: int) -> np.ndarray:
    """Substep boundaries anchored to the absolute grid, covering (t0, t1]."""
    first = (t0 // substep_us + 1) * substep_us
    ticks = np.arange(first, t1 + 1, substep_us, dtype=np.int64)
    if len(ticks) == 0 or ticks[-1] != t1:
        ticks = np.append(ticks, t1)
    return ticks


def generate_events(scene: GelScene, scripts, t0: int, t1: int,
                    seed: int | None = None) -> np.ndarray:
    """Synthesize the event stream of the given scripts over [t0, t1]."""
    if t0 >= t1:
        raise ValueError("need t0 < t1")
    scripts = [scripts] if isinstance(scripts, GestureScript) else list(scripts)
    compiled = [CompiledScript(s, scene) for s in scripts]
    synth = EventSynthesizer(scene, seed=_mix_seed(scene, scripts) if seed is None else seed,
                             start_t_us=t0)
    chunks = []
    grid = _substep_grid(t0, t1, scene.substep_us)
    for lo in range(0, len(grid), 256):
        times = grid[lo:lo + 256]
        fields = _fields_over(compiled, times, scene.n_markers)
        chunks.append(synth.advance(scene.marker_positions[None] + fields, times))
    return np.concatenate(chunks) if chunks else make_events([], [], [], [])


def _fields_over(compiled, times: np.ndarray, n_markers: int) -> np.ndarray:
    fields = np.zeros((len(times), n_markers, 2))
    for cs in compiled:
        active = np.flatnonzero(cs.script.envelope(times) > 0)
        for i in active:
            fields[i] += cs.field_at(int(times[i]))
    return fields


def generate_labeled_recording(scene: GelScene, scripts,
                               duration_us: int | None = None,
                               neighborhood_radius_px: float = 30.0,
                               seed: int | None = None) -> Recording:
    """Full simulated session: events, 25 Hz frames, and analytic labels."""
    scripts = sorted(scripts, key=lambda s: s.t_start_us)
    for a, b in zip(scripts, scripts[1:]):
        if b.t_start_us <= a.t_end_us:
            raise ValueError(
                f"overlapping scripts at t={b.t_start_us} (previous ends {a.t_end_us})")
    if duration_us is None:
        duration_us = (scripts[-1].t_end_us + 500_000) if scripts else 1_000_000
    if scripts and scripts[-1].t_end_us >= duration_us:
        raise ValueError("duration too short for the scripted gestures")

    compiled = [CompiledScript(s, scene, neighborhood_radius_px) for s in scripts]
    synth = EventSynthesizer(scene, seed=_mix_seed(scene, scripts) if seed is None else seed)

    frames = [synth.frame(0)]
    labels = [_label_for(compiled, 0)]
    event_chunks = []
    frame_times = np.arange(FRAME_PERIOD_US, duration_us + 1, FRAME_PERIOD_US, dtype=np.int64)
    for ft in frame_times:
        times = _substep_grid(int(ft) - FRAME_PERIOD_US, int(ft), scene.substep_us)
        fields = _fields_over(compiled, times, scene.n_markers)
        event_chunks.append(synth.advance(scene.marker_positions[None] + fields, times))
        frames.append(synth.frame(int(ft)))
        labels.append(_label_for(compiled, int(ft)))

    events = np.concatenate(event_chunks) if event_chunks else make_events([], [], [], [])
    meta = f"gel-sim scripts={len(scripts)} noise={scene.noise_rate} seed={_mix_seed(scene, scripts) if seed is None else seed}"
    return Recording(geometry=scene.geometry, events=events, frames=frames,
                     labels=labels, metadata=meta)


def _label_for(compiled: list[CompiledScript], t_us: int) -> GestureLabel:
    for cs in compiled:
        if cs.script.t_start_us <= t_us <= cs.script.t_end_us:
            return cs.label_at(t_us)
    return GestureLabel(t=t_us, gesture_type=GestureType.NO_GESTURE)


# ---------------------------------------------------------------------------
# Benchmark scripting


def benchmark_scripts(scene: GelScene, duration_us: int, seed: int = 0,
                      include_rest_tail: bool = True) -> list[GestureScript]:
    """A balanced gesture schedule covering types, finger counts, intensities,
    and speeds, packed into the requested duration with rest gaps between
    gestures.
    """
    rng = np.random.default_rng(seed)
    geometry = scene.geometry
    cx, cy = geometry.image_center
    place_r = 0.55 * geometry.gel_radius_px
    types = [GestureType.PUSH, GestureType.PINCH, GestureType.ZOOM,
             GestureType.TWIST_CW, GestureType.TWIST_CCW]
    scripts: list[GestureScript] = []
    t = int(rng.integers(300_000, 600_000))
    k = 0
    order = list(types)
    while True:
        if k % len(types) == 0:
            order = [types[i] for i in rng.permutation(len(types))]
        gtype = order[k % len(types)]
        # Deterministic band schedule: mostly soft touches, a guaranteed
        # sliver of maximal ones, echoing the recorded data's histogram.
        slot = k % 20
        if slot < 12:
            peak = float(rng.uniform(1.5, 6.0))
        elif slot < 19 or gtype == GestureType.PINCH:
            peak = float(rng.uniform(6.0, 12.0))
        else:
            peak = float(rng.uniform(12.5, 18.0))
        # Ramp durations; a slice of gestures runs close to the speed cap.
        min_ramp_s = peak * np.pi / 2.0 / 210.0
        if rng.random() < 0.15:
            attack_s = max(min_ramp_s * 1.02, 0.12)
            release_s = max(min_ramp_s * 1.02, 0.12)
        else:
            attack_s = max(float(rng.uniform(0.22, 0.5)), min_ramp_s * 1.05)
            release_s = max(float(rng.uniform(0.22, 0.5)), min_ramp_s * 1.05)
        hold_s = float(rng.uniform(0.5, 1.1))
        if peak > 10.0:
            # users do not hold maximal deformations long, nor ease out slowly
            hold_s = float(rng.uniform(0.25, 0.5))
            release_s = max(min_ramp_s * 1.05, float(rng.uniform(0.15, 0.3)))
        # Slight rightward placement bias, mimicking right-handed users;
        # contacts stay clear of the gel edge, like real recordings do.
        angle = rng.uniform(0, 2 * np.pi)
        rad = place_r * np.sqrt(rng.random())
        center = np.array([cx + 0.1 * place_r + rad * np.cos(angle),
                           cy + rad * np.sin(angle)])
        if gtype == GestureType.PUSH:
            max_center = 0.6 * geometry.gel_radius_px
            off = center - np.array([cx, cy])
            dist = float(np.hypot(*off))
            if dist > max_center:
                center = np.array([cx, cy]) + off * (max_center / max(dist, 1e-9))
            fingers = [tuple(center)]
        else:
            n_fingers = 2 if rng.random() < 0.7 else 3
            sep = float(rng.uniform(28.0, 50.0))
            max_center = max(0.85 * geometry.gel_radius_px - sep - 8.0, 0.0)
            off = center - np.array([cx, cy])
            dist = float(np.hypot(*off))
            if dist > max_center:
                center = np.array([cx, cy]) + off * (max_center / max(dist, 1e-9))
            phase = rng.uniform(0, 2 * np.pi)
            fingers = []
            for i in range(n_fingers):
                a = phase + 2 * np.pi * i / n_fingers
                fingers.append((float(center[0] + sep * np.cos(a)),
                                float(center[1] + sep * np.sin(a))))
        theta = rng.uniform(0, 2 * np.pi)
        script = None
        for _ in range(4):
            try:
                script = GestureScript(
                    gesture_type=gtype, finger_centers=tuple(fingers),
                    peak_intensity_mm=peak, t_start_us=t,
                    attack_us=int(attack_s * 1e6), hold_us=int(hold_s * 1e6),
                    release_us=int(release_s * 1e6),
                    deformation_sigma_px=float(rng.uniform(10.0, 14.0)),
                    push_direction=(float(np.cos(theta)), float(np.sin(theta))),
                    seed=int(rng.integers(0, 2 ** 31)))
                cs = CompiledScript(script, scene)
                if gtype == GestureType.PINCH:
                    c = np.asarray(fingers)
                    pd = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
                    min_sep = pd[pd > 0].min()
                    if min_sep * (1.0 - cs.magnitude) < 30.0:
                        raise ValueError("fingertips would collide")
                break
            except ValueError:
                # Opposing drags cancel; this intensity is unreachable at
                # this finger layout. Press softer.
                script = None
                peak *= 0.7
                if peak < 1.0:
                    break
        if script is None:
            k += 1
            continue
        gap = int(rng.uniform(0.45, 0.9) * 1e6)
        tail = 600_000 if include_rest_tail else 0
        if script.t_end_us + gap + tail > duration_us:
            break
        scripts.append(script)
        t = script.t_end_us + gap
        k += 1
    return scripts
