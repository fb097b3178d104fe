"""Gesture inference from a displacement-field snapshot.

Three stages, each a pure function of (anchors, positions):

1. Contact points: a full homography fitted by RANSAC with a reprojection
   threshold proportional to the mean displacement separates the global gel
   deformation (inliers) from finger-local deformation (outliers); contact
   points are the displacement local maxima inside the outlier set.
2. Gesture type: a 4-DOF similarity (scale, rotation, translation about the
   mean contact point) is RANSAC-fitted to the markers near the contact
   points; the dominant component names the gesture.
3. Intensity: mean displacement magnitude of the markers near the contact
   points, reported in millimeters.

Rotations and translations are reported in a y-up "gel frame" so that a
positive angle is a counter-clockwise twist as seen by the user.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .events import GestureType


class DegenerateFitError(RuntimeError):
    """Not enough well-posed correspondences to estimate a transform."""


@dataclass(frozen=True)
class TransformParams:
    """Similarity transform about an origin: y = s*R(theta)*x + t.

    theta is counter-clockwise-positive and t is (tx, ty) in the y-up gel
    frame; origin is in image pixel coordinates.
    """

    s: float
    theta: float
    t: tuple[float, float]
    origin: tuple[float, float] = (0.0, 0.0)


@dataclass
class ContactDetection:
    """Output of the contact point stage."""

    points: np.ndarray  # (k, 2) current positions of peak markers
    peak_ids: np.ndarray  # marker ids of the peaks
    outlier_ids: np.ndarray  # the non-rigid subsample S
    mean_displacement_px: float


@dataclass
class GestureEstimate:
    """Per-batch pipeline verdict."""

    gesture_type: GestureType
    contact_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    intensity_mm: float = 0.0
    transform: TransformParams | None = None
    outlier_count: int = 0


NO_GESTURE = GestureEstimate(gesture_type=GestureType.NO_GESTURE)


# ---------------------------------------------------------------------------
# Constrained transform algebra


def compose_transform(s: float, theta: float, t) -> np.ndarray:
    """Homography of a similarity: scale, rotate, then translate."""
    c, sn = s * np.cos(theta), s * np.sin(theta)
    return np.array([[c, -sn, t[0]],
                     [sn, c, t[1]],
                     [0.0, 0.0, 1.0]])


def decompose_transform(H: np.ndarray) -> tuple[float, float, tuple[float, float]]:
    """Recover (s, theta, t) from a similarity homography."""
    s = float(np.hypot(H[0, 0], H[1, 0]))
    if s <= 0:
        raise DegenerateFitError("similarity with non-positive scale")
    theta = float(np.arctan2(H[1, 0], H[0, 0]))
    return s, theta, (float(H[0, 2]), float(H[1, 2]))


def _fit_similarity(src: np.ndarray, dst: np.ndarray):
    """Least-squares similarity dst ~ s*R*src + t. None when src is a point."""
    sm = src.mean(axis=0)
    dm = dst.mean(axis=0)
    u = src - sm
    w = dst - dm
    denom = float((u * u).sum())
    if denom < 1e-12:
        return None
    a = float((u * w).sum()) / denom
    b = float((u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]).sum()) / denom
    s = float(np.hypot(a, b))
    if s < 1e-12:
        return None
    theta = float(np.arctan2(b, a))
    rot = np.array([[a, -b], [b, a]])
    t = dm - rot @ sm
    return s, theta, (float(t[0]), float(t[1]))


def _similarity_residuals(params, src, dst):
    s, theta, t = params
    rot = compose_transform(s, theta, t)[:2, :2]
    pred = src @ rot.T + np.asarray(t)
    return np.linalg.norm(pred - dst, axis=1)


def _adaptive_iters(ratio: float, sample_size: int, confidence: float,
                    cap: int) -> int:
    if ratio >= 1.0:
        return 0
    if ratio <= 0.0:
        return cap
    need = np.log(1 - confidence) / np.log(1 - ratio ** sample_size)
    return min(cap, int(np.ceil(need)) + 1)


def _draw_samples(rng: np.random.Generator, n: int, k: int, size: int) -> np.ndarray:
    """k random index tuples of the given size, without replacement per row."""
    return np.argsort(rng.random((k, n)), axis=1, kind="stable")[:, :size]


def ransac_similarity(src: np.ndarray, dst: np.ndarray, threshold: float,
                      seed: int, max_iters: int = 100, confidence: float = 0.99):
    """Robust similarity fit; minimal sample of 2 correspondences.

    Returns ((s, theta, t), inlier_mask). Raises DegenerateFitError when every
    sample is degenerate (coincident source points).
    """
    n = len(src)
    if n < 2:
        raise DegenerateFitError(f"need at least 2 correspondences, got {n}")
    direct = _fit_similarity(src, dst)
    if n == 2:
        if direct is None:
            raise DegenerateFitError("coincident source points")
        return direct, np.ones(2, dtype=bool)
    rng = np.random.default_rng(seed)
    thr2 = threshold * threshold
    best = direct
    if direct is not None:
        res = _similarity_residuals(direct, src, dst)
        best_mask = res <= threshold
        best_score = float(np.minimum(res * res, thr2).sum())
    else:
        best_mask = np.zeros(n, dtype=bool)
        best_score = np.inf
    best_count = int(best_mask.sum())
    iters_needed = (_adaptive_iters(best_count / n, 2, confidence, max_iters)
                    if best is not None else max_iters)

    sc = src[:, 0] + 1j * src[:, 1]
    dc = dst[:, 0] + 1j * dst[:, 1]
    done = 0
    while done < iters_needed:
        k = min(max(iters_needed - done, 1), 64, max_iters - done)
        if k <= 0:
            break
        samples = _draw_samples(rng, n, k, 2)
        s0, s1 = sc[samples[:, 0]], sc[samples[:, 1]]
        d0, d1 = dc[samples[:, 0]], dc[samples[:, 1]]
        denom = s1 - s0
        valid = np.abs(denom) > 1e-9
        c = np.where(valid, (d1 - d0) / np.where(valid, denom, 1.0), 0.0)
        valid &= np.abs(c) > 1e-12  # zero scale is not a similarity
        t = d0 - c * s0
        res2 = np.abs(c[:, None] * sc[None, :] + t[:, None] - dc[None, :]) ** 2
        # MSAC scoring: truncated squared residuals discriminate between
        # near-tied consensus sets far better than raw inlier counts.
        scores = np.where(valid, np.minimum(res2, thr2).sum(axis=1), np.inf)
        bi = int(np.argmin(scores))
        if scores[bi] < best_score:
            best_score = float(scores[bi])
            best_mask = res2[bi] <= thr2
            best_count = int(best_mask.sum())
            cb = c[bi]
            best = (float(np.abs(cb)), float(np.angle(cb)),
                    (float(t[bi].real), float(t[bi].imag)))
            iters_needed = min(done + k + _adaptive_iters(best_count / n, 2,
                                                          confidence, max_iters),
                               max_iters)
        done += k
    if best is None or best_count < 2:
        raise DegenerateFitError("no valid similarity sample found")
    refit = _fit_similarity(src[best_mask], dst[best_mask])
    if refit is not None:
        res = _similarity_residuals(refit, src, dst)
        if float(np.minimum(res * res, thr2).sum()) <= best_score:
            best = refit
            best_mask = res <= threshold
    return best, best_mask


# ---------------------------------------------------------------------------
# Full homography RANSAC (global deformation model)


def _solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """DLT with H33 = 1; normalized for conditioning, exact for 4 points."""
    s_mean = src.mean(axis=0)
    d_mean = dst.mean(axis=0)
    s_scale = max(np.abs(src - s_mean).max(), 1e-12)
    d_scale = max(np.abs(dst - d_mean).max(), 1e-12)
    sn = (src - s_mean) / s_scale
    dn = (dst - d_mean) / d_scale
    n = len(src)
    A = np.zeros((2 * n, 8))
    b = np.empty(2 * n)
    A[0::2, 0] = sn[:, 0]
    A[0::2, 1] = sn[:, 1]
    A[0::2, 2] = 1.0
    A[0::2, 6] = -dn[:, 0] * sn[:, 0]
    A[0::2, 7] = -dn[:, 0] * sn[:, 1]
    b[0::2] = dn[:, 0]
    A[1::2, 3] = sn[:, 0]
    A[1::2, 4] = sn[:, 1]
    A[1::2, 5] = 1.0
    A[1::2, 6] = -dn[:, 1] * sn[:, 0]
    A[1::2, 7] = -dn[:, 1] * sn[:, 1]
    b[1::2] = dn[:, 1]
    if n == 4:
        h = np.linalg.solve(A, b)
    else:
        h, *_ = np.linalg.lstsq(A, b, rcond=None)
    Hn = np.array([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
    Td_inv = np.array([[d_scale, 0, d_mean[0]], [0, d_scale, d_mean[1]], [0, 0, 1.0]])
    Ts = np.array([[1.0 / s_scale, 0, -s_mean[0] / s_scale],
                   [0, 1.0 / s_scale, -s_mean[1] / s_scale], [0, 0, 1.0]])
    H = Td_inv @ Hn @ Ts
    return H / H[2, 2]


def _homography_residuals(H: np.ndarray, src_h: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Reprojection distances; src_h is pre-homogenized (n, 3)."""
    proj = src_h @ H.T
    w = proj[:, 2]
    bad = np.abs(w) < 1e-9
    w = np.where(bad, 1.0, w)
    err = np.linalg.norm(proj[:, :2] / w[:, None] - dst, axis=1)
    err[bad] = np.inf
    return err


def _batched_minimal_homographies(s: np.ndarray, d: np.ndarray):
    """Exact homographies for k 4-point samples: (k, 3, 3) plus validity."""
    k = len(s)
    s_mean = s.mean(axis=1, keepdims=True)
    d_mean = d.mean(axis=1, keepdims=True)
    s_scale = np.maximum(np.abs(s - s_mean).max(axis=(1, 2)), 1e-12)[:, None, None]
    d_scale = np.maximum(np.abs(d - d_mean).max(axis=(1, 2)), 1e-12)[:, None, None]
    sn = (s - s_mean) / s_scale
    dn = (d - d_mean) / d_scale
    A = np.zeros((k, 8, 8))
    b = np.empty((k, 8))
    A[:, 0::2, 0] = sn[:, :, 0]
    A[:, 0::2, 1] = sn[:, :, 1]
    A[:, 0::2, 2] = 1.0
    A[:, 0::2, 6] = -dn[:, :, 0] * sn[:, :, 0]
    A[:, 0::2, 7] = -dn[:, :, 0] * sn[:, :, 1]
    b[:, 0::2] = dn[:, :, 0]
    A[:, 1::2, 3] = sn[:, :, 0]
    A[:, 1::2, 4] = sn[:, :, 1]
    A[:, 1::2, 5] = 1.0
    A[:, 1::2, 6] = -dn[:, :, 1] * sn[:, :, 0]
    A[:, 1::2, 7] = -dn[:, :, 1] * sn[:, :, 1]
    b[:, 1::2] = dn[:, :, 1]
    dets = np.abs(np.linalg.det(A))
    valid = dets > 1e-12
    A[~valid] = np.eye(8)
    h = np.linalg.solve(A, b[:, :, None])[:, :, 0]
    Hn = np.empty((k, 3, 3))
    Hn[:, 0, :] = h[:, 0:3]
    Hn[:, 1, :] = h[:, 3:6]
    Hn[:, 2, 0:2] = h[:, 6:8]
    Hn[:, 2, 2] = 1.0
    # Denormalize: H = Td_inv @ Hn @ Ts.
    td_inv = np.zeros((k, 3, 3))
    td_inv[:, 0, 0] = td_inv[:, 1, 1] = d_scale[:, 0, 0]
    td_inv[:, 0, 2] = d_mean[:, 0, 0]
    td_inv[:, 1, 2] = d_mean[:, 0, 1]
    td_inv[:, 2, 2] = 1.0
    ts = np.zeros((k, 3, 3))
    inv_s = 1.0 / s_scale[:, 0, 0]
    ts[:, 0, 0] = ts[:, 1, 1] = inv_s
    ts[:, 0, 2] = -s_mean[:, 0, 0] * inv_s
    ts[:, 1, 2] = -s_mean[:, 0, 1] * inv_s
    ts[:, 2, 2] = 1.0
    H = td_inv @ Hn @ ts
    w = H[:, 2, 2]
    ok = np.abs(w) > 1e-12
    valid &= ok
    H[ok] /= w[ok, None, None]
    return H, valid


def ransac_homography(src: np.ndarray, dst: np.ndarray, threshold: float,
                      seed: int, max_iters: int = 200, confidence: float = 0.99):
    """Robust 8-DOF homography fit. Returns (H, inlier_mask) or None.

    Samples are evaluated in vectorized rounds; the all-points least-squares
    fit seeds the consensus, which on near-identity gel fields collapses the
    adaptive iteration count to a handful of samples.
    """
    n = len(src)
    if n < 4:
        return None
    rng = np.random.default_rng(seed)
    src_h = np.empty((n, 3))
    src_h[:, :2] = src
    src_h[:, 2] = 1.0
    # Seed the consensus with the identity: anchors equal positions at rest,
    # so it is the natural null model. (A least-squares seed would absorb
    # wide deformation bumps and invert the outlier set.)
    thr2 = threshold * threshold
    best_H = np.eye(3)
    res0 = _homography_residuals(best_H, src_h, dst)
    best_mask = res0 <= threshold
    best_score = float(np.minimum(res0 * res0, thr2).sum())
    best_count = int(best_mask.sum())
    iters_needed = (_adaptive_iters(best_count / n, 4, confidence, max_iters)
                    if best_count > 0 else max_iters)
    done = 0
    while done < iters_needed:
        k = min(max(iters_needed - done, 1), 64, max_iters - done)
        if k <= 0:
            break
        samples = _draw_samples(rng, n, k, 4)
        H, valid = _batched_minimal_homographies(src[samples], dst[samples])
        proj = src_h @ H.transpose(0, 2, 1)
        w = proj[:, :, 2]
        wbad = np.abs(w) < 1e-9
        w = np.where(wbad, 1.0, w)
        err2 = ((proj[:, :, 0] / w - dst[:, 0]) ** 2
                + (proj[:, :, 1] / w - dst[:, 1]) ** 2)
        err2[wbad] = np.inf
        scores = np.where(valid, np.minimum(err2, thr2).sum(axis=1), np.inf)
        bi = int(np.argmin(scores))
        if scores[bi] < best_score:
            best_score = float(scores[bi])
            best_mask = err2[bi] <= thr2
            best_count = int(best_mask.sum())
            best_H = H[bi]
            iters_needed = min(done + k + _adaptive_iters(best_count / n, 4,
                                                          confidence, max_iters),
                               max_iters)
        done += k
    if best_mask is None or best_count < 4:
        return None
    # Refit on the consensus set, but only keep it when it improves the
    # truncated-residual score: a least-squares model dragged by shoulder
    # gradients can tilt enough to expel far static markers.
    try:
        H = _solve_homography(src[best_mask], dst[best_mask])
        res = _homography_residuals(H, src_h, dst)
        if float(np.minimum(res * res, thr2).sum()) <= best_score:
            return H, res <= threshold
    except np.linalg.LinAlgError:
        pass
    return best_H, best_mask


# ---------------------------------------------------------------------------
# The engine


def _to_gel(pts: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Image pixels to y-up coordinates relative to the origin."""
    out = pts - origin
    out[:, 1] = -out[:, 1]
    return out


class GestureEngine(BaseEstimator):
    """Contact-point detection, gesture classification, and intensity.

    Parameters
    ----------
    a : dynamic reprojection threshold coefficient (threshold = a * mean |v|).
    radius_px : neighborhood radius for local maxima and the contact set.
    min_neighbors : minimum outlier-set neighborhood size for a peak candidate.
    noise_floor_px : mean displacement below which no gesture is reported.
    w_scale, w_rotation, w_translation : classifier weights; translation is
        normalized by radius_px before weighting.
    px_per_mm : converts intensity to millimeters.
    """

    def __init__(self, a=0.6, radius_px=30.0, min_neighbors=4, noise_floor_px=0.45,
                 peak_rel_floor=0.5, peak_merge_radius_px=48.0,
                 w_scale=1.0, w_rotation=1.0, w_translation=1.0,
                 global_iters=200, constrained_iters=100, px_per_mm=2.5, seed=0):
        self.a = a
        self.radius_px = radius_px
        self.min_neighbors = min_neighbors
        self.noise_floor_px = noise_floor_px
        self.peak_rel_floor = peak_rel_floor
        self.peak_merge_radius_px = peak_merge_radius_px
        self.w_scale = w_scale
        self.w_rotation = w_rotation
        self.w_translation = w_translation
        self.global_iters = global_iters
        self.constrained_iters = constrained_iters
        self.px_per_mm = px_per_mm
        self.seed = seed

    # -- stage 1 ---------------------------------------------------------

    def detect_contact_points(self, anchors: np.ndarray, positions: np.ndarray,
                              seed: int | None = None) -> ContactDetection:
        """Find finger contact points from the displacement field."""
        anchors = np.asarray(anchors, dtype=np.float64)
        positions = np.asarray(positions, dtype=np.float64)
        if anchors.shape != positions.shape or anchors.ndim != 2:
            raise ValueError("anchors and positions must be matching (N, 2) arrays")
        v = positions - anchors
        vnorm = np.linalg.norm(v, axis=1)
        mean_disp = float(vnorm.mean()) if len(vnorm) else 0.0
        empty = ContactDetection(points=np.zeros((0, 2)), peak_ids=np.zeros(0, dtype=int),
                                 outlier_ids=np.zeros(0, dtype=int),
                                 mean_displacement_px=mean_disp)
        if mean_disp < self.noise_floor_px:
            return empty
        threshold = self.a * mean_disp
        result = ransac_homography(anchors, positions, threshold,
                                   seed=self._stage_seed(seed, 0),
                                   max_iters=self.global_iters)
        if result is None:
            outliers = vnorm > self.noise_floor_px
        else:
            _, inliers = result
            outliers = ~inliers
        S = np.flatnonzero(outliers)
        if len(S) == 0:
            return empty
        ps = positions[S]
        d2 = ((ps[:, None, :] - ps[None, :, :]) ** 2).sum(axis=2)
        neigh = d2 <= self.radius_px ** 2
        eligible = neigh.sum(axis=1) >= self.min_neighbors
        vs = vnorm[S]
        # Peak: maximal displacement in its neighborhood, lower id wins ties.
        greater = (vs[:, None] > vs[None, :]) | (
            (vs[:, None] == vs[None, :]) & (S[:, None] <= S[None, :]))
        peaks = eligible & ~(neigh & ~greater).any(axis=1)
        if peaks.any():
            # A contact point marks the greatest deformation under a finger;
            # suppress faint secondary maxima riding the deformation skirt.
            floor = self.peak_rel_floor * vs[peaks].max()
            peaks &= vs >= floor
        peak_ids = S[peaks]
        # Deduplicate peaks originating from one finger's patch: distinct
        # fingers rest at least a fingertip diameter apart, so peaks whose
        # anchors fall within the neighborhood radius are one contact.
        if len(peak_ids) > 1:
            order = peak_ids[np.argsort(-vnorm[peak_ids], kind="stable")]
            kept: list[int] = []
            for pid in order:
                a = anchors[pid]
                if all(np.hypot(*(a - anchors[k])) > self.peak_merge_radius_px
                       for k in kept):
                    kept.append(int(pid))
            peak_ids = np.array(sorted(kept))
        return ContactDetection(points=positions[peak_ids].copy(), peak_ids=peak_ids,
                                outlier_ids=S, mean_displacement_px=mean_disp)

    # -- stage 2 + 3 -------------------------------------------------------

    def fit_constrained_homography(self, src: np.ndarray, dst: np.ndarray,
                                   origin, threshold: float,
                                   seed: int | None = None) -> TransformParams:
        """Similarity about the given origin, robust to outliers.

        src/dst are image-pixel correspondences; the returned angle and
        translation are expressed in the y-up gel frame.
        """
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if len(src) < 2:
            raise DegenerateFitError(f"need at least 2 correspondences, got {len(src)}")
        origin = np.asarray(origin, dtype=np.float64)
        sg = _to_gel(src.copy(), origin)
        dg = _to_gel(dst.copy(), origin)
        (s, theta, t), _ = ransac_similarity(sg, dg, threshold,
                                             seed=self._stage_seed(seed, 1),
                                             max_iters=self.constrained_iters)
        return TransformParams(s=s, theta=theta, t=t,
                               origin=(float(origin[0]), float(origin[1])))

    def refine_transform_origin(self, transform: TransformParams,
                                max_shift_px: float) -> TransformParams:
        """Move the origin to the similarity's fixed point when it lies
        within max_shift_px of the assumed origin.

        The origin is only approximated by the mean contact point; a strong
        rotation or scale about a slightly different center decomposes into
        the same rotation/scale plus a spurious translation that can outvote
        it. About its own fixed point the transform has no translation at
        all. Translations proper have no nearby fixed point and pass through
        unchanged.
        """
        s, theta = transform.s, transform.theta
        m = np.eye(2) - compose_transform(s, theta, (0.0, 0.0))[:2, :2]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-4:
            return transform  # near-identity rotation/scale: translation-like
        o_star = np.linalg.solve(m, np.asarray(transform.t))
        if np.hypot(*o_star) > max_shift_px:
            return transform  # fixed point far from the touch: a real push
        ox, oy = transform.origin
        return TransformParams(s=s, theta=theta, t=(0.0, 0.0),
                               origin=(ox + o_star[0], oy - o_star[1]))

    def classify(self, transform: TransformParams) -> GestureType:
        """Name the dominant component of a similarity transform."""
        t_norm = float(np.hypot(*transform.t)) / self.radius_px
        scores = (self.w_translation * t_norm,
                  self.w_scale * abs(transform.s - 1.0),
                  self.w_rotation * abs(transform.theta))
        pick = int(np.argmax(scores))
        if pick == 0:
            return GestureType.PUSH
        if pick == 1:
            return GestureType.ZOOM if transform.s > 1.0 else GestureType.PINCH
        return GestureType.TWIST_CCW if transform.theta > 0 else GestureType.TWIST_CW

    def intensity_mm(self, displacements: np.ndarray) -> float:
        """Mean displacement magnitude, converted to millimeters."""
        if len(displacements) == 0:
            return 0.0
        return float(np.linalg.norm(displacements, axis=1).mean()) / self.px_per_mm

    def contact_set(self, positions: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Ids of markers within radius_px of any contact point."""
        d2 = ((positions[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        return np.flatnonzero(d2.min(axis=1) <= self.radius_px ** 2)

    def predict(self, anchors: np.ndarray, positions: np.ndarray,
                seed: int | None = None) -> GestureEstimate:
        """Full per-batch estimate from a displacement-field snapshot."""
        detection = self.detect_contact_points(anchors, positions, seed=seed)
        return self.estimate_from_detection(anchors, positions, detection, seed=seed)

    def estimate_from_detection(self, anchors: np.ndarray, positions: np.ndarray,
                                detection: ContactDetection,
                                seed: int | None = None) -> GestureEstimate:
        if len(detection.points) == 0:
            return GestureEstimate(gesture_type=GestureType.NO_GESTURE,
                                   outlier_count=len(detection.outlier_ids))
        members = self.contact_set(positions, detection.points)
        v = positions[members] - anchors[members]
        intensity = self.intensity_mm(v)
        origin = detection.points.mean(axis=0)
        if len(members) == 1:
            vg = v[0]
            transform = TransformParams(s=1.0, theta=0.0, t=(float(vg[0]), float(-vg[1])),
                                        origin=(float(origin[0]), float(origin[1])))
        else:
            threshold = self.a * float(np.linalg.norm(v, axis=1).mean())
            try:
                transform = self.fit_constrained_homography(
                    anchors[members], positions[members], origin, threshold, seed=seed)
            except DegenerateFitError:
                return GestureEstimate(gesture_type=GestureType.NO_GESTURE,
                                       outlier_count=len(detection.outlier_ids))
            if len(detection.points) >= 2:
                # The rotation/scale center plausibly lies within the touch
                # spread; with one contact the origin needs no correction.
                pts = detection.points
                spread = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2).max()
                transform = self.refine_transform_origin(
                    transform, max_shift_px=max(self.radius_px, 0.75 * spread))
        gesture = self.classify(transform)
        return GestureEstimate(gesture_type=gesture,
                               contact_points=detection.points,
                               intensity_mm=intensity,
                               transform=transform,
                               outlier_count=len(detection.outlier_ids))

    def _stage_seed(self, seed: int | None, stage: int) -> int:
        base = self.seed if seed is None else seed
        return (int(base) * 7919 + stage) & 0x7FFFFFFF
