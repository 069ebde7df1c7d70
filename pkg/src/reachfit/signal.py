"""Filtering, speed profiles, handover event detection, and reach segmentation.

A handover trial carries three co-sampled marker trajectories (giver hand,
receiver hand, object). Segmentation finds the object-giver contact time
t_OGC, the transfer time t_RGC, and the reach onset t_start, then keeps the
coplanar inlier points of the reach segment.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    BadCutoff,
    BadSampling,
    ConfigError,
    DegenerateProfile,
    MissingData,
    ReachFitError,
    TooShort,
)
from .geometry import Plane, fit_plane

UNIFORM_STEP_RTOL = 0.01


class ReachCase(enum.Enum):
    """Giver tendency after pick-up: direct reach vs. pull-in first."""

    CASE1 = "Case1"
    CASE2 = "Case2"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped 3D positions for one marker (seconds, mm).

    Timestamps must be finite, strictly increasing, and uniform within 1%.
    """

    timestamps: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise BadSampling(f"positions must be (N, 3), got {pos.shape}")
        if len(t) != len(pos):
            raise BadSampling("timestamps and positions lengths differ")
        if len(t) < 2:
            raise TooShort("trajectory needs >=2 samples")
        if not np.all(np.isfinite(t)):
            raise BadSampling("non-finite timestamps")
        if not np.all(np.isfinite(pos)):
            raise MissingData("non-finite position samples (marker gap)")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise BadSampling("timestamps must be strictly increasing")
        mean_dt = steps.mean()
        if np.max(np.abs(steps - mean_dt)) > UNIFORM_STEP_RTOL * mean_dt:
            raise BadSampling("sampling step varies by more than 1%")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.timestamps)

    @property
    def dt(self):
        return float(np.diff(self.timestamps).mean())

    @property
    def rate_hz(self):
        return 1.0 / self.dt

    @property
    def duration(self):
        return float(self.timestamps[-1] - self.timestamps[0])

    def slice_time(self, t0, t1):
        """Samples with t0 <= t <= t1 (small slack for float round-off)."""
        eps = 1e-9 + 1e-6 * self.dt
        mask = (self.timestamps >= t0 - eps) & (self.timestamps <= t1 + eps)
        return Trajectory(self.timestamps[mask], self.positions[mask])


@dataclass(frozen=True, eq=False)
class SpeedProfile:
    """Speed magnitude (mm/s) at each trajectory timestamp."""

    timestamps: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        v = np.asarray(self.speeds, dtype=float).reshape(-1)
        if len(t) != len(v):
            raise BadSampling("timestamps and speeds lengths differ")
        if np.any(v < 0):
            raise BadSampling("speeds must be non-negative")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "speeds", v)

    def __len__(self):
        return len(self.timestamps)


@dataclass(frozen=True, eq=False)
class HandoverTrial:
    """One handover: giver-hand, receiver-hand, and object trajectories, co-sampled."""

    trial_id: str
    giver_hand: Trajectory
    receiver_hand: Trajectory
    object: Trajectory

    def __post_init__(self):
        t = self.giver_hand.timestamps
        for other in (self.receiver_hand, self.object):
            if not np.array_equal(t, other.timestamps):
                raise BadSampling("trial trajectories must share identical timestamps")


@dataclass(frozen=True)
class InlierConfig:
    """Coplanarity filter parameters: window percent, vertical drop, sigma gate."""

    delta_pct: float = 20.0
    delta_mm: float = 5.0
    sigma_k: float = 3.0

    def __post_init__(self):
        if not 0 < self.delta_pct <= 100:
            raise ConfigError(f"delta_pct must be in (0, 100], got {self.delta_pct}")
        if self.delta_mm <= 0:
            raise ConfigError(f"delta_mm must be positive, got {self.delta_mm}")
        if self.sigma_k <= 0:
            raise ConfigError(f"sigma_k must be positive, got {self.sigma_k}")


@dataclass(frozen=True, eq=False)
class SegmentedReach:
    """Reach slice [t_start, t_end] of one trial plus coplanar inliers and plane."""

    trial_id: str
    t_ogc: float
    t_rgc: float
    t_start: float
    t_end: float
    case: ReachCase
    segment: Trajectory
    inlier_mask: np.ndarray
    plane: Plane
    flagged: bool = field(default=False)

    def __post_init__(self):
        if not (self.t_ogc <= self.t_start < self.t_end):
            raise DegenerateProfile(
                f"event times out of order: t_OGC={self.t_ogc}, "
                f"t_start={self.t_start}, t_end={self.t_end}"
            )
        mask = np.asarray(self.inlier_mask, dtype=bool)
        if len(mask) != len(self.segment):
            raise BadSampling("inlier mask length differs from segment")
        object.__setattr__(self, "inlier_mask", mask)

    @property
    def inlier_fraction(self):
        return float(self.inlier_mask.mean())

    @property
    def inlier_points(self):
        return self.segment.positions[self.inlier_mask]

    @property
    def inlier_timestamps(self):
        return self.segment.timestamps[self.inlier_mask]


def lowpass_filter(traj, cutoff_hz=10.0, order=4):
    """Zero-phase Butterworth low-pass per axis (forward-backward, unit DC gain)."""
    fs = traj.rate_hz
    if cutoff_hz <= 0 or cutoff_hz >= fs / 2:
        raise BadCutoff(f"cutoff {cutoff_hz} Hz outside (0, Nyquist={fs / 2:g}) Hz")
    b, a = butter(order, cutoff_hz, btype="low", fs=fs)
    padlen = 3 * max(len(a), len(b))
    if len(traj) <= padlen:
        raise TooShort(f"need >{padlen} samples to filter, got {len(traj)}")
    filtered = filtfilt(b, a, traj.positions, axis=0)
    return Trajectory(traj.timestamps, filtered)


def speed_profile(traj):
    """3D speed magnitude: central differences interior, one-sided at the ends."""
    if len(traj) < 3:
        raise TooShort("speed profile needs >=3 samples")
    velocity = np.gradient(traj.positions, traj.timestamps, axis=0)
    return SpeedProfile(traj.timestamps, np.linalg.norm(velocity, axis=1))


def min_distance_time(a, b, window=None):
    """Timestamp of the global minimum of |a(t) - b(t)|; earliest wins ties."""
    if not np.array_equal(a.timestamps, b.timestamps):
        raise BadSampling("min_distance_time needs co-sampled trajectories")
    dist = np.linalg.norm(a.positions - b.positions, axis=1)
    t = a.timestamps
    if window is not None:
        t0, t1 = window
        mask = (t >= t0) & (t <= t1)
        if not np.any(mask):
            raise BadSampling("window contains no samples")
        sub = np.flatnonzero(mask)
        return float(t[sub[np.argmin(dist[sub])]])
    return float(t[np.argmin(dist)])


def _local_minima(v):
    """Indices i with v[i] < v[i-1] and v[i] <= v[i+1] (plateau-tolerant right)."""
    if len(v) < 3:
        return np.array([], dtype=int)
    interior = np.arange(1, len(v) - 1)
    hit = (v[interior] < v[interior - 1]) & (v[interior] <= v[interior + 1])
    return interior[hit]


def detect_reach_start(speed, t_ogc, t_rgc, min_peak_speed=10.0):
    """Reach onset time and Case 1/2 label from the speed profile on [t_OGC, t_RGC].

    Case 2 when the contiguous >70%-of-peak region around the peak contains an
    interior local minimum (earliest such trough is t_start). Otherwise Case 1:
    the last local minimum before the peak below 50% of peak, falling back to
    t_OGC when none exists.
    """
    if t_ogc >= t_rgc:
        raise DegenerateProfile(f"t_OGC={t_ogc} must precede t_RGC={t_rgc}")
    t = speed.timestamps
    if t_ogc < t[0] - 1e-9 or t_rgc > t[-1] + 1e-9:
        raise BadSampling("speed profile does not cover [t_OGC, t_RGC]")
    sel = np.flatnonzero((t >= t_ogc - 1e-9) & (t <= t_rgc + 1e-9))
    v = speed.speeds[sel]
    tt = t[sel]
    peak = int(np.argmax(v))
    v_peak = v[peak]
    if v_peak < min_peak_speed:
        raise DegenerateProfile(f"peak speed {v_peak:.2f} mm/s below {min_peak_speed}")

    minima = _local_minima(v)

    # Contiguous region around the peak where speed exceeds 70% of peak.
    thr_hi = 0.7 * v_peak
    lo = peak
    while lo > 0 and v[lo - 1] > thr_hi:
        lo -= 1
    hi = peak
    while hi < len(v) - 1 and v[hi + 1] > thr_hi:
        hi += 1
    interior = minima[(minima > lo) & (minima < hi)]
    if len(interior) > 0:
        return float(tt[interior[0]]), ReachCase.CASE2

    before = minima[(minima < peak) & (v[minima] < 0.5 * v_peak)]
    if len(before) > 0:
        return float(tt[before[-1]]), ReachCase.CASE1
    return float(t_ogc), ReachCase.CASE1


def inlier_filter(segment, cfg=InlierConfig()):
    """Coplanar inlier mask and best-fit plane for a reach segment.

    A plane is fitted to a delta_pct% window centered on the first point
    (scanning backward from the vertical peak) that sits delta_mm below the
    peak; points within sigma_k window-residual standard deviations of that
    plane are inliers, and the plane is refitted on them.
    """
    n = len(segment)
    if n < 10:
        raise TooShort(f"inlier filter needs >=10 samples, got {n}")
    z = segment.positions[:, 2]
    peak = int(np.argmax(z))
    anchor = 0
    for i in range(peak - 1, -1, -1):
        if z[i] <= z[peak] - cfg.delta_mm:
            anchor = i
            break
    width = min(n, max(3, int(round(cfg.delta_pct / 100.0 * n))))
    lo = anchor - width // 2
    lo = min(max(lo, 0), n - width)
    window = segment.positions[lo : lo + width]
    plane0 = fit_plane(window)
    # Floor keeps noiseless planar segments fully inlying despite float round-off.
    sigma = max(float(plane0.signed_distance(window).std()), 1e-6)
    mask = np.abs(plane0.signed_distance(segment.positions)) <= cfg.sigma_k * sigma
    plane = fit_plane(segment.positions[mask])
    return mask, plane


def segment_trial(
    trial,
    cfg=InlierConfig(),
    *,
    cutoff_hz=10.0,
    filter_order=4,
    marker="object",
    min_peak_speed=10.0,
):
    """Full §-style segmentation of one trial into a SegmentedReach.

    Filters the marker streams (skipped when cutoff_hz is None), locates
    t_OGC/t_RGC as distance minima, finds the reach onset on the object (or
    giver-hand) speed profile, slices [t_start, t_RGC], and applies the
    coplanar inlier filter.
    """
    if marker not in ("object", "giver"):
        raise ConfigError(f"marker must be 'object' or 'giver', got {marker!r}")
    try:
        giver, receiver, obj = trial.giver_hand, trial.receiver_hand, trial.object
        if cutoff_hz is not None:
            giver = lowpass_filter(giver, cutoff_hz, filter_order)
            receiver = lowpass_filter(receiver, cutoff_hz, filter_order)
            obj = lowpass_filter(obj, cutoff_hz, filter_order)
        t_rgc = min_distance_time(giver, receiver)
        t_ogc = min_distance_time(giver, obj)
        if t_ogc >= t_rgc:
            raise DegenerateProfile(
                f"object contact at {t_ogc:.3f}s not before transfer at {t_rgc:.3f}s"
            )
        tracked = obj if marker == "object" else giver
        profile = speed_profile(tracked)
        t_start, case = detect_reach_start(profile, t_ogc, t_rgc, min_peak_speed)
        segment = tracked.slice_time(t_start, t_rgc)
        mask, plane = inlier_filter(segment, cfg)
        return SegmentedReach(
            trial_id=trial.trial_id,
            t_ogc=t_ogc,
            t_rgc=t_rgc,
            t_start=t_start,
            t_end=t_rgc,
            case=case,
            segment=segment,
            inlier_mask=mask,
            plane=plane,
            flagged=bool(mask.mean() < 0.5),
        )
    except ReachFitError as exc:
        raise type(exc)(f"trial {trial.trial_id!r}: {exc}") from None
