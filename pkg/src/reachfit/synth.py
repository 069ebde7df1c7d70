"""Synthetic handover trials with known ground truth.

Each generated trial scripts a full pick-up / transfer sequence: the giver
hand approaches the resting object (distance minimum at t_OGC), carries it
through a preamble whose speed profile realizes Case 1 or Case 2, executes
the reach along an exactly known model path (elliptical or hyperbolic arc,
straight chord, or decoupled-minimum-jerk curve), and retracts after the
receiver converges at t_RGC. Marker noise is isotropic Gaussian applied to
the raw samples, before any filtering.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadSpec
from .geometry import Plane
from .models import normalize_conic, solve_min_jerk, _quintic_system
from .signal import HandoverTrial, ReachCase, SpeedProfile, Trajectory, detect_reach_start

_BLEND_S = 0.15  # grasp/release offset blend duration, s


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for one synthetic trial."""

    kind: str = "conic"  # conic | mj | dmj
    conic_family: str = "ellipse"  # ellipse | hyperbola (conic kind only)
    case: str = "Case1"  # Case1 | Case2 preamble shape
    rate_hz: float = 100.0
    noise_mm: float = 0.0
    reach_duration: float = 1.0
    preamble_duration: float = 0.6
    approach_duration: float = 0.7
    retract_duration: float = 0.35
    seed: int = 0
    # conic-arc geometry (in-plane mm / radians)
    ellipse_a: float = 300.0
    ellipse_b: float = 150.0
    arc_start: float = 0.3
    arc_span: float = 2.4
    hyperbola_a: float = 180.0
    hyperbola_b: float = 260.0
    hyperbola_span: float = 1.1
    plane_tilt: float = 0.3  # rotation of the (near-vertical) reach plane, rad
    plane_azimuth: float = 0.5
    # mj / dmj geometry
    chord: tuple = (480.0, 320.0, 140.0)
    dmj_ratio: float = 0.5
    # scene layout (world mm, z up)
    reach_start: tuple = (250.0, -120.0, 1050.0)

    def __post_init__(self):
        if self.kind not in ("conic", "mj", "dmj"):
            raise BadSpec(f"unknown kind {self.kind!r}")
        if self.conic_family not in ("ellipse", "hyperbola"):
            raise BadSpec(f"unknown conic family {self.conic_family!r}")
        if self.case not in ("Case1", "Case2"):
            raise BadSpec(f"case must be Case1 or Case2, got {self.case!r}")
        if self.noise_mm < 0:
            raise BadSpec("noise_mm must be >= 0")
        if self.rate_hz <= 20.0:
            raise BadSpec("sampling rate must exceed twice the 10 Hz filter cutoff")
        for name in ("reach_duration", "preamble_duration", "approach_duration",
                     "retract_duration"):
            if getattr(self, name) <= 0:
                raise BadSpec(f"{name} must be positive")
        if not 0.05 <= self.dmj_ratio <= 1.0:
            raise BadSpec("dmj_ratio must lie in [0.05, 1]")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """What the generator actually embedded in the trial."""

    trial_id: str
    case: ReachCase
    t_ogc: float
    t_start: float
    t_rgc: float
    reach_timestamps: np.ndarray
    reach_positions: np.ndarray  # noiseless object samples on [t_start, t_rgc]
    plane: Plane | None
    plane_basis: np.ndarray | None  # rows u, v, n of the embedding frame
    plane_origin: np.ndarray | None  # world point at 2D origin of the arc frame
    conic_coeffs: np.ndarray | None  # normalized, in the (u, v) arc frame
    chord_endpoints: tuple | None
    dmj_ratio: float | None
    spec: SynthSpec = field(repr=False, default=None)


def _scalar_quintic(s0, v0, a0, s1, v1, a1, duration):
    rhs = np.array([s0, v0, a0, s1, v1, a1], dtype=float)
    return np.linalg.solve(_quintic_system(duration), rhs)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _mj_segment(p0, p1, duration, t):
    """Rest-to-rest minimum-jerk interpolation between 3D points."""
    tau = np.clip(np.asarray(t, dtype=float) / duration, 0.0, 1.0)
    s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
    return np.asarray(p0) + np.outer(s, np.asarray(p1) - np.asarray(p0))

def _plane_basis(tilt, azimuth):
    """Near-vertical reach plane: u ~ horizontal advance, v ~ up, n ~ sideways."""
    ct, st = math.cos(tilt), math.sin(tilt)
    ca, sa = math.cos(azimuth), math.sin(azimuth)
    rot_z = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    rot_x = np.array([[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]])
    rot = rot_z @ rot_x
    u = rot @ np.array([1.0, 0.0, 0.0])
    v = rot @ np.array([0.0, 0.0, 1.0])
    n = rot @ np.array([0.0, -1.0, 0.0])
    return u, v, n


def _arc_2d(spec):
    """In-plane reach arc samples and its implicit conic coefficients."""
    s = np.linspace(0.0, 1.0, 4097)
    if spec.conic_family == "ellipse":
        theta = spec.arc_start + spec.arc_span * s
        pts = np.column_stack(
            [spec.ellipse_a * np.cos(theta), spec.ellipse_b * np.sin(theta)]
        )
        coeffs = np.array(
            [1.0 / spec.ellipse_a**2, 0.0, 1.0 / spec.ellipse_b**2, 0.0, 0.0, -1.0]
        )
    else:
        # Lower hyperbola branch flipped so the apex points up (hump shape).
        u = spec.hyperbola_span * (2.0 * s - 1.0)
        pts = np.column_stack(
            [spec.hyperbola_b * np.sinh(u), -spec.hyperbola_a * np.cosh(u)]
        )
        coeffs = np.array(
            [-1.0 / spec.hyperbola_b**2, 0.0, 1.0 / spec.hyperbola_a**2, 0.0, 0.0, -1.0]
        )
    return pts, normalize_conic(coeffs)


def _reach_path(spec):
    """Dense 3D reach path plus ground-truth geometry records.

    Returns (points (M,3), plane info dict).
    """
    anchor = np.asarray(spec.reach_start, dtype=float)
    if spec.kind == "conic":
        pts2, coeffs = _arc_2d(spec)
        u, v, n = _plane_basis(spec.plane_tilt, spec.plane_azimuth)
        origin = anchor - u * pts2[0, 0] - v * pts2[0, 1]
        world = origin + np.outer(pts2[:, 0], u) + np.outer(pts2[:, 1], v)
        return world, {
            "plane": Plane(origin=anchor, normal=n),
            "basis": np.vstack([u, v, n]),
            "origin": origin,
            "coeffs": coeffs,
            "chord": None,
            "ratio": None,
        }
    chord = np.asarray(spec.chord, dtype=float)
    end = anchor + chord
    if spec.kind == "mj":
        s = np.linspace(0.0, 1.0, 4097)
        world = anchor + np.outer(s, chord)
        return world, {
            "plane": None, "basis": None, "origin": None, "coeffs": None,
            "chord": (anchor, end), "ratio": None,
        }
    # dmj: world-z decoupled quintics; the path lives in the vertical plane
    # through the chord's horizontal direction.
    model = _dmj_curve(anchor, end, spec.reach_duration, spec.dmj_ratio)
    world = model["positions"]
    horiz = np.array([chord[0], chord[1], 0.0])
    norm = np.linalg.norm(horiz)
    if norm < 1e-9:
        raise BadSpec("dmj chord needs a horizontal component")
    u = horiz / norm
    n = np.cross(u, [0.0, 0.0, 1.0])
    return world, {
        "plane": Plane(origin=anchor, normal=n),
        "basis": np.vstack([u, [0.0, 0.0, 1.0], n]),
        "origin": anchor,
        "coeffs": None,
        "chord": (anchor, end),
        "ratio": spec.dmj_ratio,
    }


def _dmj_curve(p0, p1, duration, ratio, n=4097):
    t = np.linspace(0.0, duration, n)
    xy = solve_min_jerk([p0[0], p0[1], 0.0], [p1[0], p1[1], 0.0], duration)
    z = solve_min_jerk([p0[2], 0.0, 0.0], [p1[2], 0.0, 0.0], ratio * duration)
    tz = np.minimum(t, ratio * duration)
    pos = np.column_stack(
        [
            np.polynomial.polynomial.polyval(t, xy.coeffs[0]),
            np.polynomial.polynomial.polyval(t, xy.coeffs[1]),
            np.polynomial.polynomial.polyval(tz, z.coeffs[0]),
        ]
    )
    return {"positions": pos, "times": t}


def _arc_length_param(points):
    """Cumulative arc length and an interpolator s -> point."""
    deltas = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(deltas)])

    def interp(s):
        s = np.clip(s, 0.0, cum[-1])
        return np.column_stack([np.interp(s, cum, points[:, i]) for i in range(3)])

    return float(cum[-1]), interp


def generate_trial(spec, trial_id=None):
    """Build one (HandoverTrial, GroundTruth) pair from a spec.

    Deterministic for a fixed seed. The noiseless construction is
    self-checked: the reach-start detector run on the clean speed profile
    must reproduce the constructed case and onset exactly, else BadSpec.
    """
    if trial_id is None:
        trial_id = f"synth-{spec.kind}-{spec.case.lower()}-{spec.seed:05d}"
    rng = np.random.default_rng(spec.seed)
    dt = 1.0 / spec.rate_hz
    n_a = max(2, int(round(spec.approach_duration * spec.rate_hz)))
    n_p = max(2, int(round(spec.preamble_duration * spec.rate_hz)))
    n_r = max(4, int(round(spec.reach_duration * spec.rate_hz)))
    n_ret = max(2, int(round(spec.retract_duration * spec.rate_hz)))
    n_total = n_a + n_p + n_r + n_ret + 1
    times = np.arange(n_total) * dt
    i_ogc, i_start, i_rgc = n_a, n_a + n_p, n_a + n_p + n_r
    t_ogc, t_start, t_rgc = times[i_ogc], times[i_start], times[i_rgc]
    t_p = t_start - t_ogc
    t_r = t_rgc - t_start

    path_pts, info = _reach_path(spec)
    length, path_at = _arc_length_param(path_pts)
    p_s = path_pts[0]
    p_e = path_pts[-1]

    # Reach timing: quintic arc-length schedule entering at the junction speed
    # with a deliberate acceleration kink so the onset is a sharp speed minimum.
    mean_speed = length / t_r
    v_junction = (0.28 if spec.case == "Case1" else 1.5) * mean_speed
    kink = 2.0 * length / t_r**2
    reach_sched = _scalar_quintic(0.0, v_junction, kink, length, 0.0, 0.0, t_r)

    # Preamble: straight carry line ending at the reach start.
    l_pre = (0.30 if spec.case == "Case1" else 0.40) * length
    pre_dir = np.array([-0.35, 0.25, -0.9]) if spec.case == "Case1" else np.array(
        [-0.75, -0.35, 0.4]
    )
    pre_dir = pre_dir / np.linalg.norm(pre_dir)
    p_pick = p_s - l_pre * pre_dir
    pre_sched = _scalar_quintic(0.0, 0.0, 0.0, l_pre, v_junction, -kink, t_p)

    poly = np.polynomial.polynomial
    for sched, horizon in ((reach_sched, t_r), (pre_sched, t_p)):
        grid = np.linspace(0.0, horizon, 512)
        speeds = poly.polyval(grid, poly.polyder(sched))
        if speeds.min() < -1e-9:
            raise BadSpec("timing schedule is not monotone; adjust durations")

    # Object.
    obj = np.empty((n_total, 3))
    obj[: i_ogc + 1] = p_pick
    tp_rel = times[i_ogc + 1 : i_start + 1] - t_ogc
    obj[i_ogc + 1 : i_start + 1] = p_pick + np.outer(
        poly.polyval(tp_rel, pre_sched), pre_dir
    )
    tr_rel = times[i_start + 1 : i_rgc + 1] - t_start
    obj[i_start + 1 : i_rgc + 1] = path_at(poly.polyval(tr_rel, reach_sched))
    tret_rel = times[i_rgc + 1 :] - t_rgc
    retreat_obj = np.array([180.0, 110.0, -30.0])
    obj[i_rgc + 1 :] = _mj_segment(p_e, p_e + retreat_obj, times[-1] - t_rgc, tret_rel)

    # Giver hand: approach, then carry offset blending grasp dip -> carry.
    carry = np.array([0.0, 0.0, 35.0])
    dip = np.array([0.0, 0.0, 25.0])
    hand0 = p_pick + np.array([-260.0, 160.0, 130.0])
    giver = np.empty((n_total, 3))
    giver[: i_ogc + 1] = _mj_segment(hand0, p_pick + dip, t_ogc, times[: i_ogc + 1])
    blend = _smoothstep((times[i_ogc + 1 : i_rgc + 1] - t_ogc) / _BLEND_S)
    giver[i_ogc + 1 : i_rgc + 1] = (
        obj[i_ogc + 1 : i_rgc + 1] + dip + blend[:, None] * (carry - dip)
    )
    retreat_giver = np.array([-230.0, -120.0, -40.0])
    giver[i_rgc + 1 :] = _mj_segment(
        p_e + carry, p_e + carry + retreat_giver, times[-1] - t_rgc, tret_rel
    )

    # Receiver hand: waits, converges to a dip offset at transfer, then
    # follows the object with the offset relaxing outward.
    standby = np.array([450.0, 280.0, -60.0])
    recv_dir = standby / np.linalg.norm(standby)
    recv_dip = p_e + 18.0 * recv_dir
    receiver = np.empty((n_total, 3))
    receiver[: i_start + 1] = p_e + standby
    receiver[i_start + 1 : i_rgc + 1] = _mj_segment(
        p_e + standby, recv_dip, t_r, times[i_start + 1 : i_rgc + 1] - t_start
    )
    blend_out = _smoothstep(tret_rel / _BLEND_S)
    receiver[i_rgc + 1 :] = (
        obj[i_rgc + 1 :]
        + 18.0 * recv_dir
        + blend_out[:, None] * (12.0 * recv_dir)
    )

    # Self-check the construction on the clean profile before adding noise.
    clean_speed = SpeedProfile(
        times, np.linalg.norm(np.gradient(obj, times, axis=0), axis=1)
    )
    found_t, found_case = detect_reach_start(clean_speed, t_ogc, t_rgc)
    if found_case.value != spec.case or abs(found_t - t_start) > dt / 2:
        raise BadSpec(
            f"constructed profile detects {found_case.value} at {found_t:.3f}s, "
            f"wanted {spec.case} at {t_start:.3f}s"
        )

    def noisy(arr):
        if spec.noise_mm == 0:
            return arr.copy()
        return arr + rng.normal(0.0, spec.noise_mm, arr.shape)

    trial = HandoverTrial(
        trial_id=trial_id,
        giver_hand=Trajectory(times, noisy(giver)),
        receiver_hand=Trajectory(times, noisy(receiver)),
        object=Trajectory(times, noisy(obj)),
    )
    truth = GroundTruth(
        trial_id=trial_id,
        case=ReachCase(spec.case),
        t_ogc=float(t_ogc),
        t_start=float(t_start),
        t_rgc=float(t_rgc),
        reach_timestamps=times[i_start : i_rgc + 1].copy(),
        reach_positions=obj[i_start : i_rgc + 1].copy(),
        plane=info["plane"],
        plane_basis=info["basis"],
        plane_origin=info["origin"],
        conic_coeffs=info["coeffs"],
        chord_endpoints=info["chord"],
        dmj_ratio=info["ratio"],
        spec=spec,
    )
    return trial, truth


def vary_spec(spec, rng):
    """Deterministic per-trial jitter of the scene geometry (for datasets)."""
    scale = 1.0 + rng.uniform(-0.15, 0.15)
    return replace(
        spec,
        reach_start=tuple(np.asarray(spec.reach_start) + rng.uniform(-60, 60, 3)),
        plane_tilt=spec.plane_tilt + rng.uniform(-0.15, 0.15),
        plane_azimuth=spec.plane_azimuth + rng.uniform(-0.4, 0.4),
        ellipse_a=spec.ellipse_a * scale,
        ellipse_b=spec.ellipse_b * (1.0 + rng.uniform(-0.15, 0.15)),
        hyperbola_a=spec.hyperbola_a * scale,
        hyperbola_b=spec.hyperbola_b * (1.0 + rng.uniform(-0.15, 0.15)),
        chord=tuple(np.asarray(spec.chord) * (1.0 + rng.uniform(-0.2, 0.2, 3))),
        dmj_ratio=float(np.clip(spec.dmj_ratio + rng.uniform(-0.1, 0.1), 0.1, 0.95)),
        reach_duration=spec.reach_duration * (1.0 + rng.uniform(-0.1, 0.1)),
    )


def generate_dataset(base_specs, n_trials, seed=0):
    """n_trials (trial, truth) pairs cycling over base specs with jittered geometry."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_trials):
        base = base_specs[i % len(base_specs)]
        varied = vary_spec(replace(base, seed=int(rng.integers(0, 2**31 - 1))), rng)
        out.append(generate_trial(varied, trial_id=f"synth-{i:05d}"))
    return out


def make_mixture_dataset(
    n_trials,
    mixture=(("conic", 0.6), ("dmj", 0.35), ("mj", 0.05)),
    case2_fraction=0.26,
    hyperbola_fraction=0.5,
    noise_mm=1.0,
    seed=0,
    base=SynthSpec(),
):
    """Dataset mixing reach kinds with jittered geometry; deterministic per seed."""
    rng = np.random.default_rng(seed)
    kinds = [k for k, _ in mixture]
    weights = np.array([w for _, w in mixture], dtype=float)
    if weights.sum() <= 0:
        raise BadSpec("mixture weights must sum to a positive value")
    weights = weights / weights.sum()
    out = []
    for i in range(n_trials):
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        case = "Case2" if rng.uniform() < case2_fraction else "Case1"
        family = "hyperbola" if rng.uniform() < hyperbola_fraction else "ellipse"
        spec = replace(
            base,
            kind=kind,
            case=case,
            conic_family=family,
            noise_mm=noise_mm,
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        out.append(generate_trial(vary_spec(spec, rng), trial_id=f"synth-{i:05d}"))
    return out
