"""The three reaching-motion models: conic sections and (decoupled) minimum jerk.

Conic fits solve the algebraic least-squares problem with an SVD on the
[x^2, xy, y^2, x, y, 1] design matrix. Minimum-jerk trajectories are
quintics determined by boundary position/velocity/acceleration; the
decoupled variant runs independent quintics for the vertical axis and the
horizontal plane with different durations.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    BadDuration,
    DegenerateInput,
    NotAnEllipse,
    OutOfRange,
    TooShort,
)
from .geometry import COLLINEAR_SV_RATIO, PlaneFrame, plane_frame

_SIGN_EPS = 1e-12


class ConicClass(enum.Enum):
    ELLIPSE = "Ellipse"
    CIRCLE = "Circle"  # A ~= C, B ~= 0; counted with ellipses in reports
    HYPERBOLA = "Hyperbola"
    PARABOLA = "Parabola"

    @property
    def is_elliptical(self):
        return self in (ConicClass.ELLIPSE, ConicClass.CIRCLE)


def normalize_conic(coeffs):
    """Scale a 6-vector (A..F) to unit norm with the first nonzero entry positive."""
    c = np.asarray(coeffs, dtype=float).reshape(6)
    norm = np.linalg.norm(c)
    if norm < _SIGN_EPS:
        raise DegenerateInput("zero conic coefficient vector")
    c = c / norm
    for value in c:
        if abs(value) > _SIGN_EPS:
            return c if value > 0 else -c
    return c


@dataclass(frozen=True, eq=False)
class ConicModel:
    """Implicit conic A x^2 + B xy + C y^2 + D x + E y + F = 0 in a plane frame.

    Coefficients are unit-normalized with the first nonzero entry positive.
    ``frame`` maps the fitting plane into world coordinates (may be None for
    purely 2D work); ``conic_class`` stays None until classified.
    """

    coeffs: np.ndarray
    frame: PlaneFrame | None = None
    conic_class: ConicClass | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", normalize_conic(self.coeffs))

    def algebraic_residual(self, points_2d):
        """Signed value of the conic polynomial at (N,2) in-plane points."""
        pts = np.asarray(points_2d, dtype=float).reshape(-1, 2)
        u, v = pts[:, 0], pts[:, 1]
        a, b, c, d, e, f = self.coeffs
        return a * u * u + b * u * v + c * v * v + d * u + e * v + f

    def gradient(self, points_2d):
        pts = np.asarray(points_2d, dtype=float).reshape(-1, 2)
        u, v = pts[:, 0], pts[:, 1]
        a, b, c, d, e, f = self.coeffs
        return np.column_stack([2 * a * u + b * v + d, b * u + 2 * c * v + e])


@dataclass(frozen=True)
class EllipseParams:
    """Geometric ellipse: center, semi-axes a >= b > 0, inclination in (-pi/2, pi/2]."""

    center: np.ndarray
    a: float
    b: float
    tau: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(2)
        if not (self.a >= self.b > 0):
            raise NotAnEllipse(f"axes must satisfy a >= b > 0, got a={self.a}, b={self.b}")
        if not (-math.pi / 2 < self.tau <= math.pi / 2):
            raise NotAnEllipse(f"inclination {self.tau} outside (-pi/2, pi/2]")
        object.__setattr__(self, "center", center)


def fit_conic(points_2d, frame=None):
    """Least-squares conic through >=6 in-plane points (class left unset).

    Coordinates are centered and scaled to RMS radius sqrt(2) before the
    SVD (the raw mm-scale design matrix is badly conditioned), then the
    coefficients are mapped back and canonically normalized.
    """
    pts = np.asarray(points_2d, dtype=float).reshape(-1, 2)
    if len(pts) < 6:
        raise DegenerateInput(f"conic fit needs >=6 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInput("points contain non-finite coordinates")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[0] < _SIGN_EPS or svals[1] / svals[0] < COLLINEAR_SV_RATIO:
        raise DegenerateInput("points are collinear; conic fit is rank-deficient")
    scale = math.sqrt(np.mean(np.sum(centered**2, axis=1)) / 2.0)
    u = centered[:, 0] / scale
    v = centered[:, 1] / scale
    design = np.column_stack([u * u, u * v, v * v, u, v, np.ones(len(u))])
    _, _, vt = np.linalg.svd(design, full_matrices=False)
    ap, bp, cp, dp, ep, fp = vt[-1]

    cx, cy = centroid
    s = scale
    a = ap / s**2
    b = bp / s**2
    c = cp / s**2
    d = dp / s - (2 * ap * cx + bp * cy) / s**2
    e = ep / s - (bp * cx + 2 * cp * cy) / s**2
    f = fp + (ap * cx**2 + bp * cx * cy + cp * cy**2) / s**2 - (dp * cx + ep * cy) / s
    return ConicModel(coeffs=np.array([a, b, c, d, e, f]), frame=frame)


def classify_conic(model, tol=1e-6):
    """Discriminant classification: ellipse (<0), parabola (~0), hyperbola (>0).

    The discriminant B^2 - 4AC is evaluated with (A, B, C) rescaled to a unit
    quadratic part, which makes the parabola tolerance invariant to both
    coefficient scaling and coordinate units (on the raw unit 6-vector the
    constant term swamps mm-scale quadratic coefficients and everything would
    land inside any fixed tolerance). The circle special case (A ~= C, B ~= 0)
    is flagged separately and counts as elliptical.
    """
    quad = model.coeffs[:3]
    qnorm = np.linalg.norm(quad)
    if qnorm < _SIGN_EPS:
        return ConicClass.PARABOLA  # no quadratic part: degenerate line
    a, b, c = quad / qnorm
    disc = b * b - 4 * a * c
    if abs(disc) <= tol:
        return ConicClass.PARABOLA
    if disc > tol:
        return ConicClass.HYPERBOLA
    if abs(a - c) <= tol and abs(b) <= tol:
        return ConicClass.CIRCLE
    return ConicClass.ELLIPSE


def conic_to_ellipse_params(model):
    """Geometric center/axes/inclination of an elliptical conic."""
    if not classify_conic(model).is_elliptical:
        raise NotAnEllipse("conic discriminant is not elliptical")
    a, b, c, d, e, f = model.coeffs
    full = np.array([[a, b / 2, d / 2], [b / 2, c, e / 2], [d / 2, e / 2, f]])
    quad = full[:2, :2]
    det_quad = np.linalg.det(quad)
    if det_quad <= 0:
        raise NotAnEllipse("quadratic part is not positive definite")
    center = np.linalg.solve(quad, [-d / 2, -e / 2])
    k = -np.linalg.det(full) / det_quad
    evals, evecs = np.linalg.eigh(quad)
    axes_sq = k / evals
    if np.any(axes_sq <= 0):
        raise NotAnEllipse("imaginary ellipse (no real points)")
    major = math.sqrt(axes_sq[0])  # eigh sorts ascending, small eigenvalue = long axis
    minor = math.sqrt(axes_sq[1])
    tau = math.atan2(evecs[1, 0], evecs[0, 0])
    if tau <= -math.pi / 2:
        tau += math.pi
    elif tau > math.pi / 2:
        tau -= math.pi
    if abs(major - minor) <= 1e-12 * major:
        tau = 0.0
    return EllipseParams(center=center, a=major, b=minor, tau=tau)


def ellipse_to_conic(params, frame=None):
    """Implicit normalized coefficients of a geometric ellipse (round-trip helper)."""
    ct, st = math.cos(params.tau), math.sin(params.tau)
    ia2, ib2 = 1.0 / params.a**2, 1.0 / params.b**2
    a = ct * ct * ia2 + st * st * ib2
    b = 2 * ct * st * (ia2 - ib2)
    c = st * st * ia2 + ct * ct * ib2
    xc, yc = params.center
    d = -2 * a * xc - b * yc
    e = -b * xc - 2 * c * yc
    f = a * xc * xc + b * xc * yc + c * yc * yc - 1.0
    return ConicModel(coeffs=np.array([a, b, c, d, e, f]), frame=frame)


def ellipse_point(params, theta):
    """Parametric ellipse point(s) for angle(s) theta, in-plane coordinates."""
    theta = np.asarray(theta, dtype=float)
    ct, st = math.cos(params.tau), math.sin(params.tau)
    x = params.a * np.cos(theta)
    y = params.b * np.sin(theta)
    return np.stack(
        [params.center[0] + ct * x - st * y, params.center[1] + st * x + ct * y],
        axis=-1,
    )


def generate_ellipse_path(params, theta_values, frame):
    """3D points of the parametric ellipse at the given theta values.

    The time dependence of theta is left entirely to the caller.
    """
    pts2 = ellipse_point(params, np.asarray(theta_values, dtype=float).reshape(-1))
    from .geometry import lift_from_plane

    return lift_from_plane(pts2, frame)


# ---------------------------------------------------------------------------
# Minimum jerk


@dataclass(frozen=True, eq=False)
class MinJerkModel:
    """Per-axis quintic r(t) = a0 + a1 t + ... + a5 t^5 over [0, t_f].

    ``coeffs`` is (3, 6), ascending powers, one row per world axis.
    """

    coeffs: np.ndarray
    t_f: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(3, 6)
        if self.t_f <= 0:
            raise BadDuration(f"duration must be positive, got {self.t_f}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def start(self):
        return self.position(0.0)

    @property
    def end(self):
        return self.position(self.t_f)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([npoly.polyval(t, c) for c in self.coeffs], axis=-1)

    def derivative(self, t, order=1):
        t = np.asarray(t, dtype=float)
        return np.stack(
            [npoly.polyval(t, npoly.polyder(c, order)) for c in self.coeffs], axis=-1
        )


def _quintic_system(t_f):
    return np.array(
        [
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, t_f, t_f**2, t_f**3, t_f**4, t_f**5],
            [0, 1, 2 * t_f, 3 * t_f**2, 4 * t_f**3, 5 * t_f**4],
            [0, 0, 2, 6 * t_f, 12 * t_f**2, 20 * t_f**3],
        ]
    )


def solve_min_jerk(p0, pf, t_f, v0=None, vf=None, a0=None, af=None):
    """Quintic coefficients from boundary conditions (rest-to-rest by default).

    Solves the 6x6 linear system per axis. For zero boundary velocity and
    acceleration this reproduces the closed form
    r0 + (rf - r0) (10 tau^3 - 15 tau^4 + 6 tau^5) with tau = t / t_f.
    """
    if t_f <= 0:
        raise BadDuration(f"duration must be positive, got {t_f}")
    zeros = np.zeros(3)

    def vec(x):
        return zeros if x is None else np.asarray(x, dtype=float).reshape(3)

    rhs = np.vstack([vec(p0), vec(v0), vec(a0), vec(pf), vec(vf), vec(af)])
    coeffs = np.linalg.solve(_quintic_system(t_f), rhs)
    return MinJerkModel(coeffs=coeffs.T, t_f=float(t_f))


def _check_time_range(t, t_max):
    t = np.asarray(t, dtype=float)
    slack = 1e-9 * max(t_max, 1.0)
    if np.any(t < -slack) or np.any(t > t_max + slack):
        raise OutOfRange(f"time outside [0, {t_max:g}] s")
    return np.clip(t, 0.0, t_max)


def eval_min_jerk(model, t, with_derivatives=False):
    """Position (and optionally velocity/acceleration/jerk) at time(s) t."""
    t = _check_time_range(t, model.t_f)
    pos = model.position(t)
    if not with_derivatives:
        return pos
    return pos, model.derivative(t, 1), model.derivative(t, 2), model.derivative(t, 3)


def jerk_cost(obj, t_f=None):
    """Integrated squared jerk S = integral |r'''(t)|^2 dt, mm^2/s^5.

    Exact polynomial integral for MinJerkModel; numeric third differences
    plus trapezoid integration for a sampled Trajectory (>=7 samples).
    """
    if isinstance(obj, MinJerkModel):
        upper = obj.t_f if t_f is None else float(t_f)
        if upper <= 0 or upper > obj.t_f * (1 + 1e-12):
            raise BadDuration(f"integration bound {upper} outside (0, t_f]")
        total = 0.0
        for c in obj.coeffs:
            jerk = npoly.polyder(c, 3)
            total += npoly.polyval(upper, npoly.polyint(npoly.polymul(jerk, jerk)))
        return float(total)

    traj = obj
    if len(traj) < 7:
        raise TooShort("numeric jerk cost needs >=7 samples")
    t = traj.timestamps
    if t_f is not None:
        keep = t <= t[0] + t_f + 1e-12
        t = t[keep]
    jerk = traj.positions[: len(t)]
    for _ in range(3):
        jerk = np.gradient(jerk, t, axis=0)
    return float(np.trapz(np.sum(jerk**2, axis=1), t))


def _times_positions(segment):
    if hasattr(segment, "timestamps"):
        return segment.timestamps, segment.positions
    times, pts = segment
    return (
        np.asarray(times, dtype=float).reshape(-1),
        np.asarray(pts, dtype=float).reshape(-1, 3),
    )


def fit_min_jerk(segment, bc_mode="rest"):
    """Minimum-jerk model for a reach segment: endpoints as boundaries.

    ``segment`` is a Trajectory or a (timestamps, positions) pair. ``bc_mode``
    "rest" pins boundary velocity/acceleration to zero (segments begin and
    end at speed minima); "estimated" uses finite-difference boundary
    velocities instead.
    """
    times, pts = _times_positions(segment)
    if len(pts) < 2:
        raise TooShort("minimum-jerk fit needs >=2 samples")
    t_f = float(times[-1] - times[0])
    if t_f <= 0:
        raise BadDuration("segment has no positive time span")
    if bc_mode == "rest":
        return solve_min_jerk(pts[0], pts[-1], t_f)
    if bc_mode == "estimated":
        vel = np.gradient(pts, times, axis=0)
        return solve_min_jerk(pts[0], pts[-1], t_f, v0=vel[0], vf=vel[-1])
    raise ValueError(f"unknown bc_mode {bc_mode!r}")


# ---------------------------------------------------------------------------
# Decoupled minimum jerk


@dataclass(frozen=True, eq=False)
class DecoupledMinJerkModel:
    """Independent quintics for the vertical axis (duration t_z) and the
    horizontal plane (duration t_xy >= t_z); the finished component holds its
    final value, so the composed 3D path is curved then straight.

    ``basis`` rotates world coordinates into the decoupling frame (identity
    when decoupling along world z). ``frame`` is the reach's best-fit plane
    frame used by planar error metrics.
    """

    coeffs_xy: np.ndarray
    t_xy: float
    coeffs_z: np.ndarray
    t_z: float
    basis: np.ndarray
    frame: PlaneFrame | None = None

    def __post_init__(self):
        cxy = np.asarray(self.coeffs_xy, dtype=float).reshape(2, 6)
        cz = np.asarray(self.coeffs_z, dtype=float).reshape(6)
        basis = np.asarray(self.basis, dtype=float).reshape(3, 3)
        if self.t_xy <= 0 or self.t_z <= 0:
            raise BadDuration("component durations must be positive")
        if self.t_z > self.t_xy * (1 + 1e-9):
            raise BadDuration(f"convention requires t_z <= t_xy, got {self.t_z} > {self.t_xy}")
        object.__setattr__(self, "coeffs_xy", cxy)
        object.__setattr__(self, "coeffs_z", cz)
        object.__setattr__(self, "basis", basis)

    @property
    def ratio(self):
        return self.t_z / self.t_xy

    @property
    def duration(self):
        return max(self.t_xy, self.t_z)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        tz = np.minimum(t, self.t_z)
        txy = np.minimum(t, self.t_xy)
        local = np.stack(
            [
                npoly.polyval(txy, self.coeffs_xy[0]),
                npoly.polyval(txy, self.coeffs_xy[1]),
                npoly.polyval(tz, self.coeffs_z),
            ],
            axis=-1,
        )
        return local @ self.basis

    def sample(self, n=2048):
        """(n, 3) world points along the composed curve at uniform times."""
        return self.position(np.linspace(0.0, self.duration, n))


def eval_decoupled_min_jerk(model, t):
    """Composed 3D position at time(s) t in [0, max(t_z, t_xy)]."""
    return model.position(_check_time_range(t, model.duration))


def _golden_section(fun, lo, hi, xtol):
    """Scalar golden-section minimize on [lo, hi]; returns best (x, f) evaluated."""
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fun(c), fun(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while hi - lo > xtol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fun(d)
        x, f = (c, fc) if fc <= fd else (d, fd)
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


def _build_dmj(local_p0, local_pf, t_total, ratio, basis, frame):
    z = solve_min_jerk(
        [local_p0[2], 0, 0], [local_pf[2], 0, 0], ratio * t_total
    ).coeffs[0]
    xy = solve_min_jerk(
        [local_p0[0], local_p0[1], 0], [local_pf[0], local_pf[1], 0], t_total
    ).coeffs[:2]
    return DecoupledMinJerkModel(
        coeffs_xy=xy, t_xy=t_total, coeffs_z=z, t_z=ratio * t_total,
        basis=basis, frame=frame,
    )


def fit_decoupled_min_jerk(
    reach,
    *,
    ratio_bounds=(0.05, 1.0),
    grid_points=40,
    ratio_tol=1e-3,
    curve_samples=2048,
    decouple="world",
):
    """Fit the decoupled model to a segmented reach by optimizing the duration ratio.

    Rest-to-rest quintics span the inlier endpoints; the ratio r = t_z / t_xy
    minimizing the mean closest-point distance from the inlier points to the
    composed curve is found on a uniform grid and refined by golden-section
    search. Flat objectives resolve toward r = 1 (the plain minimum-jerk
    limit). ``decouple`` selects world-z decoupling (default) or the reach's
    best-fit plane frame.
    """
    from .metrics import polyline_distances

    pts = reach.inlier_points
    if len(pts) < 2:
        raise TooShort("decoupled fit needs >=2 inlier points")
    times = reach.inlier_timestamps
    t_total = float(times[-1] - times[0])
    if t_total <= 0:
        raise BadDuration("inlier span has zero duration")
    frame = plane_frame(reach.plane)
    if decouple == "world":
        basis = np.eye(3)
    elif decouple == "plane":
        basis = frame.rotation
    else:
        raise ValueError(f"unknown decouple mode {decouple!r}")

    local = pts @ basis.T
    p0, pf = local[0], local[-1]
    lo, hi = ratio_bounds
    if not (0 < lo < hi <= 1.0):
        raise ValueError(f"ratio bounds must satisfy 0 < lo < hi <= 1, got {ratio_bounds}")

    sample_t = np.linspace(0.0, t_total, curve_samples)

    def error_at(ratio):
        tz = ratio * t_total
        z = solve_min_jerk([p0[2], 0, 0], [pf[2], 0, 0], tz).coeffs[0]
        xy = solve_min_jerk([p0[0], p0[1], 0], [pf[0], pf[1], 0], t_total).coeffs[:2]
        curve = np.stack(
            [
                npoly.polyval(sample_t, xy[0]),
                npoly.polyval(sample_t, xy[1]),
                npoly.polyval(np.minimum(sample_t, tz), z),
            ],
            axis=-1,
        )
        return float(polyline_distances(local, curve)[0].mean())

    grid = np.linspace(lo, hi, grid_points)
    errs = np.array([error_at(r) for r in grid])
    floor = errs.min()
    # Ties resolve toward the largest ratio so straight segments pick r = 1.
    best_i = int(np.flatnonzero(errs <= floor + 1e-12 * max(floor, 1.0))[-1])
    best_r, best_err = float(grid[best_i]), float(errs[best_i])

    b_lo = grid[max(best_i - 1, 0)]
    b_hi = grid[min(best_i + 1, len(grid) - 1)]
    if b_hi - b_lo > ratio_tol:
        gx, gf = _golden_section(error_at, float(b_lo), float(b_hi), ratio_tol)
        if gf < best_err:
            best_r, best_err = gx, gf
    return _build_dmj(p0, pf, t_total, best_r, basis, frame)
