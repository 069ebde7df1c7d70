"""Correspondent points and the mean closest-point fitting error.

The error of a fitted model is the average Euclidean distance from each
data point to its correspondent point on the model: an unclamped line
projection for minimum jerk, an in-plane closest point for the conic
(whose curve lies exactly in the fitting plane), and a closest point on
the densely sampled composed curve for decoupled minimum jerk. A temporal
variant pairs each sample with the model evaluated at its timestamp
instead of the spatially closest point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLine, NoConicPointInRange, TooShort
from .geometry import project_to_plane
from .models import ConicModel, DecoupledMinJerkModel, MinJerkModel
from .signal import Trajectory

_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class FitError:
    """Per-point correspondent distances (mm) and their mean."""

    mean_mm: float
    per_point_mm: np.ndarray
    n_points: int

    @classmethod
    def from_distances(cls, distances):
        d = np.asarray(distances, dtype=float).reshape(-1)
        if len(d) == 0:
            raise TooShort("fit error needs >=1 point")
        return cls(mean_mm=float(d.mean()), per_point_mm=d, n_points=len(d))


def closest_point_on_line(p, p1, p2):
    """Orthogonal projection of p onto the infinite line through p1, p2 (unclamped)."""
    p = np.asarray(p, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    chord = p2 - p1
    denom = float(chord @ chord)
    if denom < _EPS:
        raise DegenerateLine("line endpoints coincide")
    return p1 - chord * (((p1 - p) @ chord) / denom)


def line_distances(points, p1, p2):
    """Distances and correspondent points for (N,d) points against a line."""
    pts = np.asarray(points, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    chord = p2 - p1
    denom = float(chord @ chord)
    if denom < _EPS:
        raise DegenerateLine("line endpoints coincide")
    t = (pts - p1) @ chord / denom
    closest = p1 + t[:, None] * chord
    return np.linalg.norm(pts - closest, axis=1), closest


def polyline_distances(points, curve, chunk_elems=4_000_000):
    """Exact closest-point distances from (N,d) points to a (M,d) polyline.

    Each query point is tested against every segment (clamped projection);
    ties go to the earliest segment. Works in 2D or 3D.
    """
    pts = np.asarray(points, dtype=float)
    crv = np.asarray(curve, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if crv.ndim != 2 or len(crv) < 2:
        raise TooShort("polyline needs >=2 samples")
    seg_a = crv[:-1]
    seg_v = crv[1:] - seg_a
    denom = np.einsum("ij,ij->i", seg_v, seg_v)
    safe = np.where(denom > 0, denom, 1.0)

    n = len(pts)
    dists = np.empty(n)
    closest = np.empty_like(pts)
    step = max(1, int(chunk_elems // max(len(seg_a), 1)))
    for s in range(0, n, step):
        block = pts[s : s + step][:, None, :]
        t = np.einsum("nmd,md->nm", block - seg_a[None], seg_v) / safe
        t = np.where(denom[None] > 0, np.clip(t, 0.0, 1.0), 0.0)
        q = seg_a[None] + t[..., None] * seg_v[None]
        d = np.linalg.norm(block - q, axis=-1)
        idx = np.argmin(d, axis=1)
        rows = np.arange(len(idx))
        dists[s : s + step] = d[rows, idx]
        closest[s : s + step] = q[rows, idx]
    return dists, closest


def closest_point_on_sampled_curve(p, curve):
    """Nearest point on a sampled curve (polyline) to a single query point."""
    dist, near = polyline_distances(np.asarray(p, dtype=float)[None, :], curve)
    return near[0]


# ---------------------------------------------------------------------------
# Conic closest points


def _canonical_conic(coeffs):
    """Rotate the conic into axis-aligned form lam_x x^2 + lam_y y^2 + dx x + dy y + f."""
    a, b, c, d, e, f = coeffs
    quad = np.array([[a, b / 2], [b / 2, c]])
    evals, evecs = np.linalg.eigh(quad)
    lin = np.array([d, e]) @ evecs
    return evals, lin, f, evecs


def _sample_solving_for_y(lam_x, lam_y, dx, dy, f, center_x, radius, n):
    """Conic samples by solving the quadratic in y over an x grid near center_x.

    Returns an (m, 2) array (possibly empty) of canonical-frame points.
    """
    tiny = 1e-14 * max(abs(lam_x), abs(lam_y), 1.0)
    xs = np.linspace(center_x - radius, center_x + radius, n)
    if abs(lam_y) > tiny:
        # discriminant(x) = dy^2 - 4 lam_y (lam_x x^2 + dx x + f) >= 0
        disc = dy * dy - 4 * lam_y * (lam_x * xs * xs + dx * xs + f)
        ok = disc >= 0
        if not np.any(ok):
            return np.empty((0, 2))
        xs = xs[ok]
        root = np.sqrt(disc[ok])
        y_hi = (-dy + root) / (2 * lam_y)
        y_lo = (-dy - root) / (2 * lam_y)
        return np.concatenate(
            [np.column_stack([xs, y_hi]), np.column_stack([xs, y_lo])]
        )
    if abs(dy) > tiny:
        ys = -(lam_x * xs * xs + dx * xs + f) / dy
        return np.column_stack([xs, ys])
    # Equation independent of y: vertical line(s) at the roots in x.
    if abs(lam_x) > tiny:
        disc = dx * dx - 4 * lam_x * f
        if disc < 0:
            return np.empty((0, 2))
        roots = [(-dx + s * np.sqrt(disc)) / (2 * lam_x) for s in (1.0, -1.0)]
    elif abs(dx) > tiny:
        roots = [-f / dx]
    else:
        return np.empty((0, 2))
    ys = np.linspace(-radius, radius, n)
    return np.concatenate([np.column_stack([np.full_like(ys, r), ys]) for r in roots])


def _conic_samples(coeffs, query_canonical, n=2048):
    """Dense candidate points on the conic near the queries, canonical frame."""
    lam, lin, f, _ = _canonical_conic(coeffs)
    (lx, ly), (dx, dy) = lam, lin
    tiny = 1e-14 * max(abs(lx), abs(ly), 1.0)
    cx = -dx / (2 * lx) if abs(lx) > tiny else 0.0
    cy = -dy / (2 * ly) if abs(ly) > tiny else 0.0
    q = np.atleast_2d(query_canonical)
    spread = np.max(np.linalg.norm(q - [cx, cy], axis=1))
    # Inflated search region: twice the query spread around the conic center,
    # padded by the characteristic axis scale where it is defined.
    k = lx * cx * cx + ly * cy * cy - f
    size = 0.0
    for lam_i in (lx, ly):
        if abs(lam_i) > tiny and k / lam_i > 0:
            size = max(size, np.sqrt(k / lam_i))
    radius = 2.0 * (spread + size) + 1.0
    pts = np.concatenate(
        [
            _sample_solving_for_y(lx, ly, dx, dy, f, cx, radius, n),
            # Swapped orientation covers near-vertical tangents.
            _sample_solving_for_y(ly, lx, dy, dx, f, cy, radius, n)[:, ::-1],
        ]
    )
    if len(pts) == 0:
        raise NoConicPointInRange("conic has no real points in the search region")
    return pts


def _newton_on_lagrange(model, points, q0, iters=60):
    """Vectorized Newton refinement of closest-point candidates.

    Solves q - p = mu * grad G(q), G(q) = 0 for each point; candidates that
    fail to converge keep their sampled estimate.
    """
    a, b, c = model.coeffs[:3]
    hess = np.array([[2 * a, b], [b, 2 * c]])
    q = q0.copy()
    grad = model.gradient(q)
    gnorm = np.einsum("ij,ij->i", grad, grad)
    mu = np.einsum("ij,ij->i", q - points, grad) / np.where(gnorm > 0, gnorm, 1.0)
    scale = 1.0 + np.linalg.norm(points, axis=1)
    active = np.ones(len(q), dtype=bool)
    for _ in range(iters):
        if not np.any(active):
            break
        grad = model.gradient(q[active])
        res = np.concatenate(
            [
                q[active] - points[active] - mu[active, None] * grad,
                model.algebraic_residual(q[active])[:, None],
            ],
            axis=1,
        )
        m = active.sum()
        jac = np.zeros((m, 3, 3))
        jac[:, :2, :2] = np.eye(2)[None] - mu[active, None, None] * hess[None]
        jac[:, :2, 2] = -grad
        jac[:, 2, :2] = grad
        ok = np.abs(np.linalg.det(jac)) > 1e-14
        if not np.any(ok):
            break
        delta = np.zeros((m, 3))
        delta[ok] = np.linalg.solve(jac[ok], -res[ok][..., None])[..., 0]
        idx = np.flatnonzero(active)
        q[idx[ok]] += delta[ok, :2]
        mu[idx[ok]] += delta[ok, 2]
        moved = np.zeros(m, dtype=bool)
        moved[ok] = np.max(np.abs(delta[ok, :2]), axis=1) > 1e-13 * scale[idx[ok]]
        active[idx[~ok]] = False
        active[idx[~moved]] = False
    # Accept only refinements that stay on the curve and do not increase distance.
    grad = model.gradient(q)
    gmag = np.linalg.norm(grad, axis=1)
    on_curve = np.abs(model.algebraic_residual(q)) <= 1e-9 * np.where(gmag > 0, gmag, 1.0) * scale
    better = np.linalg.norm(q - points, axis=1) <= np.linalg.norm(q0 - points, axis=1) + 1e-12
    good = on_curve & better & np.all(np.isfinite(q), axis=1)
    q[~good] = q0[~good]
    return q


def closest_points_on_conic(points_2d, model, n_samples=2048):
    """Closest points on the conic's zero set for (N,2) queries.

    Dense sampling over the real branch(es) near the queries picks
    candidates; a second, locally refined sampling pass tightens them; Newton
    iteration on the Lagrange stationarity conditions polishes the result.
    """
    pts = np.atleast_2d(np.asarray(points_2d, dtype=float))
    _, _, _, rot = _canonical_conic(model.coeffs)
    q_can = pts @ rot

    samples = _conic_samples(model.coeffs, q_can, n_samples)
    d2 = (q_can[:, None, 0] - samples[None, :, 0]) ** 2 + (
        q_can[:, None, 1] - samples[None, :, 1]
    ) ** 2
    best = samples[np.argmin(d2, axis=1)]

    # Local resample around each candidate at ~1000x finer resolution.
    coarse_step = np.ptp(samples[:, 0]) / max(n_samples - 1, 1) + 1e-9
    refined = best.copy()
    lam, lin, f, _ = _canonical_conic(model.coeffs)
    for i, (qc, b) in enumerate(zip(q_can, best)):
        local = _sample_solving_for_y(
            lam[0], lam[1], lin[0], lin[1], f, b[0], 2 * coarse_step, 512
        )
        swapped = _sample_solving_for_y(
            lam[1], lam[0], lin[1], lin[0], f, b[1], 2 * coarse_step, 512
        )
        if len(swapped):
            local = np.concatenate([local, swapped[:, ::-1]]) if len(local) else swapped[:, ::-1]
        if len(local):
            dd = np.linalg.norm(local - qc, axis=1)
            j = int(np.argmin(dd))
            if dd[j] < np.linalg.norm(b - qc):
                refined[i] = local[j]

    q_world = _newton_on_lagrange(model, pts, refined @ rot.T)
    return np.linalg.norm(q_world - pts, axis=1), q_world


def closest_point_on_conic(p, model, n_samples=2048):
    """Nearest point on the conic to a single in-plane query point."""
    _, near = closest_points_on_conic(np.asarray(p, dtype=float)[None, :], model, n_samples)
    return near[0]


# ---------------------------------------------------------------------------
# Model fitting error (Eq.-style mean correspondent distance)


def path_error(points, model, *, curve_samples=4096, dmj_correspondence="curve3d",
               include_out_of_plane=True):
    """Mean closest-point distance (mm) from 3D data points to a fitted model.

    Minimum jerk uses the unclamped line projection. The conic projects
    points into its plane frame, finds the in-plane closest point, and
    combines it with the out-of-plane residual (the exact 3D distance, since
    the conic lies in the plane). Decoupled minimum jerk measures against the
    densely sampled 3D curve by default; ``dmj_correspondence="plane"``
    instead collapses both onto the best-fit plane first.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise TooShort("path error needs >=1 point")

    if isinstance(model, MinJerkModel):
        p1, p2 = model.start, model.end
        if float((p2 - p1) @ (p2 - p1)) < _EPS:
            dists = np.linalg.norm(pts - p1, axis=1)
        else:
            dists, _ = line_distances(pts, p1, p2)
        return FitError.from_distances(dists)

    if isinstance(model, ConicModel):
        if model.frame is None:
            raise ValueError("conic model has no plane frame; fit with a frame")
        uv, residual = project_to_plane(pts, model.frame)
        d_inplane, _ = closest_points_on_conic(uv, model, curve_samples)
        if include_out_of_plane:
            return FitError.from_distances(np.hypot(d_inplane, residual))
        return FitError.from_distances(d_inplane)

    if isinstance(model, DecoupledMinJerkModel):
        curve = model.sample(curve_samples)
        if dmj_correspondence == "curve3d":
            dists, _ = polyline_distances(pts, curve)
            return FitError.from_distances(dists)
        if dmj_correspondence == "plane":
            if model.frame is None:
                raise ValueError("decoupled model has no plane frame")
            uv, residual = project_to_plane(pts, model.frame)
            curve_uv, _ = project_to_plane(curve, model.frame)
            d_inplane, _ = polyline_distances(uv, curve_uv)
            if include_out_of_plane:
                return FitError.from_distances(np.hypot(d_inplane, residual))
            return FitError.from_distances(d_inplane)
        raise ValueError(f"unknown dmj_correspondence {dmj_correspondence!r}")

    raise TypeError(f"unsupported model type {type(model).__name__}")


def temporal_error(segment, model):
    """Mean distance pairing each sample with the model at its (mapped) timestamp.

    Sample times are affinely mapped onto [0, model duration]. Only the
    time-parameterized models (minimum jerk, decoupled minimum jerk) apply.
    """
    if isinstance(segment, Trajectory):
        times, pts = segment.timestamps, segment.positions
    else:
        times, pts = segment
        times = np.asarray(times, dtype=float).reshape(-1)
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    if len(times) < 2 or times[-1] <= times[0]:
        raise TooShort("temporal error needs a positive time span")
    if isinstance(model, MinJerkModel):
        duration = model.t_f
    elif isinstance(model, DecoupledMinJerkModel):
        duration = model.duration
    else:
        raise TypeError("temporal error needs a time-parameterized model")
    mapped = (times - times[0]) / (times[-1] - times[0]) * duration
    correspondents = model.position(mapped)
    return FitError.from_distances(np.linalg.norm(pts - correspondents, axis=1))
