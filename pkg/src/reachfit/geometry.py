"""3D primitives: total-least-squares plane fits and the plane-aligned 2D frame.

Positions are millimetres throughout. Points are numpy arrays: a single
point is shape (3,) or (2,), a point set is (N, 3) or (N, 2).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput

# Ratio of 2nd to 1st singular value below which a point set counts as collinear.
COLLINEAR_SV_RATIO = 1e-6

_AXIS_EPS = 1e-12


def _as_points(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DegenerateInput(f"expected (N, {dim}) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInput("points contain non-finite coordinates")
    return pts


def canonical_normal(normal):
    """Flip a unit normal so the first nonzero component among (z, x, y) is positive."""
    n = np.asarray(normal, dtype=float)
    for idx in (2, 0, 1):
        if abs(n[idx]) > _AXIS_EPS:
            return n if n[idx] > 0 else -n
    raise DegenerateInput("zero-length normal")


@dataclass(frozen=True)
class Plane:
    """Plane through ``origin`` with canonicalized unit ``normal``."""

    origin: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(normal)
        if not np.isfinite(norm) or norm < _AXIS_EPS:
            raise DegenerateInput("plane normal must be nonzero")
        normal = canonical_normal(normal / norm)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "normal", normal)

    def signed_distance(self, points):
        """Signed orthogonal distance of points (N,3) from the plane, mm."""
        pts = _as_points(points, 3)
        return (pts - self.origin) @ self.normal


@dataclass(frozen=True)
class PlaneFrame:
    """Rotation taking world coordinates into a frame whose z-axis is the plane normal.

    ``rotation`` rows are the in-plane u, v axes and the normal; it is
    orthonormal with determinant +1. ``origin`` is the plane origin.
    """

    rotation: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "origin", origin)

    @property
    def normal(self):
        return self.rotation[2]

    def to_plane(self, points):
        """World points (N,3) -> frame coordinates (N,3); column 2 is out-of-plane."""
        pts = _as_points(points, 3)
        return (pts - self.origin) @ self.rotation.T

    def to_world(self, frame_points):
        pts = _as_points(frame_points, 3)
        return pts @ self.rotation + self.origin


def fit_plane(points):
    """Total-least-squares plane through ≥3 non-collinear 3D points.

    The normal is the singular direction of smallest singular value of the
    centered point matrix, which minimizes the sum of squared orthogonal
    distances. Raises DegenerateInput for <3 points or collinear input.
    """
    pts = _as_points(points, 3)
    if pts.shape[0] < 3:
        raise DegenerateInput(f"plane fit needs >=3 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] < _AXIS_EPS or svals[1] / svals[0] < COLLINEAR_SV_RATIO:
        raise DegenerateInput("points are collinear; plane undetermined")
    return Plane(origin=centroid, normal=vt[2])


def plane_frame(plane):
    """Deterministic orthonormal frame whose z-axis is the plane normal.

    The u-axis is the world x-axis projected into the plane (world y-axis
    when the normal is within ~1e-8 of x).
    """
    n = plane.normal
    for world_axis in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        u = world_axis - (world_axis @ n) * n
        norm = np.linalg.norm(u)
        if norm > 1e-8:
            u = u / norm
            break
    v = np.cross(n, u)
    return PlaneFrame(rotation=np.vstack([u, v, n]), origin=plane.origin)


def project_to_plane(points, frame):
    """Project world points into the frame; returns ((N,2) in-plane coords, (N,) residual).

    The residual is the signed out-of-plane component in mm.
    """
    local = frame.to_plane(points)
    return local[:, :2], local[:, 2]


def lift_from_plane(points_2d, frame):
    """Inverse of project_to_plane at zero residual: (N,2) -> world (N,3)."""
    pts = np.asarray(points_2d, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput(f"expected (N, 2) array, got shape {pts.shape}")
    local = np.column_stack([pts, np.zeros(len(pts))])
    return frame.to_world(local)
