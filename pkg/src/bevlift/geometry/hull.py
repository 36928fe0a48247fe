"""Convex hull of ground-projected points and its rasterization to a FOV mask."""
from __future__ import annotations

import numpy as np

from .cameras import BevSpec, PinholeCamera, to_bev_frame
from .projection import backproject


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _discard_interior(pts: np.ndarray) -> np.ndarray:
    # Akl-Toussaint: points strictly inside the polygon of 8 directional extremes cannot be hull vertices
    dirs = np.array([[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]], dtype=np.float64)
    ext = pts[np.argmax(pts @ dirs.T, axis=0)]
    keep = np.unique(ext, axis=0)
    if len(keep) < 3:
        return pts
    ang = np.arctan2(*(keep - keep.mean(axis=0)).T[::-1])
    poly = keep[np.argsort(ang)]
    strict = np.ones(len(pts), dtype=bool)
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        strict &= cr > 1e-12
    return pts[~strict]


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Counterclockwise hull vertices (monotone chain), collinear points dropped.

    Returns 1 vertex for a single distinct point and 2 for collinear input.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("convex_hull needs at least one point")
    if len(pts) > 64:
        pts = _discard_interior(pts)
    pts = np.unique(pts, axis=0)  # lexicographic sort
    if len(pts) <= 2:
        return pts
    p = [tuple(v) for v in pts]
    lower: list = []
    for q in p:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list = []
    for q in reversed(p):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        hull = [p[0], p[-1]]
    return np.array(hull)


def points_in_polygon(poly: np.ndarray, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Inclusive containment for a CCW convex polygon with at least 3 vertices."""
    inside = np.ones(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cr >= -tol * max(1.0, float(np.hypot(*(b - a))))
    return inside


def rasterize_hull(hull: np.ndarray, spec: BevSpec) -> np.ndarray:
    """Cells whose centre lies in the hull; degenerate hulls mark the cells they pass through.

    Hull coordinates are (right, forward) in metres.
    """
    mask = np.zeros((spec.rows, spec.cols), dtype=bool)
    if len(hull) >= 3:
        ff, rr = spec.cell_centers()
        centers = np.stack([rr.ravel(), ff.ravel()], axis=-1)
        mask.reshape(-1)[:] = points_in_polygon(hull, centers)
        return mask
    if len(hull) == 2:
        a, b = hull
        n = int(np.ceil(np.hypot(*(b - a)) / (0.25 * min(spec.cell_forward, spec.cell_lateral)))) + 2
        t = np.linspace(0.0, 1.0, n)[:, None]
        samples = a + t * (b - a)
    else:
        samples = hull
    row, col, inside = spec.cell_index(samples[:, 1], samples[:, 0])
    mask[row[inside], col[inside]] = True
    return mask


def ground_points(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec) -> np.ndarray:
    """(right, forward) of FPV points below the height cutoff that fall in the footprint."""
    cloud = backproject(depth, cam)
    if len(cloud) == 0:
        return np.zeros((0, 2))
    fwd, right, up = to_bev_frame(cloud.world, cam.pose)
    _, _, inside = spec.cell_index(fwd, right)
    inside &= up < spec.height_cutoff
    return np.stack([right[inside], fwd[inside]], axis=-1)


def fov_mask(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec) -> np.ndarray:
    pts = ground_points(depth, cam, spec)
    if len(pts) == 0:
        return np.zeros((spec.rows, spec.cols), dtype=bool)
    return rasterize_hull(convex_hull(pts), spec)
