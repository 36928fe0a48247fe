"""Why identity-value attention can average-pool a column onto its ray, and why it cannot max-pool.

Constructive half: per ray cell, the attention row equal to the normalised
indicator of the image rows that land there reproduces the average of any
payload over those rows.  Counterexample half: as soon as two rows share a ray
cell, asking one attention row to return the max of both payload orderings
(0, 1) and (1, 0) gives an overdetermined linear system with no solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import BevSpec, PinholeCamera, Pose, ground_truth_correspondence
from ..geometry.cameras import bin_index
from ..numeric import Tensor, no_grad
from ..scene import Scene, render_fpv
from .network import ZeroBev


@dataclass
class Certificate:
    """Weights (a1, a2) on two rows of one ray cell must satisfy A a = b for max-pooling."""
    column: int
    rho: int
    rows: tuple[int, int]
    heights: tuple[float, float]
    system: list[list[float]]
    rhs: list[float]
    rank: int
    rank_augmented: int
    residual: float

    @property
    def inconsistent(self) -> bool:
        return self.rank_augmented > self.rank and self.residual > 1e-9

    def to_dict(self) -> dict:
        return {"column": self.column, "rho": self.rho, "rows": list(self.rows), "heights": list(self.heights),
                "system": self.system, "rhs": self.rhs, "rank": self.rank, "rank_augmented": self.rank_augmented,
                "residual": self.residual, "inconsistent": self.inconsistent}


@dataclass
class TheoremReport:
    average_max_error: float
    cells_checked: int
    multi_row_cells: int
    dirac_columns: int
    dirac_max_error: float | None
    certificate: Certificate | None
    notices: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.average_max_error < 1e-6
        if self.certificate is not None:
            ok &= self.certificate.inconsistent
        if self.dirac_max_error is not None:
            ok &= self.dirac_max_error < 1e-12
        return bool(ok)

    def to_dict(self) -> dict:
        return {"average_max_error": self.average_max_error, "cells_checked": self.cells_checked,
                "multi_row_cells": self.multi_row_cells, "dirac_columns": self.dirac_columns,
                "dirac_max_error": self.dirac_max_error, "passed": self.passed,
                "certificate": None if self.certificate is None else self.certificate.to_dict(),
                "notices": list(self.notices)}


def indicator_attention(corr, columns: int) -> np.ndarray:
    """(columns, 1, n_rho, H) attention: row rho of column i is 1/|gamma| on gamma(i, rho), else 0."""
    a = np.stack([corr.indicator(i) for i in range(columns)])
    n = a.sum(-1, keepdims=True)
    return (np.divide(a, n, out=np.zeros_like(a), where=n > 0))[:, None]


def scatter_average(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec, payload: np.ndarray, n_rho: int,
                    rho_step: float):
    """Reference ray targets by direct geometry: (columns, n_rho, c) means and counts.

    Rebuilds each pixel's 3D point from its viewing ray and bins it by planar
    distance from the camera, without the correspondence machinery.
    """
    h, w = depth.shape
    c = payload.shape[-1]
    sums = np.zeros((w, n_rho, c))
    counts = np.zeros((w, n_rho))
    pose = cam.pose
    cyaw, syaw = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = pose.rotation
    origin = np.asarray(pose.position, dtype=np.float64)
    ys, xs = np.nonzero(np.isfinite(depth) & (depth > 0))
    z = depth[ys, xs]
    ray = np.stack([(xs + 0.5 - cam.cx) / cam.focal, (ys + 0.5 - cam.cy) / cam.focal, np.ones_like(z)], -1)
    world = origin + (ray * z[:, None]) @ rot.T
    dx, dy = world[:, 0] - origin[0], world[:, 1] - origin[1]
    fwd = dx * cyaw + dy * syaw
    right = dx * syaw - dy * cyaw
    row = bin_index(fwd, 0.0, spec.cell_forward)
    col = bin_index(right, -spec.extent_lateral / 2.0, spec.cell_lateral)
    keep = (row >= 0) & (row < spec.rows) & (col >= 0) & (col < spec.cols)
    k = np.minimum(np.floor(np.sqrt(dx * dx + dy * dy) / rho_step).astype(np.int64), n_rho - 1)
    np.add.at(sums, (xs[keep], k[keep]), payload[ys[keep], xs[keep]])
    np.add.at(counts, (xs[keep], k[keep]), 1.0)
    means = np.divide(sums, counts[..., None], out=np.zeros_like(sums), where=counts[..., None] > 0)
    return means, counts


def max_pool_certificate(column: int, rho: int, rows: tuple[int, int], heights=(0.0, 0.0)) -> Certificate:
    """Payloads (0, 1) and (1, 0) on the two rows, zero elsewhere; max is 1 both times.

    Unknowns are the weights on the two rows.  Equations: a2 = 1, a1 = 1, and the
    distribution constraint a1 + a2 = 1 (all other weights are >= 0 and multiply 0).
    """
    a = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    b = np.array([1.0, 1.0, 1.0])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = float(np.linalg.norm(a @ sol - b))
    return Certificate(column, rho, (int(rows[0]), int(rows[1])), (float(heights[0]), float(heights[1])),
                       a.tolist(), b.tolist(), int(np.linalg.matrix_rank(a)),
                       int(np.linalg.matrix_rank(np.column_stack([a, b]))), resid)


def theorem_oracle(scene: Scene, pose: Pose, res: int = 64, spec: BevSpec | None = None, fov_deg: float = 79.0,
                   channels: int = 3, seed: int = 0) -> TheoremReport:
    """Check both halves on one rendered view with random payloads per pixel."""
    spec = spec or BevSpec(rows=res, cols=res)
    cam = PinholeCamera.from_fov(res, fov_deg=fov_deg, pose=pose)
    depth = render_fpv(scene, cam).depth
    corr = ground_truth_correspondence(depth, cam, spec)
    notices = []
    rng = np.random.default_rng([seed, 0x7E0])
    payload = rng.uniform(-1.0, 1.0, depth.shape + (channels,))
    alpha = indicator_attention(corr, res)
    with no_grad():
        rays = ZeroBev.zero_stream(Tensor(alpha), payload.transpose(1, 0, 2)).data
    target, counts = scatter_average(depth, cam, spec, payload, corr.n_rho, spec.cell_forward)
    hit = counts > 0
    if not hit.any():
        notices.append("no pixel lands inside the BEV footprint")
    err = float(np.abs(rays - target)[hit].max()) if hit.any() else 0.0

    # columns where every ray cell holds at most one row: the Dirac alpha also max-pools
    dirac_cols = [i for i in range(res) if hit[i].any() and counts[i].max() == 1]
    dirac_err = None
    if dirac_cols:
        maxes = np.full((len(dirac_cols), corr.n_rho, channels), -np.inf)
        for j, i in enumerate(dirac_cols):
            for y in range(res):
                k = corr.ray_cell[y, i]
                if k >= 0:
                    maxes[j, k] = np.maximum(maxes[j, k], payload[y, i])
        sel = hit[dirac_cols]
        dirac_err = float(np.abs(rays[dirac_cols] - maxes)[sel].max())

    # counterexample on the multi-row cell with the largest height spread (a vertical surface if any)
    cert = None
    cloud_z = _pixel_heights(depth, cam)
    best = None
    for i in range(res):
        for k in np.nonzero(counts[i] >= 2)[0]:
            ys = corr.gamma(i, int(k))
            zs = cloud_z[ys, i]
            spread = float(zs.max() - zs.min())
            if best is None or spread > best[0]:
                lo, hi = ys[np.argmin(zs)], ys[np.argmax(zs)]
                best = (spread, i, int(k), (lo, hi), (zs.min(), zs.max()))
    if best is None:
        notices.append("no ray cell collects two or more rows; max-pool counterexample skipped")
    else:
        _, i, k, rows, hz = best
        cert = max_pool_certificate(i, k, rows, hz)
    return TheoremReport(err, int(hit.sum()), int((counts >= 2).sum()), len(dirac_cols), dirac_err, cert, notices)


def _pixel_heights(depth: np.ndarray, cam: PinholeCamera) -> np.ndarray:
    h, w = depth.shape
    ys, xs = np.mgrid[0:h, 0:w]
    pc = np.stack([(xs + 0.5 - cam.cx) * depth / cam.focal, (ys + 0.5 - cam.cy) * depth / cam.focal, depth], -1)
    z = cam.cam_to_world(pc.reshape(-1, 3))[:, 2].reshape(h, w)
    return np.where(np.isfinite(depth) & (depth > 0), z, np.nan)
