"""Image columns as polar rays on the ground plane, and the depth-derived row sets per ray cell."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cameras import BevSpec, PinholeCamera, to_bev_frame
from .projection import backproject


@dataclass(frozen=True)
class RayGeometry:
    thetas: np.ndarray      # (columns,) ray angle, positive to the right
    rho_step: float
    n_rho: int
    stride: int

    @property
    def rho_centers(self) -> np.ndarray:
        return (np.arange(self.n_rho) + 0.5) * self.rho_step


def column_to_ray(cam: PinholeCamera, spec: BevSpec, stride: int = 1) -> RayGeometry:
    """One ray per group of ``stride`` image columns, sampled every BEV cell along the ray."""
    n = cam.width // stride
    centres = np.arange(n) * stride + stride / 2.0
    thetas = np.arctan((centres - cam.cx) / cam.focal)
    step = spec.cell_forward
    far = np.hypot(spec.extent_forward, spec.extent_lateral / 2.0)
    return RayGeometry(thetas, step, int(np.ceil(far / step)), stride)


def polar_gather_index(cam: PinholeCamera, spec: BevSpec, rays: RayGeometry, bilinear: bool = False):
    """Map each BEV cell to ray samples.

    Nearest mode returns ``(index, valid)`` with ``index`` of shape (rows*cols,)
    into a flattened (columns, n_rho) array.  Bilinear mode returns
    ``(index, weight, valid)`` with 4 taps per cell.  ``valid`` marks cells whose
    bearing falls inside the horizontal field of view.
    """
    ff, rr = spec.cell_centers()
    theta = np.arctan2(rr, ff).ravel()
    rho = np.hypot(rr, ff).ravel()
    ncol = len(rays.thetas)
    u = cam.focal * np.tan(np.clip(theta, -np.pi / 2 + 1e-6, np.pi / 2 - 1e-6)) + cam.cx
    valid = (u >= 0) & (u < cam.width)
    if not bilinear:
        j = np.clip(np.floor(u / rays.stride).astype(np.int64), 0, ncol - 1)
        k = np.clip(np.floor(rho / rays.rho_step).astype(np.int64), 0, rays.n_rho - 1)
        return j * rays.n_rho + k, valid
    fj = np.clip(u / rays.stride - 0.5, 0, ncol - 1)
    fk = np.clip(rho / rays.rho_step - 0.5, 0, rays.n_rho - 1)
    j0 = np.minimum(np.floor(fj).astype(np.int64), ncol - 2 if ncol > 1 else 0)
    k0 = np.minimum(np.floor(fk).astype(np.int64), rays.n_rho - 2 if rays.n_rho > 1 else 0)
    tj, tk = fj - j0, fk - k0
    j1, k1 = np.minimum(j0 + 1, ncol - 1), np.minimum(k0 + 1, rays.n_rho - 1)
    idx = np.stack([j0 * rays.n_rho + k0, j0 * rays.n_rho + k1, j1 * rays.n_rho + k0, j1 * rays.n_rho + k1], -1)
    w = np.stack([(1 - tj) * (1 - tk), (1 - tj) * tk, tj * (1 - tk), tj * tk], -1)
    return idx, w, valid


@dataclass
class RayCorrespondence:
    """``ray_cell[y, i]`` is the ray cell index of pixel (i, y), or -1 when not mapped."""
    ray_cell: np.ndarray
    n_rho: int

    def gamma(self, column: int, rho_index: int) -> np.ndarray:
        return np.nonzero(self.ray_cell[:, column] == rho_index)[0]

    def as_sets(self, column: int) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for y, k in enumerate(self.ray_cell[:, column]):
            if k >= 0:
                out.setdefault(int(k), set()).add(y)
        return out

    def indicator(self, column: int) -> np.ndarray:
        """(n_rho, H) binary matrix, row k is the indicator of gamma(k) on this column."""
        m = np.zeros((self.n_rho, self.ray_cell.shape[0]))
        ys = np.nonzero(self.ray_cell[:, column] >= 0)[0]
        m[self.ray_cell[ys, column], ys] = 1.0
        return m


def ground_truth_correspondence(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec,
                                rho_step: float | None = None) -> RayCorrespondence:
    step = spec.cell_forward if rho_step is None else rho_step
    far = np.hypot(spec.extent_forward, spec.extent_lateral / 2.0)
    n_rho = int(np.ceil(far / step))
    cell = np.full(depth.shape, -1, dtype=np.int64)
    cloud = backproject(depth, cam)
    if len(cloud):
        fwd, right, _ = to_bev_frame(cloud.world, cam.pose)
        _, _, inside = spec.cell_index(fwd, right)
        k = np.floor(np.hypot(fwd, right) / step).astype(np.int64)
        px = cloud.pixels[inside]
        cell[px[:, 0], px[:, 1]] = np.minimum(k[inside], n_rho - 1)
    return RayCorrespondence(cell, n_rho)
