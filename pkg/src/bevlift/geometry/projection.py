"""Inverse perspective projection, voxel counting and vertical pooling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cameras import BevSpec, PinholeCamera, Pose, bin_index, to_bev_frame


def valid_depth(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth) & (depth > 0)


@dataclass
class PointCloud:
    cam: np.ndarray        # (N, 3) camera frame
    world: np.ndarray      # (N, 3)
    payload: np.ndarray    # (N, K)
    pixels: np.ndarray     # (N, 2) integer (row, col)

    def __len__(self) -> int:
        return len(self.world)


def backproject(depth: np.ndarray, cam: PinholeCamera, payload: np.ndarray | None = None) -> PointCloud:
    """One point per valid pixel; ``depth`` is z-depth along the optical axis."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ValueError(f"depth shape {depth.shape} does not match camera {(cam.height, cam.width)}")
    if payload is None:
        payload = np.ones(depth.shape + (1,))
    payload = np.asarray(payload, dtype=np.float64)
    if payload.ndim == 2:
        payload = payload[..., None]
    if payload.shape[:2] != depth.shape:
        raise ValueError("payload must match depth in height and width")
    ok = valid_depth(depth)
    rows, cols = np.nonzero(ok)
    d = depth[rows, cols]
    pc = np.stack([(cols + 0.5 - cam.cx) * d / cam.focal,
                   (rows + 0.5 - cam.cy) * d / cam.focal, d], axis=-1)
    return PointCloud(pc, cam.cam_to_world(pc), payload[rows, cols], np.stack([rows, cols], axis=-1))


@dataclass
class VoxelGrid:
    """Point counts and payload sums per voxel, indexed [row, col, level, channel]."""
    spec: BevSpec
    pose: Pose
    counts: np.ndarray
    sums: np.ndarray
    dropped: int = 0

    @property
    def channels(self) -> int:
        return self.sums.shape[-1]

    def level_tops(self) -> np.ndarray:
        sp = self.spec
        return sp.height_origin + (np.arange(sp.height_cells) + 1) * sp.height_cell


def voxel_indices(world: np.ndarray, spec: BevSpec, pose: Pose):
    fwd, right, up = to_bev_frame(world, pose)
    row, col, inside = spec.cell_index(fwd, right)
    lev = bin_index(up, spec.height_origin, spec.height_cell)
    inside &= (lev >= 0) & (lev < spec.height_cells)
    return row, col, lev, inside


def voxelize(cloud: PointCloud, spec: BevSpec, pose: Pose) -> VoxelGrid:
    k = cloud.payload.shape[1] if cloud.payload.ndim == 2 else 1
    shape = (spec.rows, spec.cols, spec.height_cells)
    counts = np.zeros(shape, dtype=np.int64)
    sums = np.zeros(shape + (k,))
    if len(cloud) == 0:
        return VoxelGrid(spec, pose, counts, sums, 0)
    row, col, lev, inside = voxel_indices(cloud.world, spec, pose)
    flat = np.ravel_multi_index((row[inside], col[inside], lev[inside]), shape)
    counts.reshape(-1)[:] = np.bincount(flat, minlength=counts.size)
    pay = cloud.payload[inside]
    s = sums.reshape(-1, k)
    for c in range(k):
        s[:, c] = np.bincount(flat, weights=pay[:, c], minlength=counts.size)
    return VoxelGrid(spec, pose, counts, sums, int((~inside).sum()))


@dataclass
class BevGrid:
    values: np.ndarray            # (rows, cols, K) in [0, 1]
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.mask is not None:
            self.values = np.where(self.mask[..., None], self.values, 0.0)

    @property
    def channels(self) -> int:
        return self.values.shape[-1]


def pool_to_ground(grid: VoxelGrid, mode: str = "max", height_cutoff: float | None = None,
                   occupancy: bool = False, mask: np.ndarray | None = None) -> BevGrid:
    """Collapse the vertical axis, keeping voxels whose top lies at or below the cutoff.

    ``max`` marks a cell when any kept voxel has a positive payload sum (or any
    point, with ``occupancy``).  ``average`` averages the per-voxel mean payload
    over the occupied kept voxels.
    """
    sp = grid.spec
    cutoff = sp.height_cutoff if height_cutoff is None else height_cutoff
    top = sp.height_origin + sp.height_cells * sp.height_cell
    if not (sp.height_origin < cutoff <= top + 1e-9):
        raise ValueError(f"cutoff {cutoff} outside grid height range")
    keep = grid.level_tops() <= cutoff + 1e-9
    counts = grid.counts[:, :, keep]
    sums = grid.sums[:, :, keep, :]
    if mode == "max":
        if occupancy:
            v = (counts.sum(axis=2) > 0)[..., None].astype(np.float64)
            v = np.repeat(v, grid.channels, axis=-1)
        else:
            v = (sums.sum(axis=2) > 0).astype(np.float64)
    elif mode == "average":
        occ = counts > 0
        means = np.where(occ[..., None], sums / np.maximum(counts, 1)[..., None], 0.0)
        n = occ.sum(axis=2)[..., None]
        v = np.where(n > 0, means.sum(axis=2) / np.maximum(n, 1), 0.0)
    else:
        raise ValueError(f"unknown pooling mode {mode!r}")
    return BevGrid(v, mask)


def geometric_projection(depth: np.ndarray, cam: PinholeCamera, payload: np.ndarray, spec: BevSpec,
                         mode: str = "max", mask: np.ndarray | None = None) -> BevGrid:
    """Backproject, voxelize and pool: the purely geometric FPV to BEV transfer."""
    cloud = backproject(depth, cam, payload)
    return pool_to_ground(voxelize(cloud, spec, cam.pose), mode, mask=mask)
