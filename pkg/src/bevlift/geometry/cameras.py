"""Pinhole and top-down orthographic cameras.

World frame: x, y horizontal, z up, floor at z = 0.  Camera frame follows
the usual vision convention (x right, y down, z forward).  Pixel ``i`` has
its centre at continuous coordinate ``i + 0.5``.

The BEV frame is attached to the first-person camera's ground position and
heading: ``forward`` along the heading, ``right`` to its right, ``up`` is the
world height.  BEV arrays are indexed ``[row, col]`` with row = forward bin
(row 0 nearest the camera) and col = lateral bin (col 0 leftmost).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_FOV_DEG = 79.0
DEFAULT_FPV_RES = 384
DEFAULT_BEV_RES = 100
DEFAULT_BEV_EXTENT = 5.0


def bin_index(coord, origin: float, cell: float) -> np.ndarray:
    """floor((coord - origin) / cell); the tiny offset keeps exact boundaries from falling back a cell."""
    return np.floor((np.asarray(coord) - origin) / cell + 1e-9).astype(np.int64)


@dataclass(frozen=True)
class Pose:
    """Rigid world <- camera transform given by position, yaw and downward pitch (radians)."""
    position: tuple[float, float, float] = (0.0, 0.0, 1.5)
    yaw: float = 0.0
    pitch: float = 0.0

    @property
    def rotation(self) -> np.ndarray:
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        fwd = np.array([cy * cp, sy * cp, -sp])
        right = np.array([sy, -cy, 0.0])
        down = np.cross(fwd, right)
        return np.stack([right, down, fwd], axis=1)

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    @property
    def heading_right(self) -> np.ndarray:
        return np.array([math.sin(self.yaw), -math.cos(self.yaw), 0.0])

    def to_dict(self) -> dict:
        return {"position": [float(v) for v in self.position], "yaw": float(self.yaw), "pitch": float(self.pitch)}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(tuple(float(v) for v in d["position"]), float(d["yaw"]), float(d.get("pitch", 0.0)))


@dataclass(frozen=True)
class PinholeCamera:
    width: int
    height: int
    focal: float
    cx: float
    cy: float
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        if self.focal <= 0:
            raise ValueError("focal must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int = DEFAULT_FPV_RES, height: int | None = None,
                 fov_deg: float = DEFAULT_FOV_DEG, pose: Pose | None = None) -> "PinholeCamera":
        height = width if height is None else height
        focal = width / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
        return cls(width, height, focal, width / 2.0, height / 2.0, pose or Pose())

    @property
    def hfov(self) -> float:
        return 2.0 * math.atan(self.width / (2.0 * self.focal))

    def with_pose(self, pose: Pose) -> "PinholeCamera":
        return replace(self, pose=pose)

    def scaled(self, factor: float) -> "PinholeCamera":
        """Same field of view at ``factor`` times the resolution."""
        return replace(self, width=int(round(self.width * factor)), height=int(round(self.height * factor)),
                       focal=self.focal * factor, cx=self.cx * factor, cy=self.cy * factor)

    def pixel_directions(self) -> np.ndarray:
        """(H, W, 3) camera-frame ray directions with unit z component."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.focal
        v = (np.arange(self.height) + 0.5 - self.cy) / self.focal
        uu, vv = np.meshgrid(u, v)
        return np.stack([uu, vv, np.ones_like(uu)], axis=-1)

    def cam_to_world(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.pose.rotation.T + np.asarray(self.pose.position)

    def world_to_cam(self, pts: np.ndarray) -> np.ndarray:
        return (pts - np.asarray(self.pose.position)) @ self.pose.rotation

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        """Continuous (u, v) image coordinates of camera-frame points."""
        z = pts_cam[..., 2]
        return np.stack([pts_cam[..., 0] / z * self.focal + self.cx,
                         pts_cam[..., 1] / z * self.focal + self.cy], axis=-1)

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "focal": self.focal,
                "cx": self.cx, "cy": self.cy, "pose": self.pose.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PinholeCamera":
        return cls(int(d["width"]), int(d["height"]), float(d["focal"]), float(d["cx"]), float(d["cy"]),
                   Pose.from_dict(d["pose"]))


@dataclass(frozen=True)
class BevSpec:
    """Metric ground grid in front of the camera plus the vertical voxel layout."""
    rows: int = DEFAULT_BEV_RES
    cols: int = DEFAULT_BEV_RES
    extent_forward: float = DEFAULT_BEV_EXTENT
    extent_lateral: float = DEFAULT_BEV_EXTENT
    height_cells: int = 100
    height_cell: float = 0.05
    height_origin: float = -0.05
    height_cutoff: float = 2.0

    @property
    def cell_forward(self) -> float:
        return self.extent_forward / self.rows

    @property
    def cell_lateral(self) -> float:
        return self.extent_lateral / self.cols

    @property
    def cell(self) -> float:
        return self.cell_forward

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) arrays of forward and right coordinates of cell centres."""
        f = (np.arange(self.rows) + 0.5) * self.cell_forward
        r = (np.arange(self.cols) + 0.5) * self.cell_lateral - self.extent_lateral / 2.0
        ff, rr = np.meshgrid(f, r, indexing="ij")
        return ff, rr

    def cell_index(self, forward: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Half-open floor binning; returns (row, col, inside)."""
        row = bin_index(forward, 0.0, self.cell_forward)
        col = bin_index(right, -self.extent_lateral / 2.0, self.cell_lateral)
        inside = (row >= 0) & (row < self.rows) & (col >= 0) & (col < self.cols)
        return row, col, inside

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class OrthoCamera:
    """Top-down sensor ``above`` metres over the pinhole sensor, covering ``spec`` in front of it."""
    spec: BevSpec
    pose: Pose
    above: float = 2.0

    @property
    def sensor_height(self) -> float:
        return float(self.pose.position[2]) + self.above

    def cell_world_points(self, supersample: int = 1) -> np.ndarray:
        """World (x, y) of sample points, shape (rows, cols, s*s, 2)."""
        s = supersample
        offs = (np.arange(s) + 0.5) / s
        sf, sr = np.meshgrid(offs, offs, indexing="ij")
        sp = self.spec
        f = (np.arange(sp.rows)[:, None, None] + sf.reshape(1, 1, -1)) * sp.cell_forward
        r = (np.arange(sp.cols)[None, :, None] + sr.reshape(1, 1, -1)) * sp.cell_lateral - sp.extent_lateral / 2.0
        f, r = np.broadcast_arrays(f, r)
        pos = np.asarray(self.pose.position)
        h, hr = self.pose.heading, self.pose.heading_right
        x = pos[0] + f * h[0] + r * hr[0]
        y = pos[1] + f * h[1] + r * hr[1]
        return np.stack([x, y], axis=-1)


def to_bev_frame(points_world: np.ndarray, pose: Pose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(forward, right, up) coordinates of world points relative to ``pose``."""
    d = points_world - np.asarray(pose.position)
    return d @ pose.heading, d @ pose.heading_right, points_world[..., 2]
