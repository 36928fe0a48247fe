"""Triangle meshes built from planar quads; each quad is one UV chart with its own texture."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TriMesh:
    vertices: np.ndarray   # (V, 3) metres
    faces: np.ndarray      # (F, 3) int
    labels: np.ndarray     # (F,) semantic id
    uv: np.ndarray         # (V, 2) in [0, 1]
    charts: np.ndarray     # (F,) chart id, the texture handle

    def validate(self) -> None:
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")
        if not np.all(np.isfinite(self.uv)) or self.uv.min() < 0 or self.uv.max() > 1:
            raise ValueError("texture coordinates must be finite and inside [0, 1]")
        if np.any(self.face_areas() <= 1e-12):
            raise ValueError("degenerate face")

    def face_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    @staticmethod
    def concat(meshes: list["TriMesh"]) -> "TriMesh":
        offs = np.cumsum([0] + [len(m.vertices) for m in meshes[:-1]])
        return TriMesh(
            np.concatenate([m.vertices for m in meshes]),
            np.concatenate([m.faces + o for m, o in zip(meshes, offs)]),
            np.concatenate([m.labels for m in meshes]),
            np.concatenate([m.uv for m in meshes]),
            np.concatenate([m.charts for m in meshes]),
        )


@dataclass(frozen=True)
class Quad:
    """Planar rectangle ``corner + a*edge_u + b*edge_v`` for a, b in [0, 1]."""
    corner: tuple
    edge_u: tuple
    edge_v: tuple
    label: int

    @property
    def size(self) -> tuple[float, float]:
        return float(np.linalg.norm(self.edge_u)), float(np.linalg.norm(self.edge_v))


def quads_to_mesh(quads: list[Quad], chart_offset: int = 0) -> TriMesh:
    """Chart-local texture coordinates: corner (0, 0), ``edge_u`` end (1, 0), ``edge_v`` end (0, 1)."""
    n = len(quads)
    verts = np.zeros((4 * n, 3))
    uv = np.zeros((4 * n, 2))
    faces = np.zeros((2 * n, 3), dtype=np.int64)
    for i, q in enumerate(quads):
        c, eu, ev = (np.asarray(a, dtype=np.float64) for a in (q.corner, q.edge_u, q.edge_v))
        verts[4 * i:4 * i + 4] = [c, c + eu, c + eu + ev, c + ev]
        uv[4 * i:4 * i + 4] = [(0, 0), (1, 0), (1, 1), (0, 1)]
        faces[2 * i] = (4 * i, 4 * i + 1, 4 * i + 2)
        faces[2 * i + 1] = (4 * i, 4 * i + 2, 4 * i + 3)
    labels = np.repeat([q.label for q in quads], 2).astype(np.int64)
    charts = np.repeat(np.arange(n) + chart_offset, 2).astype(np.int64)
    return TriMesh(verts, faces, labels, uv, charts)


def box_quads(x0, y0, x1, y1, height, label) -> list[Quad]:
    """Top and four sides of an axis-aligned box standing on the floor, no bottom."""
    dx, dy = x1 - x0, y1 - y0
    return [
        Quad((x0, y0, height), (dx, 0, 0), (0, dy, 0), label),
        Quad((x0, y0, 0), (dx, 0, 0), (0, 0, height), label),
        Quad((x1, y1, 0), (-dx, 0, 0), (0, 0, height), label),
        Quad((x1, y0, 0), (0, dy, 0), (0, 0, height), label),
        Quad((x0, y1, 0), (0, -dy, 0), (0, 0, height), label),
    ]


def wall_quads(lx, ly, height, thickness, label) -> list[Quad]:
    """Inner faces and top strips of the four walls around [0, lx] x [0, ly]."""
    t = thickness
    return [
        Quad((0, 0, 0), (lx, 0, 0), (0, 0, height), label),
        Quad((lx, ly, 0), (-lx, 0, 0), (0, 0, height), label),
        Quad((0, ly, 0), (0, -ly, 0), (0, 0, height), label),
        Quad((lx, 0, 0), (0, ly, 0), (0, 0, height), label),
        Quad((-t, -t, height), (lx + 2 * t, 0, 0), (0, t, 0), label),
        Quad((-t, ly, height), (lx + 2 * t, 0, 0), (0, t, 0), label),
        Quad((-t, 0, height), (t, 0, 0), (0, ly, 0), label),
        Quad((lx, 0, height), (t, 0, 0), (0, ly, 0), label),
    ]
