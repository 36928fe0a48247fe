"""Ground-plane map of everything the first-person camera can see, built from the scene surfaces.

Reference for the depth back-projection pipeline.  Instead of lifting pixels,
it samples every surface densely, keeps the samples inside the camera frustum
with a clear line of sight and below the height cutoff, and drops them
straight down onto the BEV grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BevSpec, PinholeCamera, to_bev_frame
from .generate import Scene
from .render import _caster


@dataclass
class VisibleSurfaces:
    value: np.ndarray      # (R, C) OR of the texture over visible samples
    visible: np.ndarray    # (R, C) at least one visible sample
    samples: int


def _quad_samples(q, step: float):
    c, eu, ev = (np.asarray(a, dtype=np.float64) for a in (q.corner, q.edge_u, q.edge_v))
    nu = max(1, int(np.ceil(np.linalg.norm(eu) / step)))
    nv = max(1, int(np.ceil(np.linalg.norm(ev) / step)))
    a, b = np.meshgrid((np.arange(nu) + 0.5) / nu, (np.arange(nv) + 0.5) / nv, indexing="ij")
    uv = np.stack([a.ravel(), b.ravel()], -1)
    return c + uv[:, :1] * eu + uv[:, 1:] * ev, uv


def visible_surfaces(scene: Scene, cam: PinholeCamera, spec: BevSpec, texture, step: float = 0.02,
                     tol: float = 1e-6) -> VisibleSurfaces:
    """``texture`` is an object with ``lookup(chart_ids, uv) -> bool`` (chart id = quad index)."""
    caster = _caster(scene)
    c = np.asarray(cam.pose.position, dtype=np.float64)
    value = np.zeros((spec.rows, spec.cols), dtype=bool)
    visible = np.zeros_like(value)
    total = 0
    for chart, q in enumerate(scene.quads()):
        pts, uv = _quad_samples(q, step)
        fwd, right, up = to_bev_frame(pts, cam.pose)
        row, col, inside = spec.cell_index(fwd, right)
        keep = inside & (up < spec.height_cutoff)
        local = (pts - c) @ cam.pose.rotation
        z = local[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam.focal * local[:, 0] / z + cam.cx
            v = cam.focal * local[:, 1] / z + cam.cy
        keep &= (z > 0) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
        idx = np.nonzero(keep)[0]
        if not len(idx):
            continue
        sight = caster.cast(c, pts[idx] - c)
        idx = idx[sight.t >= 1.0 - tol]
        total += len(idx)
        visible[row[idx], col[idx]] = True
        white = texture.lookup(np.full(len(idx), chart), uv[idx])
        value[row[idx[white]], col[idx[white]]] = True
    return VisibleSurfaces(value, visible, total)
