"""Raycasting renderer for pinhole (first-person) and top-down orthographic views."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.cameras import OrthoCamera, PinholeCamera
from .generate import BACKGROUND, Scene
from .mesh import TriMesh

LIGHT = np.array([0.3, 0.5, 0.8]) / np.linalg.norm([0.3, 0.5, 0.8])
NAVIGABLE_HEIGHT = 0.10
_EDGE_TOL = 1e-9


@dataclass
class Hits:
    t: np.ndarray      # (R,) ray parameter, inf on miss
    face: np.ndarray   # (R,) face index, -1 on miss
    bary: np.ndarray   # (R, 2) barycentric (u, v) of the hit w.r.t. edges v1-v0, v2-v0


class RayCaster:
    """Ray/triangle intersection with per-face precomputed plane and dual edge basis.

    For a hit point p = v0 + u e1 + v e2, the coordinates come out as dot
    products with the dual basis (a1, a2) of (e1, e2), which turns the whole
    ray-by-face evaluation into a few small matrix products.  This is the same
    barycentric solution as Moller-Trumbore, reorganised for batching.
    """

    def __init__(self, mesh: TriMesh, chunk_elems: int = 1 << 18):
        tri = mesh.vertices[mesh.faces]
        self.v0 = tri[:, 0]
        e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
        n = np.cross(e1, e2)
        nn = np.einsum("ij,ij->i", n, n)
        self.normal = n
        self.a1 = np.cross(e2, n) / nn[:, None]
        self.a2 = np.cross(n, e1) / nn[:, None]
        self.off_n = np.einsum("ij,ij->i", self.v0, n)
        self.off_1 = np.einsum("ij,ij->i", self.v0, self.a1)
        self.off_2 = np.einsum("ij,ij->i", self.v0, self.a2)
        self.chunk = max(1, chunk_elems // max(len(self.v0), 1))

    def cast(self, origins: np.ndarray, dirs: np.ndarray, t_min: float = 1e-9) -> Hits:
        """Nearest hit per ray; ``origins`` is one shared point (3,) or one per ray (R, 3)."""
        origins = np.asarray(origins, dtype=np.float64)
        dirs = np.asarray(dirs, dtype=np.float64)
        R, F = len(dirs), len(self.v0)
        t_out = np.full(R, np.inf)
        f_out = np.full(R, -1, dtype=np.int64)
        b_out = np.zeros((R, 2))
        if F == 0:
            return Hits(t_out, f_out, b_out)
        basis = np.concatenate([self.normal, self.a1, self.a2], axis=0).T     # (3, 3F)
        offs = np.concatenate([self.off_n, self.off_1, self.off_2])
        shared = origins.ndim == 1
        if shared:
            od_all = origins @ basis - offs
        with np.errstate(divide="ignore", invalid="ignore"):
            for s in range(0, R, self.chunk):
                d = dirs[s:s + self.chunk]
                dd = d @ basis
                od = od_all if shared else origins[s:s + self.chunk] @ basis - offs
                dn, d1, d2 = dd[:, :F], dd[:, F:2 * F], dd[:, 2 * F:]
                on, o1, o2 = (od[..., :F], od[..., F:2 * F], od[..., 2 * F:])
                t = -on / dn
                u = o1 + t * d1
                v = o2 + t * d2
                ok = (t > t_min) & (u >= -_EDGE_TOL) & (v >= -_EDGE_TOL) & (u + v <= 1 + _EDGE_TOL)
                ok &= np.abs(dn) > 1e-15
                t[~ok] = np.inf
                best = np.argmin(t, axis=1)
                rows = np.arange(len(best))
                tb = t[rows, best]
                hit = np.isfinite(tb)
                sl = slice(s, s + len(best))
                t_out[sl] = tb
                f_out[sl] = np.where(hit, best, -1)
                b_out[sl] = np.where(hit[:, None], np.stack([u[rows, best], v[rows, best]], -1), 0.0)
        return Hits(t_out, f_out, b_out)


def moller_trumbore(origin: np.ndarray, direction: np.ndarray, mesh: TriMesh, eps: float = 1e-12):
    """Textbook single-ray intersection; returns (t, face) of the nearest hit or (inf, -1)."""
    tri = mesh.vertices[mesh.faces]
    best_t, best_f = np.inf, -1
    for f, (a, b, c) in enumerate(tri):
        e1, e2 = b - a, c - a
        p = np.cross(direction, e2)
        det = e1 @ p
        if abs(det) < eps:
            continue
        inv = 1.0 / det
        s = origin - a
        u = (s @ p) * inv
        if u < -_EDGE_TOL or u > 1 + _EDGE_TOL:
            continue
        q = np.cross(s, e1)
        v = (direction @ q) * inv
        if v < -_EDGE_TOL or u + v > 1 + _EDGE_TOL:
            continue
        t = (e2 @ q) * inv
        if 1e-9 < t < best_t:
            best_t, best_f = t, f
    return best_t, best_f


@dataclass
class RenderBundle:
    rgb: np.ndarray         # (H, W, 3)
    depth: np.ndarray       # (H, W) 0 where nothing was hit
    semantics: np.ndarray   # (H, W) label id
    zero: np.ndarray        # (H, W, 1) binary texture channel
    uv: np.ndarray          # (H, W, 2) chart-local texture coordinates of the hit
    points: np.ndarray      # (H, W, 3) world hit points
    chart: np.ndarray       # (H, W) chart id, -1 on miss

    @property
    def hit(self) -> np.ndarray:
        return self.depth > 0


def texture_lookup(texture: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Nearest texel; row follows v, column follows u.

    ``texture`` passed to the renderers is either one raster shared by all
    charts or an object with ``lookup(chart_ids, uv) -> bool``.
    """
    h, w = texture.shape[:2]
    col = np.clip(np.floor(uv[..., 0] * w).astype(np.int64), 0, w - 1)
    row = np.clip(np.floor(uv[..., 1] * h).astype(np.int64), 0, h - 1)
    return texture[row, col]


def _shade(scene: Scene, caster: RayCaster, hits: Hits, shape, texture) -> RenderBundle:
    mesh = scene.mesh
    hit = hits.face >= 0
    f = np.where(hit, hits.face, 0)
    labels = np.where(hit, mesh.labels[f], BACKGROUND)
    nrm = caster.normal[f] / np.linalg.norm(caster.normal[f], axis=1, keepdims=True)
    lam = 0.35 + 0.65 * np.abs(nrm @ LIGHT)
    rgb = np.where(hit[:, None], scene.albedo()[labels] * lam[:, None], 0.0)
    tri_uv = mesh.uv[mesh.faces[f]]                                     # (R, 3, 2)
    u, v = hits.bary[:, 0:1], hits.bary[:, 1:2]
    uv = (1 - u - v) * tri_uv[:, 0] + u * tri_uv[:, 1] + v * tri_uv[:, 2]
    uv = np.where(hit[:, None], uv, 0.0)
    tri = mesh.vertices[mesh.faces[f]]
    pts = (1 - u - v) * tri[:, 0] + u * tri[:, 1] + v * tri[:, 2]
    pts = np.where(hit[:, None], pts, np.nan)
    zero = np.zeros(len(f))
    if texture is not None:
        chart = mesh.charts[f]
        if isinstance(texture, np.ndarray):
            val = texture_lookup(texture, uv) > 0.5
        else:
            val = texture.lookup(chart, uv)
        zero = np.where(hit, val, False).astype(np.float64)
    H, W = shape
    return RenderBundle(np.clip(rgb, 0, 1).reshape(H, W, 3), np.zeros((H, W)), labels.reshape(H, W),
                        zero.reshape(H, W, 1), uv.reshape(H, W, 2), pts.reshape(H, W, 3),
                        np.where(hit, mesh.charts[f], -1).reshape(H, W))


def _caster(scene: Scene) -> RayCaster:
    c = scene.__dict__.get("_caster")
    if c is None:
        c = RayCaster(scene.mesh)
        scene.__dict__["_caster"] = c
    return c


def render_fpv(scene: Scene, cam: PinholeCamera, texture: np.ndarray | None = None) -> RenderBundle:
    """Depth is z-depth along the optical axis; misses get depth 0 and label 0."""
    caster = _caster(scene)
    dirs = (cam.pixel_directions().reshape(-1, 3)) @ cam.pose.rotation.T
    hits = caster.cast(np.asarray(cam.pose.position, dtype=np.float64), dirs)
    b = _shade(scene, caster, hits, (cam.height, cam.width), texture)
    b.depth = np.where(np.isfinite(hits.t), hits.t, 0.0).reshape(cam.height, cam.width)
    return b


def render_bev(scene: Scene, cam: OrthoCamera, texture: np.ndarray | None = None) -> RenderBundle:
    """One vertical ray per cell centre from the overhead sensor; depth is distance below the sensor."""
    caster = _caster(scene)
    sp = cam.spec
    xy = cam.cell_world_points().reshape(-1, 2)
    origins = np.concatenate([xy, np.full((len(xy), 1), cam.sensor_height)], axis=1)
    dirs = np.tile([0.0, 0.0, -1.0], (len(origins), 1))
    hits = caster.cast(origins, dirs)
    b = _shade(scene, caster, hits, (sp.rows, sp.cols), texture)
    b.depth = np.where(np.isfinite(hits.t), hits.t, 0.0).reshape(sp.rows, sp.cols)
    return b


def bev_aux(bundle: RenderBundle, cam: OrthoCamera, threshold: float = NAVIGABLE_HEIGHT) -> np.ndarray:
    """(rows, cols, 2) navigable / obstacle channels from the overhead depth."""
    hit = bundle.hit
    height = cam.sensor_height - bundle.depth
    nav = hit & (height <= threshold)
    obs = hit & (height > threshold)
    return np.stack([nav, obs], axis=-1).astype(np.float64)
