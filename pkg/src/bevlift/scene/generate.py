"""Procedural rooms: floor, four walls and non-overlapping box furniture."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..numeric.checkpoint import atomic_write, decode_params, encode_params
from .mesh import Quad, TriMesh, box_quads, quads_to_mesh, wall_quads

BACKGROUND, FLOOR, WALL = 0, 1, 2
FIRST_FURNITURE = 3

# name, height range (m), footprint side range (m), albedo
FURNITURE = [
    ("chair", (0.45, 1.0), (0.4, 0.6), (0.80, 0.35, 0.20)),
    ("table", (0.70, 0.80), (0.8, 1.6), (0.55, 0.40, 0.25)),
    ("sofa", (0.80, 1.00), (0.8, 2.0), (0.30, 0.45, 0.75)),
    ("bed", (0.50, 0.70), (1.4, 2.0), (0.85, 0.80, 0.70)),
    ("cabinet", (1.00, 2.00), (0.4, 1.2), (0.45, 0.30, 0.20)),
    ("plant", (0.50, 1.50), (0.3, 0.5), (0.20, 0.65, 0.25)),
]
FLOOR_ALBEDO = (0.60, 0.58, 0.55)
WALL_ALBEDO = (0.90, 0.90, 0.88)


def furniture_class(k: int):
    """Class ``k`` (0-based); classes past the named list are drawn from a fixed per-class stream."""
    if k < len(FURNITURE):
        return FURNITURE[k]
    r = np.random.default_rng(10_000 + k)
    h0 = r.uniform(0.3, 1.5)
    s0 = r.uniform(0.3, 1.2)
    return (f"object{k}", (h0, h0 + r.uniform(0.1, 0.5)), (s0, s0 + r.uniform(0.1, 0.6)),
            tuple(float(c) for c in r.uniform(0.15, 0.9, 3)))


@dataclass(frozen=True)
class SceneParams:
    room_min: float = 5.0
    room_max: float = 8.0
    wall_height: float = 2.5
    wall_thickness: float = 0.1
    furniture_min: int = 3
    furniture_max: int = 8
    n_classes: int = 6
    gap: float = 0.1
    placement_tries: int = 200

    def validate(self) -> None:
        if not (0 < self.room_min <= self.room_max):
            raise ValueError("room size range must be positive and ordered")
        if self.wall_height <= 0 or self.wall_thickness <= 0 or self.n_classes <= 0:
            raise ValueError("scene parameters must be positive")
        if not (0 <= self.furniture_min <= self.furniture_max):
            raise ValueError("furniture count range must be non-negative and ordered")


@dataclass
class Scene:
    seed: int
    params: SceneParams
    size: tuple[float, float]
    boxes: np.ndarray           # (N, 6): x0, y0, x1, y1, height, label
    provenance: dict = field(default_factory=dict)

    @property
    def bounds(self) -> np.ndarray:
        t = self.params.wall_thickness
        return np.array([-t, -t, 0.0, self.size[0] + t, self.size[1] + t, self.params.wall_height])

    @property
    def n_labels(self) -> int:
        return FIRST_FURNITURE + self.params.n_classes

    @property
    def palette(self) -> dict[int, str]:
        p = {BACKGROUND: "background", FLOOR: "floor", WALL: "wall"}
        for k in range(self.params.n_classes):
            p[FIRST_FURNITURE + k] = furniture_class(k)[0]
        return p

    def albedo(self) -> np.ndarray:
        a = np.zeros((self.n_labels, 3))
        a[FLOOR], a[WALL] = FLOOR_ALBEDO, WALL_ALBEDO
        for k in range(self.params.n_classes):
            a[FIRST_FURNITURE + k] = furniture_class(k)[3]
        return a

    def quads(self) -> list[Quad]:
        lx, ly = self.size
        qs = [Quad((0, 0, 0), (lx, 0, 0), (0, ly, 0), FLOOR)]
        qs += wall_quads(lx, ly, self.params.wall_height, self.params.wall_thickness, WALL)
        for x0, y0, x1, y1, h, lab in self.boxes:
            qs += box_quads(x0, y0, x1, y1, h, int(lab))
        return qs

    @cached_property
    def layout(self) -> tuple[TriMesh, np.ndarray, np.ndarray]:
        """(mesh, chart sizes in metres, chart labels); chart ``i`` is quad ``i``."""
        qs = self.quads()
        mesh = quads_to_mesh(qs)
        mesh.validate()
        return mesh, np.array([q.size for q in qs]), np.array([q.label for q in qs], dtype=np.int64)

    @property
    def chart_labels(self) -> np.ndarray:
        return self.layout[2]

    @property
    def mesh(self) -> TriMesh:
        return self.layout[0]

    @property
    def meshes(self) -> dict[str, TriMesh]:
        m = self.mesh
        groups = {"floor": m.labels == FLOOR, "walls": m.labels == WALL, "furniture": m.labels >= FIRST_FURNITURE}
        out = {}
        for name, sel in groups.items():
            out[name] = TriMesh(m.vertices, m.faces[sel], m.labels[sel], m.uv, m.charts[sel])
        return out

    def to_json(self) -> dict:
        return {"format": "ZBS1", "seed": self.seed, "params": asdict(self.params), "size": list(self.size),
                "palette": {str(k): v for k, v in self.palette.items()}, "provenance": self.provenance}


def _overlaps(a, b, gap: float) -> bool:
    return not (a[2] + gap <= b[0] or b[2] + gap <= a[0] or a[3] + gap <= b[1] or b[3] + gap <= a[1])


def generate_scene(seed: int, params: SceneParams | None = None) -> Scene:
    params = params or SceneParams()
    params.validate()
    rng = np.random.default_rng([seed, 0x5CE7E])
    lx, ly = (float(v) for v in rng.uniform(params.room_min, params.room_max, 2))
    requested = int(rng.integers(params.furniture_min, params.furniture_max + 1))
    boxes: list[tuple] = []
    failed = 0
    for _ in range(requested):
        k = int(rng.integers(params.n_classes))
        _, hr, sr, _ = furniture_class(k)
        for _ in range(params.placement_tries):
            w, d = rng.uniform(*sr, size=2)
            h = rng.uniform(*hr)
            if w >= lx or d >= ly:
                continue
            x0, y0 = rng.uniform(0, lx - w), rng.uniform(0, ly - d)
            cand = (x0, y0, x0 + w, y0 + d, h, FIRST_FURNITURE + k)
            if not any(_overlaps(cand, b, params.gap) for b in boxes):
                boxes.append(cand)
                break
        else:
            failed += 1
    prov = {"requested_furniture": requested, "placed_furniture": len(boxes)}
    if failed:
        prov["placement_failures"] = failed
    return Scene(seed, params, (lx, ly), np.array(boxes, dtype=np.float64).reshape(-1, 6), prov)


def scene_from_boxes(size: tuple[float, float], boxes, params: SceneParams | None = None, seed: int = 0) -> Scene:
    """Hand-built room, for tests and demos."""
    return Scene(seed, params or SceneParams(), (float(size[0]), float(size[1])),
                 np.asarray(boxes, dtype=np.float64).reshape(-1, 6), {"hand_built": True})


SCENE_MAGIC = b"ZBS1"


def save_scene(path, scene: Scene) -> None:
    """Binary geometry (``ZBS1``) plus a ``.json`` sidecar with seed, params and palette."""
    path = Path(path)
    mesh, chart_sizes, chart_labels = scene.layout
    arrays = {"size": np.array(scene.size), "boxes": scene.boxes, "vertices": mesh.vertices,
              "faces": mesh.faces.astype(np.float64), "labels": mesh.labels.astype(np.float64),
              "uv": mesh.uv, "charts": mesh.charts.astype(np.float64), "chart_sizes": chart_sizes,
              "chart_labels": chart_labels.astype(np.float64)}
    atomic_write(path, SCENE_MAGIC + encode_params(arrays)[4:])
    atomic_write(path.with_suffix(".json"), json.dumps(scene.to_json(), indent=2).encode())


def load_scene(path) -> Scene:
    path = Path(path)
    buf = path.read_bytes()
    if buf[:4] != SCENE_MAGIC:
        raise ValueError("not a ZBS1 scene file")
    arrays = decode_params(b"ZBT1" + buf[4:])
    meta = json.loads(path.with_suffix(".json").read_text())
    scene = Scene(int(meta["seed"]), SceneParams(**meta["params"]), tuple(arrays["size"]), arrays["boxes"],
                  meta.get("provenance", {}))
    mesh, _, _ = scene.layout
    if not np.array_equal(mesh.vertices, arrays["vertices"]) or not np.array_equal(mesh.uv, arrays["uv"]):
        raise ValueError("scene geometry does not match its parameters")
    return scene
