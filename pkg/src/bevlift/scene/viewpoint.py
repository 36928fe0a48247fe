"""Camera placement on free floor space."""
from __future__ import annotations

import math

import numpy as np

from ..geometry.cameras import Pose
from .generate import Scene

EYE_HEIGHT = 1.5
CLEARANCE = 0.2
LOOKAHEAD = 0.5


class ViewpointError(RuntimeError):
    pass


def obstacle_distance(scene: Scene, xy: np.ndarray) -> np.ndarray:
    """Planar distance from points to the nearest wall or furniture footprint (0 inside)."""
    xy = np.atleast_2d(xy)
    lx, ly = scene.size
    d = np.minimum.reduce([xy[:, 0], lx - xy[:, 0], xy[:, 1], ly - xy[:, 1]])
    d = np.maximum(d, 0.0)
    for x0, y0, x1, y1, _, _ in scene.boxes:
        dx = np.maximum.reduce([x0 - xy[:, 0], np.zeros(len(xy)), xy[:, 0] - x1])
        dy = np.maximum.reduce([y0 - xy[:, 1], np.zeros(len(xy)), xy[:, 1] - y1])
        d = np.minimum(d, np.hypot(dx, dy))
    return d


def sample_viewpoint(scene: Scene, seed: int, eye_height: float = EYE_HEIGHT, clearance: float = CLEARANCE,
                     lookahead: float = LOOKAHEAD, max_tries: int = 1000) -> Pose:
    """Uniform position over free floor and uniform yaw, level pitch.

    A draw is rejected when it is closer than ``clearance`` to an obstacle or
    when the ``lookahead`` metres in front of it are blocked.
    """
    rng = np.random.default_rng([seed, 0x7E1])
    lx, ly = scene.size
    ahead = np.linspace(0.0, lookahead, 11)
    for _ in range(max_tries):
        p = rng.uniform([0.0, 0.0], [lx, ly])
        yaw = float(rng.uniform(-math.pi, math.pi))
        if obstacle_distance(scene, p)[0] < clearance:
            continue
        path = p + ahead[:, None] * np.array([math.cos(yaw), math.sin(yaw)])
        if np.any(obstacle_distance(scene, path) <= 0.0):
            continue
        return Pose((float(p[0]), float(p[1]), eye_height), yaw, 0.0)
    raise ViewpointError(f"no free viewpoint found in {max_tries} draws (scene seed {scene.seed})")
