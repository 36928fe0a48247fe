"""Zero-shot evaluation on held-out modalities, and the purely geometric baseline on the same maps."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import BevSpec, PinholeCamera, Pose, geometric_projection
from ..model.train import NOISE_SIGMA, noisy_depth, projected_zero
from ..numeric import no_grad
from ..scene import FIRST_FURNITURE, FLOOR, WALL, furniture_class, write_png
from ..texgen.triplet import depth_proj_pair
from .metrics import MetricsReport, ReportBuilder

MODALITIES = ("semantic", "rectangles")
CONTROLS = ("empty", "shuffled")


@dataclass
class ZeroShotMap:
    """One held-out modality instance: FPV input, BEV target and the cell masks of its sample."""
    name: str
    sample: int
    zero: np.ndarray
    gt: np.ndarray
    fov: np.ndarray
    observed: np.ndarray


def class_name(label: int) -> str:
    if label == FLOOR:
        return "floor"
    if label == WALL:
        return "wall"
    return furniture_class(label - FIRST_FURNITURE)[0]


def _camera(t) -> PinholeCamera:
    r = t.provenance["render"]
    return PinholeCamera.from_fov(t.depth.shape[1], fov_deg=r["fov_deg"], pose=Pose.from_dict(t.provenance["pose"]))


def _spec(t) -> BevSpec:
    r = t.provenance["render"]
    return BevSpec(rows=r["bev_res"], cols=r["bev_res"], extent_forward=r["bev_extent"],
                   extent_lateral=r["bev_extent"])


def semantic_maps(t, k: int) -> list[ZeroShotMap]:
    """Per class visible in the FPV: I_zero = class mask, target = overhead class mask inside the fov."""
    out = []
    for c in np.unique(t.semantics):
        if c < FLOOR:
            continue
        gt = (t.bev_semantics == c) & t.fov
        out.append(ZeroShotMap(class_name(int(c)), k, (t.semantics == c).astype(np.float64), gt, t.fov, t.observed))
    return out


def rectangle_maps(t, k: int, seed: int = 0) -> list[ZeroShotMap]:
    """Random image rectangles carried to the ground through the true depth."""
    img, m, _, _ = depth_proj_pair(int(np.random.SeedSequence([seed, k, 0x2EC]).generate_state(1)[0]),
                                   t.depth, _camera(t), _spec(t))
    return [ZeroShotMap("rectangles", k, img, m > 0.5, t.fov, t.observed)]


def modality_maps(triplets, modality: str, seed: int = 0) -> list[tuple[object, ZeroShotMap]]:
    if modality not in MODALITIES:
        raise ValueError(f"modality must be one of {MODALITIES}")
    out = []
    for k, t in enumerate(triplets):
        maps = semantic_maps(t, k) if modality == "semantic" else rectangle_maps(t, k, seed)
        out.extend((t, m) for m in maps)
    return out


def predict_maps(model, pairs, batch_size: int = 16, depth_mode: str = "exact") -> list[np.ndarray]:
    """Model probabilities for every (triplet, map) pair; the map's I_zero replaces the sample's own."""
    model.eval()
    preds = []
    with no_grad():
        for s in range(0, len(pairs), batch_size):
            chunk = pairs[s:s + batch_size]
            rgb = np.stack([t.rgb for t, _ in chunk])
            zero = np.stack([m.zero for _, m in chunk])
            geo = None
            if model.cfg.variant == "residual":
                geo = np.stack([projected_zero(t, model.cfg, depth_mode, NOISE_SIGMA, m.sample, zero=m.zero)
                                for t, m in chunk])
            out = model(rgb, zero, geo)
            preds.extend(out["zero"].data)
    return preds


def geometric_maps(pairs, depth_mode: str = "exact", sigma: float = NOISE_SIGMA) -> list[np.ndarray]:
    """Backproject each map's I_zero with exact or perturbed depth and max-pool onto the ground."""
    preds = []
    for t, m in pairs:
        cam = _camera(t)
        depth = t.depth if depth_mode == "exact" else noisy_depth(t.depth, sigma, m.sample)
        preds.append(geometric_projection(depth, cam, m.zero, _spec(t), "max", t.fov).values[..., 0])
    return preds


def score(pairs, preds, source: str, modality: str, control: str | None = None, **meta) -> MetricsReport:
    """Accumulate IoU/Dice per subset.  ``shuffled`` scores each prediction against another sample's
    target of the same class; ``empty`` replaces predictions by all-zero maps."""
    maps = [m for _, m in pairs]
    targets = list(range(len(maps)))
    if control == "shuffled":
        groups: dict[str, list[int]] = {}
        for i, m in enumerate(maps):
            groups.setdefault(m.name, []).append(i)
        for idx in groups.values():
            for a, b in zip(idx, idx[1:] + idx[:1]):
                targets[a] = b
    elif control not in (None, "empty"):
        raise ValueError(f"control must be one of {CONTROLS}")
    rb = ReportBuilder(source if control is None else f"{source}:{control}", modality)
    for i, m in enumerate(maps):
        p = np.zeros_like(preds[i]) if control == "empty" else preds[i]
        g = maps[targets[i]]
        rb.add(m.name, p, g.gt, g.fov, g.observed)
    return rb.report(**meta)


def _up(a: np.ndarray, size: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    ri = (np.arange(size) * a.shape[0]) // size
    ci = (np.arange(size) * a.shape[1]) // size
    a = a[ri][:, ci]
    return np.repeat(a[..., None], 3, -1) if a.ndim == 2 else a


def write_panel(path, t, m: ZeroShotMap, pred: np.ndarray, size: int = 128) -> None:
    """FPV colour | FPV modality | predicted BEV | target BEV, left to right; BEV forward is up."""
    pad = np.ones((size, 4, 3))
    tiles = [_up(t.rgb, size), _up(m.zero, size), _up(pred[::-1], size), _up(m.gt[::-1], size)]
    img = np.concatenate([x for tile in tiles for x in (tile, pad)][:-1], axis=1)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_png(path, img)
