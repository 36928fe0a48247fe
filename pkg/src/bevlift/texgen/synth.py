"""Pseudo-random binary textures with a controlled white fraction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .morphology import MAX_SIZE, MIN_SIZE, StructuringElement, dilate, erode, opening, toroidal_distance

SEED_FRACTION = 0.05
MAX_OVERSHOOT = 0.04
TEXTURE_SIZE = 256
NOISE_LATTICES = (16, 32)


class TextureError(RuntimeError):
    def __init__(self, msg: str, trace: list):
        super().__init__(msg)
        self.trace = trace


@dataclass
class BinaryTexture:
    raster: np.ndarray                 # (H, W) bool
    seed: int
    target: float
    kind: str = "synth"
    trace: list = field(default_factory=list)

    @property
    def white_fraction(self) -> float:
        return int(self.raster.sum()) / self.raster.size

    def provenance(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "target": self.target, "size": list(self.raster.shape),
                "white_fraction": self.white_fraction, "trace": self.trace}


def value_noise(rng: np.random.Generator, size: int, lattice: int, octaves: int = 2) -> np.ndarray:
    """Periodic smooth noise: random lattice values, smoothstep interpolation, a few octaves."""
    out = np.zeros((size, size))
    amp = 1.0
    for o in range(octaves):
        g = lattice * (2 ** o)
        vals = rng.random((g, g))
        t = np.arange(size) * g / size
        i0 = np.floor(t).astype(int)
        f = t - i0
        f = f * f * (3 - 2 * f)
        i1 = (i0 + 1) % g
        rows0, rows1 = vals[i0], vals[i1]
        a = rows0[:, i0] * (1 - f)[None, :] + rows0[:, i1] * f[None, :]
        b = rows1[:, i0] * (1 - f)[None, :] + rows1[:, i1] * f[None, :]
        out += amp * (a * (1 - f)[:, None] + b * f[:, None])
        amp *= 0.5
    return out


def _grow_to(x: np.ndarray, target: float) -> np.ndarray:
    """Add the black pixels nearest to white, in distance order, until the white count reaches target."""
    need = int(np.ceil(target * x.size - 1e-9)) - int(x.sum())
    if need <= 0:
        return x
    d = toroidal_distance(x).ravel()
    order = np.argsort(d, kind="stable")
    black = order[~x.ravel()[order]]
    out = x.copy().ravel()
    out[black[:need]] = True
    return out.reshape(x.shape)


def synth_texture(seed: int, target: float, size: int = TEXTURE_SIZE, max_iters: int = 2000) -> BinaryTexture:
    """Accumulate opened noise structures up to 5% white, then dilate up to ``target``.

    The final white fraction lies in [target, target + 0.04].  A dilation
    that would overshoot is retried with smaller elements; if even the
    smallest overshoots, the texture grows by distance order to land exactly
    on the target.
    """
    if not (0.05 <= target <= 0.5):
        raise ValueError("target white fraction must lie in [0.05, 0.5]")
    rng = np.random.default_rng([seed, 0x7E7])
    tex = np.zeros((size, size), dtype=bool)
    trace: list = []
    n = tex.size
    ceiling = target + MAX_OVERSHOOT
    it = 0
    while tex.sum() < SEED_FRACTION * n:
        it += 1
        if it > max_iters:
            raise TextureError("structure accumulation did not reach the seed fraction", trace)
        lattice = int(rng.choice(NOISE_LATTICES))
        q = float(rng.uniform(0.85, 0.97))
        el = StructuringElement.random(rng)
        noise = value_noise(rng, size, lattice)
        s = opening(noise > np.quantile(noise, q), el)
        cand = tex | s
        ok = cand.sum() <= ceiling * n
        trace.append({"op": "add", "lattice": lattice, "quantile": q, "shape": el.shape, "size": el.size,
                      "accepted": bool(ok)})
        if ok:
            tex = cand
    while tex.sum() < target * n:
        it += 1
        if it > max_iters:
            raise TextureError("dilation did not reach the target fraction", trace)
        el = StructuringElement.random(rng)
        cand = dilate(tex, el)
        while cand.sum() > ceiling * n and el.size > MIN_SIZE:
            el = StructuringElement(el.shape, max(MIN_SIZE, el.size // 2))
            cand = dilate(tex, el)
        if cand.sum() <= ceiling * n:
            trace.append({"op": "dilate", "shape": el.shape, "size": el.size})
            tex = cand
        else:
            trace.append({"op": "grow", "target": target})
            tex = _grow_to(tex, target)
    return BinaryTexture(tex, seed, target, "synth", trace)


def modsem_chart_texture(seed: int, target: float, size: int = TEXTURE_SIZE, max_iters: int = 200) -> BinaryTexture:
    """An all-white object chart eroded with random elements down to ``target``.

    Outside the chart counts as black, so erosion eats in from the chart border.
    """
    if not (0.05 <= target <= 0.5):
        raise ValueError("target white fraction must lie in [0.05, 0.5]")
    rng = np.random.default_rng([seed, 0x5E7])
    pad = MAX_SIZE
    tex = np.zeros((size + 2 * pad, size + 2 * pad), dtype=bool)
    tex[pad:-pad, pad:-pad] = True
    n = size * size
    trace: list = []
    low = target - MAX_OVERSHOOT
    it = 0
    while tex.sum() > target * n:
        it += 1
        if it > max_iters:
            raise TextureError("erosion did not reach the target fraction", trace)
        el = StructuringElement.random(rng)
        cand = erode(tex, el)
        while cand.sum() < low * n and el.size > MIN_SIZE:
            el = StructuringElement(el.shape, max(MIN_SIZE, el.size // 2))
            cand = erode(tex, el)
        if cand.sum() >= low * n:
            trace.append({"op": "erode", "shape": el.shape, "size": el.size})
            tex = cand
        else:
            trace.append({"op": "shrink", "target": target})
            keep = int(np.floor(target * n + 1e-9))
            d = toroidal_distance(~tex).ravel()
            order = np.argsort(-d, kind="stable")
            out = np.zeros(tex.size, dtype=bool)
            out[order[:keep]] = True
            tex = out.reshape(tex.shape) & tex
    return BinaryTexture(tex[pad:-pad, pad:-pad].copy(), seed, target, "modsem", trace)


def replay_texture(prov: dict) -> BinaryTexture:
    """Regenerate a texture from its provenance record."""
    size = int(prov["size"][0])
    if prov["kind"] == "synth":
        return synth_texture(prov["seed"], prov["target"], size)
    if prov["kind"] == "modsem":
        return modsem_chart_texture(prov["seed"], prov["target"], size)
    raise ValueError(f"unknown texture kind {prov['kind']!r}")
