"""Per-chart texture assignment for a rendered scene.

Every UV chart carries its own raster.  Synth charts draw from a seeded bank
of synthetic textures with a random torus shift and one of the eight square
symmetries, chosen from a stream keyed by (sample seed, chart id) alone, so
which texture lands on which surface cannot depend on what the surface is.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..scene.render import texture_lookup
from .synth import TEXTURE_SIZE, BinaryTexture, modsem_chart_texture, synth_texture

BANK_SIZE = 256
MODSEM_BANK_SIZE = 64


def bank_texture_seed(bank_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([bank_seed, index, 3]).generate_state(1)[0])


@lru_cache(maxsize=4096)
def bank_texture(bank_seed: int, index: int, target: float, size: int) -> BinaryTexture:
    return synth_texture(bank_texture_seed(bank_seed, index), target, size)


@lru_cache(maxsize=4096)
def modsem_bank_texture(bank_seed: int, index: int, target: float, size: int) -> BinaryTexture:
    return modsem_chart_texture(bank_texture_seed(bank_seed, index), target, size)


def apply_symmetry(r: np.ndarray, sym: int) -> np.ndarray:
    out = np.rot90(r, sym % 4)
    return out.T if sym >= 4 else out


class ChartTextures:
    """Lazily materialised rasters indexed by chart id."""

    size: int = TEXTURE_SIZE

    def chart_texture(self, chart: int) -> np.ndarray:
        raise NotImplementedError

    def lookup(self, charts: np.ndarray, uv: np.ndarray) -> np.ndarray:
        out = np.zeros(len(charts), dtype=bool)
        for c in np.unique(charts):
            sel = charts == c
            out[sel] = texture_lookup(self.chart_texture(int(c)), uv[sel]) > 0.5
        return out

    def provenance(self) -> dict:
        raise NotImplementedError


class SynthTextures(ChartTextures):
    def __init__(self, seed: int, target: float, size: int = TEXTURE_SIZE, bank_seed: int = 0,
                 bank_size: int = BANK_SIZE):
        self.seed, self.target, self.size = seed, target, size
        self.bank_seed, self.bank_size = bank_seed, bank_size

    def placement(self, chart: int) -> tuple[int, int, int, int]:
        rng = np.random.default_rng([self.seed, chart, 0xC4A])
        idx = int(rng.integers(self.bank_size))
        dy, dx = (int(v) for v in rng.integers(0, self.size, 2))
        return idx, dy, dx, int(rng.integers(8))

    def source(self, chart: int) -> BinaryTexture:
        return bank_texture(self.bank_seed, self.placement(chart)[0], self.target, self.size)

    def chart_texture(self, chart: int) -> np.ndarray:
        idx, dy, dx, sym = self.placement(chart)
        r = bank_texture(self.bank_seed, idx, self.target, self.size).raster
        return apply_symmetry(np.roll(r, (dy, dx), axis=(0, 1)), sym)

    def provenance(self) -> dict:
        return {"kind": "synth", "seed": self.seed, "target": self.target, "size": self.size,
                "bank_seed": self.bank_seed, "bank_size": self.bank_size}


class ModSemTextures(ChartTextures):
    """Object charts white then eroded to the target; floor and walls black."""

    def __init__(self, chart_labels: np.ndarray, seed: int, target: float, size: int = TEXTURE_SIZE,
                 bank_seed: int = 0, bank_size: int = MODSEM_BANK_SIZE, first_object_label: int = 3):
        self.labels = np.asarray(chart_labels)
        self.seed, self.target, self.size = seed, target, size
        self.bank_seed, self.bank_size = bank_seed, bank_size
        self.first_object = first_object_label

    def placement(self, chart: int) -> tuple[int, int]:
        rng = np.random.default_rng([self.seed, chart, 0x5E4])
        return int(rng.integers(self.bank_size)), int(rng.integers(8))

    def chart_texture(self, chart: int) -> np.ndarray:
        if self.labels[chart] < self.first_object:
            return np.zeros((self.size, self.size), dtype=bool)
        idx, sym = self.placement(chart)
        return apply_symmetry(modsem_bank_texture(self.bank_seed, idx, self.target, self.size).raster, sym)

    def provenance(self) -> dict:
        return {"kind": "modsem", "seed": self.seed, "target": self.target, "size": self.size,
                "bank_seed": self.bank_seed, "bank_size": self.bank_size}


def textures_from_provenance(prov: dict, chart_labels: np.ndarray) -> ChartTextures:
    if prov["kind"] == "synth":
        return SynthTextures(prov["seed"], prov["target"], prov["size"], prov["bank_seed"], prov["bank_size"])
    if prov["kind"] == "modsem":
        return ModSemTextures(chart_labels, prov["seed"], prov["target"], prov["size"], prov["bank_seed"],
                              prov["bank_size"])
    raise ValueError(f"unknown texture kind {prov['kind']!r}")
