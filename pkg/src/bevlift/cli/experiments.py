"""Desk-scale training experiments: one small dataset/model profile shared by the demos and the acceptance suite.

Everything is cached by directory: a dataset with a manifest is reused, and
training resumes from its latest checkpoint (a finished run does no work).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..model import ModelConfig, TrainConfig, ZeroBev, model_from_checkpoint, train
from ..texgen import DataVariant, DatasetConfig, RenderConfig, generate_dataset, load_dataset
from .evaluate import geometric_maps, modality_maps, predict_maps, score
from .metrics import MetricsReport

log = logging.getLogger("bevlift")


@dataclass(frozen=True)
class SmokeProfile:
    seed: int = 7
    count: int = 600
    views_per_scene: int = 10
    fpv_res: int = 64
    bev_res: int = 48
    d: int = 32
    heads: int = 4
    ff_hidden: int = 64
    epochs: int = 15
    batch_size: int = 16
    lr: float = 1e-3
    decay: float = 0.9

    def render(self) -> RenderConfig:
        return RenderConfig(fpv_res=self.fpv_res, bev_res=self.bev_res)

    eval_seed: int = 1007
    eval_count: int = 200

    def dataset_config(self, tag: str, white_target: float = 0.2) -> DatasetConfig:
        return DatasetConfig(self.seed, self.count, DataVariant(tag, white_target), self.render(),
                             views_per_scene=self.views_per_scene)

    def evaluation_config(self) -> DatasetConfig:
        """Fresh scenes under another seed, never used for training by any variant."""
        return DatasetConfig(self.eval_seed, self.eval_count, DataVariant("Synth"), self.render(),
                             views_per_scene=self.views_per_scene)

    def train_config(self, variant: str = "base+aux", seed: int = 0) -> TrainConfig:
        m = ModelConfig(variant=variant, d=self.d, heads=self.heads, ff_hidden=self.ff_hidden, fpv_res=self.fpv_res,
                        bev_res=self.bev_res, seed=seed)
        return TrainConfig(model=m, epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, decay=self.decay,
                           seed=seed)


SMOKE = SmokeProfile()


def cached_dataset(root, cfg: DatasetConfig, audit: bool = False):
    root = Path(root)
    m = root / "manifest.json"
    if not m.exists() or json.loads(m.read_text())["config"] != json.loads(json.dumps(cfg.to_dict())):
        log.info("generating %d %s samples in %s", cfg.count, cfg.variant.tag, root)
        generate_dataset(root, cfg, audit=audit)
    return load_dataset(root)


def dataset(root, tag: str, white_target: float = 0.2, profile: SmokeProfile = SMOKE, audit: bool = False):
    return cached_dataset(root, profile.dataset_config(tag, white_target), audit)


def evaluation_set(root, profile: SmokeProfile = SMOKE) -> list:
    ds = cached_dataset(root, profile.evaluation_config())
    return [ds[k] for k in range(len(ds))]


def trained_model(ds, out, variant: str = "base+aux", profile: SmokeProfile = SMOKE, seed: int = 0) -> ZeroBev:
    out = Path(out)
    train(ds, profile.train_config(variant, seed), out, resume=True)
    return model_from_checkpoint(out / "best.zbt")


def held_out(ds, splits=("test", "val")) -> list:
    return [ds.load_index(i) for s in splits for i in ds.split(s)]


def zero_shot(model: ZeroBev, triplets, modality: str = "semantic", seed: int = 0) -> dict[str, MetricsReport]:
    """Model report on a held-out modality plus the empty and shuffled controls."""
    pairs = modality_maps(triplets, modality, seed)
    preds = predict_maps(model, pairs)
    return {"model": score(pairs, preds, "model", modality), "empty": score(pairs, preds, "model", modality, "empty"),
            "shuffled": score(pairs, preds, "model", modality, "shuffled")}


def baseline(triplets, modality: str = "semantic", depth_mode: str = "exact", seed: int = 0) -> MetricsReport:
    pairs = modality_maps(triplets, modality, seed)
    return score(pairs, geometric_maps(pairs, depth_mode), f"baseline:{depth_mode}", modality)
