"""IoU and Dice bookkeeping for BEV maps, accumulated over samples."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SUBSETS = ("all", "occluded", "visible")
EMPTY_UNION = "excluded"


def _check(pred, gt, mask):
    pred, gt = np.asarray(pred, dtype=bool), np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and target {gt.shape} differ")
    mask = np.ones(gt.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != gt.shape:
        raise ValueError(f"mask {mask.shape} does not match target {gt.shape}")
    return pred, gt, mask


def intersection_union(pred, gt, mask=None) -> tuple[int, int]:
    pred, gt, mask = _check(pred, gt, mask)
    return int((pred & gt & mask).sum()), int(((pred | gt) & mask).sum())


def class_iou(pred, gt, mask=None) -> float | None:
    """|P & G| / |P | G| inside ``mask``; ``None`` when both are empty there (undefined)."""
    inter, union = intersection_union(pred, gt, mask)
    return None if union == 0 else inter / union


def pixel_iou(triples) -> float:
    """Global IoU: intersections and unions summed over every (pred, gt, mask) before dividing."""
    triples = list(triples)
    if not triples:
        raise ValueError("pixel IoU of an empty batch")
    inter = union = 0
    for pred, gt, mask in triples:
        i, u = intersection_union(pred, gt, mask)
        inter, union = inter + i, union + u
    return 1.0 if union == 0 else inter / union


@dataclass
class Accumulator:
    """Running sums for one subset: per-class IoU lists plus global counts and soft Dice terms."""
    per_class: dict[str, list[float]] = field(default_factory=dict)
    inter: int = 0
    union: int = 0
    dice_inter: float = 0.0
    dice_denom: float = 0.0
    undefined: int = 0

    def add(self, name: str, prob: np.ndarray, gt: np.ndarray, mask: np.ndarray, threshold: float = 0.5) -> None:
        prob = np.asarray(prob, dtype=np.float64)
        gt = np.asarray(gt, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        i, u = intersection_union(prob > threshold, gt, mask)
        self.inter += i
        self.union += u
        if u == 0:
            self.undefined += 1
        else:
            self.per_class.setdefault(name, []).append(i / u)
        self.dice_inter += float((prob * gt * mask).sum())
        self.dice_denom += float((prob * mask).sum() + (gt & mask).sum())

    def result(self, samples: int) -> dict:
        cls = {k: float(np.mean(v)) for k, v in sorted(self.per_class.items())}
        return {"class_iou": cls, "mean_class_iou": float(np.mean(list(cls.values()))) if cls else None,
                "pixel_iou": None if self.union == 0 else self.inter / self.union,
                "dice": 0.0 if self.dice_denom == 0 else 2.0 * self.dice_inter / self.dice_denom,
                "samples": samples, "undefined": self.undefined}


@dataclass
class MetricsReport:
    """One schema for eval, baseline and train: ``subsets[tag]`` holds the numbers for that cell subset."""
    source: str
    modality: str
    subsets: dict[str, dict]
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"source": self.source, "modality": self.modality, "subsets": self.subsets,
                           "meta": {"empty_union": EMPTY_UNION, **self.meta}}, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "MetricsReport":
        d = json.loads(text)
        return MetricsReport(d["source"], d["modality"], d["subsets"], d.get("meta", {}))

    def get(self, subset: str, key: str):
        return self.subsets[subset][key]


class ReportBuilder:
    """Feeds one accumulator per subset; occluded = fov & ~observed, visible = fov & observed."""

    def __init__(self, source: str, modality: str):
        self.source, self.modality = source, modality
        self.acc = {s: Accumulator() for s in SUBSETS}
        self.samples = 0

    def add(self, name: str, prob, gt, fov, observed) -> None:
        fov = np.asarray(fov, dtype=bool)
        observed = np.asarray(observed, dtype=bool)
        self.acc["all"].add(name, prob, gt, fov)
        self.acc["occluded"].add(name, prob, gt, fov & ~observed)
        self.acc["visible"].add(name, prob, gt, fov & observed)
        self.samples += 1

    def report(self, **meta) -> MetricsReport:
        return MetricsReport(self.source, self.modality, {s: a.result(self.samples) for s, a in self.acc.items()},
                             meta)
