"""Does the binary modality carry information about scene semantics?"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

MIN_SAMPLES = 100


class AuditError(ValueError):
    pass


@dataclass
class AuditReport:
    n_samples: int
    p_white: float
    rates: dict[int, float]           # P(white | class)
    counts: dict[int, int]
    deviation: dict[int, float]       # |P(white | class) - P(white)|
    mutual_information: float         # bits, pixel value vs class
    patch_mutual_information: float   # bits, quantized patch white fraction vs majority class
    degenerate: bool
    bev: dict = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.deviation.values()) if self.deviation else 0.0

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "p_white": self.p_white,
                "rates": {str(k): v for k, v in self.rates.items()},
                "counts": {str(k): v for k, v in self.counts.items()},
                "deviation": {str(k): v for k, v in self.deviation.items()},
                "max_deviation": self.max_deviation, "mutual_information": self.mutual_information,
                "patch_mutual_information": self.patch_mutual_information, "degenerate": self.degenerate,
                "bev": self.bev}


def _mi(joint: np.ndarray) -> float:
    p = joint / max(joint.sum(), 1)
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / (px @ py)[nz])))


class _Counter:
    def __init__(self, n_labels: int, patch: int, bins: int):
        self.white = np.zeros(n_labels)
        self.total = np.zeros(n_labels)
        self.patch = patch
        self.bins = bins
        self.patch_joint = np.zeros((bins, n_labels))

    def add(self, zero: np.ndarray, labels: np.ndarray, valid: np.ndarray):
        lab = labels[valid]
        z = zero[valid] > 0.5
        n = len(self.total)
        self.total += np.bincount(lab, minlength=n)[:n]
        self.white += np.bincount(lab, weights=z, minlength=n)[:n]
        p = self.patch
        h, w = (labels.shape[0] // p) * p, (labels.shape[1] // p) * p
        if h == 0 or w == 0:
            return
        zb = (zero[:h, :w] > 0.5).reshape(h // p, p, w // p, p).mean(axis=(1, 3))
        vb = valid[:h, :w].reshape(h // p, p, w // p, p).all(axis=(1, 3))
        lb = labels[:h, :w].reshape(h // p, p, w // p, p).transpose(0, 2, 1, 3).reshape(h // p, w // p, -1)
        maj = np.array([np.bincount(v, minlength=n).argmax() for v in lb[vb]], dtype=np.int64)
        q = np.minimum((zb[vb] * self.bins).astype(int), self.bins - 1)
        np.add.at(self.patch_joint, (q, maj), 1)

    def summary(self):
        seen = np.nonzero(self.total)[0]
        p_white = float(self.white.sum() / max(self.total.sum(), 1))
        rates = {int(c): float(self.white[c] / self.total[c]) for c in seen}
        dev = {c: abs(r - p_white) for c, r in rates.items()}
        joint = np.stack([self.total - self.white, self.white])[:, seen]
        return p_white, rates, {int(c): int(self.total[c]) for c in seen}, dev, _mi(joint), _mi(self.patch_joint)


def decorrelation_audit(samples: Iterable, n_labels: int = 16, patch: int = 8, bins: int = 5,
                        min_samples: int = MIN_SAMPLES) -> AuditReport:
    """White rate of the binary modality per semantic class, over first-person hit pixels.

    ``samples`` yields triplets (anything with ``zero``, ``semantics``, ``depth``
    and, for the overhead statistic, ``m_zero``, ``bev_semantics``, ``fov``).
    Background pixels are excluded.
    """
    fpv = _Counter(n_labels, patch, bins)
    bev = _Counter(n_labels, patch, bins)
    n = 0
    for t in samples:
        n += 1
        fpv.add(t.zero, t.semantics, (t.depth > 0) & (t.semantics > 0))
        if getattr(t, "m_zero", None) is not None:
            bev.add(t.m_zero, t.bev_semantics, t.fov & (t.bev_semantics > 0))
    if n < min_samples:
        raise AuditError(f"audit needs at least {min_samples} samples, got {n}")
    p, rates, counts, dev, mi, pmi = fpv.summary()
    bp, brates, bcounts, bdev, bmi, _ = bev.summary()
    return AuditReport(n, p, rates, counts, dev, mi, pmi, degenerate=p in (0.0, 1.0),
                       bev={"p_white": bp, "rates": {str(k): v for k, v in brates.items()},
                            "deviation": {str(k): v for k, v in bdev.items()},
                            "max_deviation": max(bdev.values()) if bdev else 0.0, "mutual_information": bmi,
                            "degenerate": bp in (0.0, 1.0)})
