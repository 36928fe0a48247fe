"""Dice loss over masked BEV channels and the zero/aux mixture."""
from __future__ import annotations

import numpy as np

from ..numeric import ShapeError, Tensor

DICE_EPS = 1e-6


def dice_loss(pred, gt, mask=None, eps: float = DICE_EPS, channels: bool = False) -> Tensor:
    """1 - mean_k 2 sum(g p) / (sum g + sum p + eps), sums over every masked cell of the batch.

    With ``channels`` the last axis holds the K classes; otherwise the whole
    array is one class.  ``mask`` covers the non-channel axes.
    """
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and target {gt.shape} differ")
    lead = gt.shape[:-1] if channels else gt.shape
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != lead:
            raise ShapeError(f"mask {mask.shape} does not match target {gt.shape}")
        m = np.broadcast_to(mask[..., None], gt.shape) if channels else mask
        pred = pred * Tensor(m)
        gt = gt * m
    axes = tuple(range(len(lead)))
    k = gt.shape[-1] if channels else 1
    inter = (pred * Tensor(gt)).sum(axis=axes)
    denom = pred.sum(axis=axes) + (gt.sum(axis=axes) + eps)
    return 1.0 - ((inter * 2.0) / denom).sum() * (1.0 / k)


def combined_loss(zero_loss, aux_loss, alpha: float = 0.5):
    """(1 - alpha) * zero + alpha * aux."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return zero_loss
    if alpha == 1.0:
        return aux_loss
    return zero_loss * (1.0 - alpha) + aux_loss * alpha
