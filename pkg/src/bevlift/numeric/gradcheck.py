"""Central finite differences against the autodiff gradient."""
from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


def _rel_err(a: np.ndarray, n: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    n = np.asarray(n, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / denom))


def _difference(fn: Callable[[], float], flat: np.ndarray, i: int, eps: float, shrink: int = 3) -> float:
    """Central difference at coordinate ``i`` that steps around kinks.

    On a smooth stretch the estimates at ``e`` and ``e/2`` agree to O(e^2).  When
    they do not, a kink (e.g. a ReLU input crossing zero) sits inside the
    stencil, so the step is cut tenfold and the pair retried.
    """
    orig = flat[i]

    def central(e):
        flat[i] = orig + e
        fp = fn()
        flat[i] = orig - e
        fm = fn()
        flat[i] = orig
        return (fp - fm) / (2 * e)

    e, first = eps, None
    for _ in range(shrink + 1):
        c1, c2 = central(e), central(e / 2)
        first = c2 if first is None else first
        if abs(c1 - c2) <= 1e-6 * max(abs(c1), abs(c2)) + 1e-10:
            return c2
        e /= 10
    return first


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5,
               coords: Sequence[int] | None = None) -> float:
    """Max relative error |a-n| / max(|a|, |n|, 1e-8) over the checked coordinates.

    ``f`` maps ``x`` to a scalar tensor and must be deterministic.  ``coords``
    are flat indices into ``x``; all coordinates are checked by default.
    """
    x.requires_grad = True
    x.grad = None
    loss = f(x)
    backward(loss)
    analytic = np.zeros(x.size) if x.grad is None else x.grad.ravel().copy()
    flat = x.data.reshape(-1)
    idx = range(x.size) if coords is None else coords
    a, n = [], []
    with no_grad():
        for i in idx:
            a.append(analytic[i])
            n.append(_difference(lambda: f(x).item(), flat, i, eps))
    return _rel_err(np.array(a), np.array(n))


def grad_check_params(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], eps: float = 1e-5,
                      per_param: int | None = 8, seed: int = 0) -> dict[str, float]:
    """Finite-difference check over a model's parameters.

    ``per_param`` caps the number of randomly chosen coordinates per tensor
    (``None`` checks everything).  Returns the max relative error per tensor.
    """
    for p in params.values():
        p.grad = None
    backward(loss_fn())
    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}
    with no_grad():
        for name, p in params.items():
            g = np.zeros(p.size) if p.grad is None else p.grad.ravel().copy()
            if per_param is None or p.size <= per_param:
                idx = np.arange(p.size)
            else:
                idx = rng.choice(p.size, size=per_param, replace=False)
            flat = p.data.reshape(-1)
            num = np.array([_difference(lambda: loss_fn().item(), flat, i, eps) for i in idx])
            report[name] = _rel_err(g[idx], num)
    return report
