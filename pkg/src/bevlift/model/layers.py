"""Parameter containers and the transformer pieces used by the BEV model."""
from __future__ import annotations

import numpy as np

from ..numeric import Tensor, ShapeError, dropout, layer_norm, relu, softmax, unfold2d


class Module:
    """Holds named parameters and child modules; ``parameters()`` flattens them with dotted names."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}
        self.training = False

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def add(self, name: str, mod: "Module") -> "Module":
        self._children[name] = mod
        return mod

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {prefix + k: v for k, v in self._params.items()}
        for name, child in self._children.items():
            out.update(child.parameters(f"{prefix}{name}."))
        return out

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for c in self._children.values():
            c.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(arrays)
        if missing:
            raise KeyError(f"checkpoint lacks parameters {sorted(missing)[:5]}")
        for k, p in params.items():
            if arrays[k].shape != p.shape:
                raise ShapeError(f"{k}: checkpoint shape {arrays[k].shape}, model {p.shape}")
            p.data = np.array(arrays[k], dtype=np.float64)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, shape or (fan_in, fan_out))


class Linear(Module):
    def __init__(self, rng, d_in: int, d_out: int, bias: bool = True):
        super().__init__()
        self.w = self.param("w", glorot(rng, d_in, d_out))
        self.b = self.param("b", np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = project(x, self.w)
        return y if self.b is None else y + self.b


class LayerNorm(Module):
    def __init__(self, d: int):
        super().__init__()
        self.gain = self.param("gain", np.ones(d))
        self.bias = self.param("bias", np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class Conv2d(Module):
    """Square-kernel convolution on (B, H, W, C) via patch unfolding."""

    def __init__(self, rng, c_in: int, c_out: int, k: int = 3, stride: int = 1, pad: int | None = None):
        super().__init__()
        self.k, self.stride = k, stride
        self.pad = k // 2 if pad is None else pad
        self.w = self.param("w", glorot(rng, k * k * c_in, c_out))
        self.b = self.param("b", np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        p = unfold2d(x, self.k, self.stride, self.pad)
        b, h, w, kc = p.shape
        return (p.reshape(-1, kc) @ self.w + self.b).reshape(b, h, w, self.w.shape[1])


def sinusoidal(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d // 2)[None, :]
    ang = pos / (10000.0 ** (2 * i / d))
    out = np.zeros((n, d))
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang[:, : d - d // 2])
    return out


class PositionalEncoding(Module):
    """Trainable embedding plus a fixed sinusoidal part."""

    def __init__(self, rng, n: int, d: int):
        super().__init__()
        self.table = self.param("table", rng.normal(0, 0.02, (n, d)))
        self.fixed = Tensor(sinusoidal(n, d))

    def __call__(self) -> Tensor:
        return self.table + self.fixed


def split_heads(x: Tensor, heads: int) -> Tensor:
    n, length, d = x.shape
    return x.reshape(n, length, heads, d // heads).transpose(0, 2, 1, 3)


def merge_heads(x: Tensor) -> Tensor:
    n, h, length, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(n, length, h * dh)


def project(x: Tensor, w: Tensor) -> Tensor:
    lead = x.shape[:-1]
    return (x.reshape(-1, x.shape[-1]) @ w).reshape(lead + (w.shape[1],))


def attention_weights(q: Tensor, k: Tensor, heads: int) -> Tensor:
    """softmax over keys of (q k^T)/sqrt(D); q (N, Lq, d), k (N, Lk, d) -> (N, heads, Lq, Lk)."""
    dh = q.shape[-1] // heads
    logits = split_heads(q, heads) @ split_heads(k, heads).transpose(0, 1, 3, 2)
    return softmax(logits * (1.0 / np.sqrt(dh)), axis=-1)


def cross_attend(p: Tensor, h: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, heads: int = 1) -> tuple[Tensor, Tensor]:
    """Ray cells ``p`` (N, P, d) attend over column rows ``h`` (N, Y, d).

    Returns the value mixture (N, P, d) and the attention map (N, heads, P, Y),
    which sums to one over Y.
    """
    if p.ndim != 3 or h.ndim != 3 or p.shape[0] != h.shape[0] or p.shape[2] != h.shape[2]:
        raise ShapeError(f"cross_attend needs (N, P, d) and (N, Y, d), got {p.shape} and {h.shape}")
    alpha = attention_weights(project(p, wq), project(h, wk), heads)
    return merge_heads(alpha @ split_heads(project(h, wv), heads)), alpha


class Attention(Module):
    """Multi-head attention with query, key, value and output projections."""

    def __init__(self, rng, d: int, heads: int):
        super().__init__()
        if d % heads:
            raise ValueError("feature width must be divisible by the head count")
        self.heads = heads
        self.wq = self.add("wq", Linear(rng, d, d, bias=False))
        self.wk = self.add("wk", Linear(rng, d, d, bias=False))
        self.wv = self.add("wv", Linear(rng, d, d, bias=False))
        self.wo = self.add("wo", Linear(rng, d, d))

    def __call__(self, queries: Tensor, keys: Tensor) -> tuple[Tensor, Tensor]:
        m, alpha = cross_attend(queries, keys, self.wq.w, self.wk.w, self.wv.w, self.heads)
        return self.wo(m), alpha


class FeedForward(Module):
    def __init__(self, rng, d: int, hidden: int):
        super().__init__()
        self.fc1 = self.add("fc1", Linear(rng, d, hidden))
        self.fc2 = self.add("fc2", Linear(rng, hidden, d))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))


class EncoderLayer(Module):
    """Self-attention over the rows of each column, then a feed-forward block; post-norm residuals."""

    def __init__(self, rng, d: int, heads: int, hidden: int, p_drop: float = 0.0):
        super().__init__()
        self.attn = self.add("attn", Attention(rng, d, heads))
        self.ff = self.add("ff", FeedForward(rng, d, hidden))
        self.ln1 = self.add("ln1", LayerNorm(d))
        self.ln2 = self.add("ln2", LayerNorm(d))
        self.p_drop = p_drop
        self.rng = np.random.default_rng(0)

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        a, alpha = self.attn(x, x)
        x = self.ln1(x + dropout(a, self.p_drop, self.rng, self.training))
        x = self.ln2(x + dropout(self.ff(x), self.p_drop, self.rng, self.training))
        return x, alpha


class DecoderLayer(Module):
    """Ray decoder block: self-attention among ray cells, cross-attention to the column, feed-forward."""

    def __init__(self, rng, d: int, heads: int, hidden: int, p_drop: float = 0.0):
        super().__init__()
        self.self_attn = self.add("self_attn", Attention(rng, d, heads))
        self.cross = self.add("cross", Attention(rng, d, heads))
        self.ff = self.add("ff", FeedForward(rng, d, hidden))
        self.ln1 = self.add("ln1", LayerNorm(d))
        self.ln2 = self.add("ln2", LayerNorm(d))
        self.ln3 = self.add("ln3", LayerNorm(d))
        self.p_drop = p_drop
        self.rng = np.random.default_rng(1)

    def __call__(self, q: Tensor, h: Tensor, pos: Tensor | None = None) -> tuple[Tensor, Tensor]:
        qp = q if pos is None else q + pos
        s, _ = self.self_attn(qp, qp)
        q = self.ln1(q + dropout(s, self.p_drop, self.rng, self.training))
        qp = q if pos is None else q + pos
        c, alpha = self.cross(qp, h)
        q = self.ln2(q + dropout(c, self.p_drop, self.rng, self.training))
        q = self.ln3(q + dropout(self.ff(q), self.p_drop, self.rng, self.training))
        return q, alpha


__all__ = [
    "Module", "Linear", "LayerNorm", "Conv2d", "PositionalEncoding", "Attention", "FeedForward",
    "EncoderLayer", "DecoderLayer", "attention_weights", "cross_attend", "project", "split_heads", "merge_heads", "sinusoidal", "glorot",
]
