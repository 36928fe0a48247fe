"""Image columns to polar BEV rays with attention, at toy scale.

Every image column is encoded on its own; every polar ray on the ground plane
queries the one column that shares its bearing.  Ray features are gathered
onto the rectilinear BEV grid and refined by a few small convolutions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry import BevSpec, PinholeCamera, column_to_ray, polar_gather_index
from ..numeric import ShapeError, Tensor, index_select, relu, sigmoid
from .layers import (
    Conv2d, DecoderLayer, EncoderLayer, LayerNorm, Linear, Module, PositionalEncoding, attention_weights,
    merge_heads, project, split_heads,
)

MODEL_VARIANTS = ("base", "base+aux", "residual", "inductive-bias")
AUX_CHANNELS = ("navigable", "obstacle")


@dataclass(frozen=True)
class TwoStreamConfig:
    identity_value: bool = True
    shared_qk: bool = True
    aux: tuple[str, ...] = AUX_CHANNELS

    def validate(self) -> None:
        if not self.identity_value or not self.shared_qk:
            raise ValueError("the two-stream model needs identity values and shared query/key projections")
        if not self.aux or any(a not in AUX_CHANNELS for a in self.aux):
            raise ValueError(f"aux channels must be a non-empty subset of {AUX_CHANNELS}")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "base+aux"
    d: int = 64
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ff_hidden: int = 128
    conv_width: int = 16
    refine_width: int = 16
    fpv_res: int = 96
    bev_res: int = 64
    fov_deg: float = 79.0
    bev_extent: float = 5.0
    alpha: float = 0.5
    dropout: float = 0.0
    seed: int = 0
    two_stream: TwoStreamConfig = field(default_factory=TwoStreamConfig)

    @property
    def reduction(self) -> int:
        return 4

    @property
    def aux(self) -> tuple[str, ...]:
        if self.variant == "base":
            return ()
        if self.variant == "inductive-bias":
            return self.two_stream.aux
        return AUX_CHANNELS

    def validate(self) -> None:
        if self.variant not in MODEL_VARIANTS:
            raise ValueError(f"model variant must be one of {MODEL_VARIANTS}")
        if self.d % self.heads:
            raise ValueError("feature width must be divisible by the head count")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("loss weight alpha must lie in [0, 1]")
        if self.fpv_res % self.reduction:
            raise ValueError(f"FPV resolution must be a multiple of {self.reduction}")
        if self.variant == "inductive-bias":
            self.two_stream.validate()

    def camera(self) -> PinholeCamera:
        return PinholeCamera.from_fov(self.fpv_res, fov_deg=self.fov_deg)

    def bev_spec(self) -> BevSpec:
        return BevSpec(rows=self.bev_res, cols=self.bev_res, extent_forward=self.bev_extent,
                       extent_lateral=self.bev_extent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["two_stream"]["aux"] = list(d["two_stream"]["aux"])
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        ts = dict(d.pop("two_stream", {}))
        if "aux" in ts:
            ts["aux"] = tuple(ts["aux"])
        return ModelConfig(**d, two_stream=TwoStreamConfig(**ts))


def area_reduce(zero: np.ndarray, factor: int) -> np.ndarray:
    """(B, H, W) -> (B, H/f, W/f) block means; the zero stream's only preprocessing."""
    b, h, w = zero.shape
    return zero.reshape(b, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


class FeatureColumnizer(Module):
    """Two stride-2 convolutions: (B, H, W, C) image to a (B, H/4, W/4, d) column grid."""

    def __init__(self, rng, c_in: int, width: int, d: int):
        super().__init__()
        self.c1 = self.add("c1", Conv2d(rng, c_in, width, 3, 2, 1))
        self.c2 = self.add("c2", Conv2d(rng, width, d, 3, 2, 1))

    def __call__(self, x: Tensor) -> Tensor:
        return self.c2(relu(self.c1(x)))


class Refiner(Module):
    """Per-cell projection, three residual 3x3 convolutions over the BEV grid, layer norm, sigmoid heads."""

    def __init__(self, rng, d: int, width: int, channels: int):
        super().__init__()
        self.inp = self.add("inp", Linear(rng, d, width))
        self.convs = [self.add(f"conv{i}", Conv2d(rng, width, width, 3)) for i in range(3)]
        self.norm = self.add("norm", LayerNorm(width))
        self.head = self.add("head", Linear(rng, width, channels))
        # start near 0.5 everywhere; a saturated sigmoid gives Dice no gradient to climb out with
        self.head.w.data *= 0.1

    def __call__(self, x: Tensor) -> Tensor:
        x = relu(self.inp(x))
        for c in self.convs:
            x = x + relu(c(x))
        return sigmoid(self.head(self.norm(x)))


class ZeroBev(Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d
        cam, spec = cfg.camera(), cfg.bev_spec()
        self.rows_c = cfg.fpv_res // cfg.reduction
        self.cols_c = cfg.fpv_res // cfg.reduction
        self.rays = column_to_ray(cam, spec, stride=cfg.reduction)
        if len(self.rays.thetas) != self.cols_c:
            raise ShapeError("column grid does not align with the polar rays")
        self.gather_idx, self.gather_valid = polar_gather_index(cam, spec, self.rays)
        two = cfg.variant == "inductive-bias"
        self.columnizer = self.add("columnizer", FeatureColumnizer(rng, 3 if two else 4, cfg.conv_width, d))
        self.row_pos = self.add("row_pos", PositionalEncoding(rng, self.rows_c, d))
        self.ray_pos = self.add("ray_pos", PositionalEncoding(rng, self.rays.n_rho, d))
        self.col_pos = self.add("col_pos", PositionalEncoding(rng, self.cols_c, d))
        self.encoder = [self.add(f"enc{i}", EncoderLayer(rng, d, cfg.heads, cfg.ff_hidden, cfg.dropout))
                        for i in range(cfg.enc_layers)]
        n_dec = cfg.dec_layers - 1 if two else cfg.dec_layers
        self.decoder = [self.add(f"dec{i}", DecoderLayer(rng, d, cfg.heads, cfg.ff_hidden, cfg.dropout))
                        for i in range(n_dec)]
        if two:
            # one shared attention distribution; W_V exists only on the aux stream
            self.shared_q = self.add("shared_q", Linear(rng, d, d, bias=False))
            self.shared_k = self.add("shared_k", Linear(rng, d, d, bias=False))
            self.aux_v = self.add("aux_v", Linear(rng, d, d, bias=False))
            self.aux_o = self.add("aux_o", Linear(rng, d, d))
            self.aux_ln = self.add("aux_ln", LayerNorm(d))
            self.refiner = self.add("refiner", Refiner(rng, d, cfg.refine_width, len(cfg.aux)))
        else:
            self.refiner = self.add("refiner", Refiner(rng, d, cfg.refine_width, 1 + len(cfg.aux)))
        if cfg.variant == "residual":
            self.geo_table = self.param("geo_table", rng.normal(0, 0.02, (2, d)))

    # -- stages -------------------------------------------------------------
    def encode_columns(self, grid: Tensor) -> Tensor:
        """(B, Hc, Wc, d) feature grid -> (B*Wc, Hc, d) contextual columns, each column on its own."""
        b, hc, wc, d = grid.shape
        if (hc, wc, d) != (self.rows_c, self.cols_c, self.cfg.d):
            raise ShapeError(f"column grid {grid.shape} does not match the configuration")
        x = grid.transpose(0, 2, 1, 3).reshape(b * wc, hc, d) + self.row_pos()
        for layer in self.encoder:
            x, _ = layer(x)
        return x

    def ray_queries(self, batch: int) -> Tensor:
        n, p, d = self.cols_c, self.rays.n_rho, self.cfg.d
        cols = index_select(self.col_pos(), np.repeat(np.arange(n), p), 0).reshape(n, p, d)
        q = Tensor(np.zeros((batch, n, p, d))) + (cols + self.ray_pos())
        return q.reshape(batch * n, p, d)

    def decode_rays(self, h: Tensor, batch: int) -> tuple[Tensor, Tensor | None]:
        q = self.ray_queries(batch)
        alpha = None
        for layer in self.decoder:
            q, alpha = layer(q, h)
        return q, alpha

    def to_grid(self, rays: Tensor, batch: int) -> Tensor:
        """(B*Wc, P, c) ray cells -> (B, R, C, c) by nearest polar lookup."""
        c = rays.shape[-1]
        flat = rays.reshape(batch, self.cols_c * self.rays.n_rho, c)
        r = self.cfg.bev_res
        return index_select(flat, self.gather_idx, 1).reshape(batch, r, r, c)

    # -- variants -----------------------------------------------------------
    def _inputs(self, rgb: np.ndarray, zero: np.ndarray, with_zero: bool = True) -> Tensor:
        if rgb.ndim != 4 or zero.ndim != 3 or rgb.shape[:3] != zero.shape:
            raise ShapeError(f"expected (B, H, W, 3) rgb and (B, H, W) zero, got {rgb.shape} and {zero.shape}")
        if rgb.shape[1:3] != (self.cfg.fpv_res, self.cfg.fpv_res):
            raise ShapeError(f"images must be {self.cfg.fpv_res} pixels square")
        x = rgb - 0.5
        if with_zero:
            x = np.concatenate([x, zero[..., None] - 0.5], -1)
        return Tensor(x)

    def forward_base(self, rgb: np.ndarray, zero: np.ndarray, geo: np.ndarray | None = None) -> dict:
        b = rgb.shape[0]
        h = self.encode_columns(self.columnizer(self._inputs(rgb, zero)))
        q, alpha = self.decode_rays(h, b)
        grid = self.to_grid(q, b)
        if geo is not None:
            grid = grid + self.embed_geometry(geo)
        out = self.refiner(grid)
        k = out.shape[-1]
        res = {"zero": index_select(out, np.array([0]), 3).reshape(b, grid.shape[1], grid.shape[2]),
               "alpha": alpha}
        res["aux"] = index_select(out, np.arange(1, k), 3) if k > 1 else None
        return res

    def embed_geometry(self, geo: np.ndarray) -> Tensor:
        """Binary projected map (B, R, C) -> per-cell embedding rows 0 (empty) or 1 (white)."""
        return index_select(self.geo_table, (np.asarray(geo) > 0.5).astype(np.int64), 0)

    def forward_residual(self, rgb: np.ndarray, zero: np.ndarray, geo: np.ndarray) -> dict:
        """``geo`` is the depth-projected binary map computed from the depth provider."""
        if self.cfg.variant != "residual":
            raise ValueError("forward_residual needs a residual model")
        return self.forward_base(rgb, zero, geo)

    def shared_attention(self, q: Tensor, h: Tensor) -> Tensor:
        return attention_weights(project(q, self.shared_q.w), project(h, self.shared_k.w), 1)

    @staticmethod
    def zero_stream(alpha: Tensor, zero_cols: Tensor | np.ndarray) -> Tensor:
        """Identity-value path: (N, 1, P, Y) attention times (N, Y, c) raw columns -> (N, P, c)."""
        z = zero_cols if isinstance(zero_cols, Tensor) else Tensor(zero_cols)
        return merge_heads(alpha @ split_heads(z, 1))

    def forward_twostream(self, rgb: np.ndarray, zero: np.ndarray, alpha_override: Tensor | None = None) -> dict:
        if self.cfg.variant != "inductive-bias":
            raise ValueError("forward_twostream needs an inductive-bias model")
        b = rgb.shape[0]
        h = self.encode_columns(self.columnizer(self._inputs(rgb, zero, with_zero=False)))
        q, _ = self.decode_rays(h, b)
        alpha = self.shared_attention(q, h) if alpha_override is None else alpha_override
        # aux stream: learned values through the shared attention
        m = merge_heads(alpha @ split_heads(project(h, self.aux_v.w), 1))
        aux_rays = self.aux_ln(q + self.aux_o(m))
        aux = self.refiner(self.to_grid(aux_rays, b))
        # zero stream: the same alpha over area-reduced raw columns, nothing learned
        zc = area_reduce(zero, self.cfg.reduction).transpose(0, 2, 1).reshape(b * self.cols_c, self.rows_c, 1)
        z_rays = self.zero_stream(alpha, zc)
        r = self.cfg.bev_res
        z = self.to_grid(z_rays, b).reshape(b, r, r)
        return {"zero": z, "aux": aux, "alpha": alpha, "alpha_zero": alpha, "alpha_aux": alpha}

    def forward(self, rgb: np.ndarray, zero: np.ndarray, geo: np.ndarray | None = None) -> dict:
        v = self.cfg.variant
        if v == "inductive-bias":
            return self.forward_twostream(rgb, zero)
        if v == "residual":
            if geo is None:
                raise ValueError("the residual model needs a depth-projected map")
            return self.forward_residual(rgb, zero, geo)
        return self.forward_base(rgb, zero)

    __call__ = forward


def build_model(cfg: ModelConfig) -> ZeroBev:
    return ZeroBev(cfg)
