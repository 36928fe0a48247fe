"""Minibatch Adam training with per-epoch decay, plateau halving, checkpoints and a JSON-lines log."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import PinholeCamera, Pose, geometric_projection
from ..numeric import Adam, NonFiniteError, PlateauHalving, backward, finite_checks, no_grad
from ..numeric.checkpoint import atomic_write, decode_params, encode_params
from .losses import combined_loss, dice_loss
from .network import ModelConfig, ZeroBev

log = logging.getLogger(__name__)

NOISE_SIGMA = 0.08


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 30
    batch_size: int = 16
    lr: float = 1e-3
    decay: float = 0.9
    patience: int = 3
    seed: int = 0
    checkpoint_every: int = 1
    depth_mode: str = "exact"          # residual variant only: exact | noisy
    noise_sigma: float = NOISE_SIGMA
    max_train: int | None = None
    max_val: int | None = None

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0 or not (0 < self.decay <= 1):
            raise ValueError("epochs, batch size, learning rate and decay must be positive")
        if self.depth_mode not in ("exact", "noisy"):
            raise ValueError("depth mode must be exact or noisy")
        self.model.validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        model = ModelConfig.from_dict(d.pop("model", {}))
        return TrainConfig(model=model, **d)


# -- data ---------------------------------------------------------------------

def noisy_depth(depth: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Multiplicative Gaussian perturbation of valid depth; invalid pixels stay 0."""
    rng = np.random.default_rng([seed, 0xD3])
    out = depth * (1.0 + sigma * rng.standard_normal(depth.shape))
    return np.where(depth > 0, np.maximum(out, 1e-3), 0.0)


def projected_zero(t, mcfg: ModelConfig, depth_mode: str = "exact", sigma: float = NOISE_SIGMA,
                   seed: int = 0, zero: np.ndarray | None = None) -> np.ndarray:
    """The depth provider's view of I_zero on the ground: backproject, voxelize, max-pool below 2 m.

    ``zero`` replaces the sample's own modality, e.g. a held-out one at evaluation.
    """
    cam = PinholeCamera.from_fov(t.depth.shape[1], fov_deg=mcfg.fov_deg, pose=Pose.from_dict(t.provenance["pose"]))
    depth = t.depth if depth_mode == "exact" else noisy_depth(t.depth, sigma, seed)
    payload = t.zero if zero is None else zero
    g = geometric_projection(depth, cam, np.asarray(payload, dtype=np.float64), mcfg.bev_spec(), "max", t.fov)
    return g.values[..., 0]


@dataclass
class Batch:
    rgb: np.ndarray        # (B, H, W, 3)
    zero: np.ndarray       # (B, H, W)
    m_zero: np.ndarray     # (B, R, C)
    m_aux: np.ndarray      # (B, R, C, 2)
    fov: np.ndarray        # (B, R, C)
    geo: np.ndarray | None = None
    observed: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rgb)

    def take(self, idx) -> "Batch":
        return Batch(self.rgb[idx], self.zero[idx], self.m_zero[idx], self.m_aux[idx], self.fov[idx],
                     None if self.geo is None else self.geo[idx],
                     None if self.observed is None else self.observed[idx])


def stack_triplets(triplets, cfg: TrainConfig | None = None) -> Batch:
    triplets = list(triplets)
    geo = None
    if cfg is not None and cfg.model.variant == "residual":
        geo = np.stack([projected_zero(t, cfg.model, cfg.depth_mode, cfg.noise_sigma,
                                       int(t.provenance.get("index", k))) for k, t in enumerate(triplets)])
    return Batch(np.stack([t.rgb for t in triplets]), np.stack([t.zero for t in triplets]),
                 np.stack([t.m_zero for t in triplets]), np.stack([t.m_aux for t in triplets]),
                 np.stack([t.fov for t in triplets]), geo, np.stack([t.observed for t in triplets]))


def load_split(ds, split: str, cfg: TrainConfig, limit: int | None = None) -> Batch | None:
    idx = ds.split(split)[:limit] if limit else ds.split(split)
    if not idx:
        return None
    return stack_triplets((ds.load_index(i) for i in idx), cfg)


# -- loss -----------------------------------------------------------------------

def batch_loss(model: ZeroBev, b: Batch):
    out = model(b.rgb, b.zero, b.geo)
    lz = dice_loss(out["zero"], b.m_zero, b.fov)
    if out["aux"] is None:
        return lz, out, {"zero": lz.item()}
    la = dice_loss(out["aux"], b.m_aux, b.fov, channels=True)
    return combined_loss(lz, la, model.cfg.alpha), out, {"zero": lz.item(), "aux": la.item()}


def channel_dice(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Soft Dice coefficient of one channel inside ``mask`` (1 = perfect)."""
    return 1.0 - dice_loss(pred, gt, mask).item()


def evaluate(model: ZeroBev, b: Batch, batch_size: int = 16) -> dict:
    """Loss and per-channel soft Dice over a whole split, accumulated across minibatches."""
    model.eval()
    preds_z, preds_a = [], []
    with no_grad():
        for s in range(0, len(b), batch_size):
            out = model(*_inputs(b.take(slice(s, s + batch_size))))
            preds_z.append(out["zero"].data)
            if out["aux"] is not None:
                preds_a.append(out["aux"].data)
    pz = np.concatenate(preds_z)
    res = {"dice": {"zero": channel_dice(pz, b.m_zero, b.fov)}}
    lz = dice_loss(pz, b.m_zero, b.fov).item()
    if preds_a:
        pa = np.concatenate(preds_a)
        names = model.cfg.aux
        for k, name in enumerate(names):
            res["dice"][name] = channel_dice(pa[..., k], b.m_aux[..., k], b.fov)
        la = dice_loss(pa, b.m_aux[..., :len(names)], b.fov, channels=True).item()
        res["loss"] = float((1 - model.cfg.alpha) * lz + model.cfg.alpha * la)
    else:
        res["loss"] = lz
    return res


def _inputs(b: Batch):
    return b.rgb, b.zero, b.geo


# -- checkpoints --------------------------------------------------------------------

def save_checkpoint(path, model: ZeroBev, opt: Adam, sched: PlateauHalving, epoch: int, cfg: TrainConfig,
                    best: float = np.inf) -> None:
    path = Path(path)
    arrays = {f"param/{k}": v for k, v in model.state().items()}
    arrays.update({f"adam_m/{k}": v for k, v in opt.state.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in opt.state.v.items()})
    meta = {"epoch": epoch, "lr": opt.lr, "adam_step": opt.state.step, "plateau": sched.state_dict(),
            "best": float(best), "config": cfg.to_dict()}
    atomic_write(path, encode_params(arrays))
    atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True).encode())


def load_checkpoint(path) -> tuple[dict, dict]:
    path = Path(path)
    arrays = decode_params(path.read_bytes())
    meta = json.loads(path.with_suffix(".json").read_text())
    return arrays, meta


def model_from_checkpoint(path) -> ZeroBev:
    arrays, meta = load_checkpoint(path)
    model = ZeroBev(TrainConfig.from_dict(meta["config"]).model)
    model.load_state({k[6:]: v for k, v in arrays.items() if k.startswith("param/")})
    return model.eval()


# -- training loop ---------------------------------------------------------------------

def train(ds, cfg: TrainConfig, out_dir, resume: bool = False, train_data: Batch | None = None,
          val_data: Batch | None = None) -> dict:
    """Train on the dataset's train split, validating on its val split every epoch.

    Writes ``checkpoint.zbt`` (latest), ``best.zbt`` (best val loss), ``train_log.jsonl``
    and ``train_config.json`` into ``out_dir``.  Returns the final summary.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "train_config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True).encode())
    tr = train_data if train_data is not None else load_split(ds, "train", cfg, cfg.max_train)
    va = val_data if val_data is not None or ds is None else load_split(ds, "val", cfg, cfg.max_val)
    if tr is None:
        raise ValueError("training split is empty")
    model = ZeroBev(cfg.model)
    params = model.parameters()
    opt = Adam(params, lr=cfg.lr)
    sched = PlateauHalving(cfg.patience)
    start = 0
    log_path = out / "train_log.jsonl"
    best = np.inf
    if resume and (out / "checkpoint.zbt").exists():
        arrays, meta = load_checkpoint(out / "checkpoint.zbt")
        model.load_state({k[6:]: v for k, v in arrays.items() if k.startswith("param/")})
        opt.state.m = {k[7:]: v.copy() for k, v in arrays.items() if k.startswith("adam_m/")}
        opt.state.v = {k[7:]: v.copy() for k, v in arrays.items() if k.startswith("adam_v/")}
        opt.state.step = int(meta["adam_step"])
        opt.lr = float(meta["lr"])
        sched.load_state_dict(meta["plateau"])
        start = int(meta["epoch"]) + 1
        best = float(meta["best"])
        _truncate_log(log_path, start)
    elif log_path.exists():
        log_path.unlink()
    history = []
    for epoch in range(start, cfg.epochs):
        t0 = time.time()
        model.train()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(tr))
        losses, parts_acc = [], []
        for s in range(0, len(order), cfg.batch_size):
            b = tr.take(order[s:s + cfg.batch_size])
            opt.zero_grad()
            with finite_checks(False):
                loss, _, parts = batch_loss(model, b)
                if not np.isfinite(loss.item()):
                    raise TrainingDiverged(f"loss became {loss.item()} at epoch {epoch}, batch {s // cfg.batch_size}: "
                                           f"{parts}")
                backward(loss)
            bad = [k for k, p in params.items() if p.grad is not None and not np.isfinite(p.grad).all()]
            if bad:
                raise TrainingDiverged(f"non-finite gradient in {bad[:3]} at epoch {epoch}")
            opt.step()
            losses.append(loss.item())
            parts_acc.append(parts)
        rec_tr = {"epoch": epoch, "split": "train", "loss": float(np.mean(losses)), "lr": opt.lr,
                  "dice": {k: 1.0 - float(np.mean([p[k] for p in parts_acc])) for k in parts_acc[0]}}
        recs = [rec_tr]
        val_loss = rec_tr["loss"]
        if va is not None:
            ev = evaluate(model, va, cfg.batch_size)
            val_loss = ev["loss"]
            recs.append({"epoch": epoch, "split": "val", "loss": ev["loss"], "dice": ev["dice"], "lr": opt.lr})
        halved = sched.update(val_loss)
        opt.lr = opt.lr * cfg.decay * (0.5 if halved else 1.0)
        if val_loss < best:
            best = val_loss
            save_checkpoint(out / "best.zbt", model, opt, sched, epoch, cfg, best)
        if (epoch + 1) % cfg.checkpoint_every == 0 or epoch == cfg.epochs - 1:
            save_checkpoint(out / "checkpoint.zbt", model, opt, sched, epoch, cfg, best)
        with open(log_path, "a") as f:
            for r in recs:
                f.write(json.dumps(r, sort_keys=True) + "\n")
        history.extend(recs)
        log.info("epoch %d train %.4f val %.4f lr %.2e (%.1fs)", epoch, rec_tr["loss"], val_loss, opt.lr,
                 time.time() - t0)
    return {"epochs": cfg.epochs, "best_val_loss": float(best), "history": history, "out_dir": str(out)}


def _truncate_log(path: Path, epoch: int) -> None:
    if not path.exists():
        return
    keep = [ln for ln in path.read_text().splitlines() if ln and json.loads(ln)["epoch"] < epoch]
    atomic_write(path, ("\n".join(keep) + "\n" if keep else "").encode())


def read_log(path) -> list[dict]:
    return [json.loads(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]
