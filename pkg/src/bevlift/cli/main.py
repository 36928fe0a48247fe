"""``bevlift`` command line: gen-data, train, eval, baseline, audit, theorem-check.

Exit codes: 0 success, 2 invalid configuration or input, 1 failure while running.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..geometry import BevSpec
from ..model import ModelConfig, TrainConfig, model_from_checkpoint, theorem_oracle, train
from ..model.train import evaluate, load_split
from ..numeric import no_grad
from ..numeric.checkpoint import atomic_write
from ..scene import SceneParams, ViewpointError, generate_scene, sample_viewpoint
from ..texgen import (
    DataVariant, DatasetConfig, DatasetError, RenderConfig, decorrelation_audit, generate_dataset, load_dataset,
)
from ..texgen.audit import AuditError
from .config import FIELD_TYPES, RunConfig, ValidationError, read_config_file, resolve
from .evaluate import MODALITIES, geometric_maps, modality_maps, predict_maps, score, write_panel
from .metrics import MetricsReport, ReportBuilder

log = logging.getLogger("bevlift")

COMMON = ("out",)
COMMAND_FIELDS = {
    "gen-data": ("seed", "count", "variant", "white_target", "fpv_res", "bev_res", "views_per_scene", "workers",
                 "audit"),
    "train": ("seed", "dataset", "model_variant", "d", "heads", "enc_layers", "dec_layers", "ff_hidden", "alpha",
              "epochs", "batch_size", "lr", "decay", "patience", "depth_mode", "sigma", "max_train", "max_val",
              "resume"),
    "eval": ("seed", "checkpoint", "dataset", "split", "modality", "limit", "panels", "batch_size", "depth_mode"),
    "baseline": ("seed", "dataset", "split", "modality", "depth_mode", "sigma", "limit"),
    "audit": ("dataset",),
    "theorem-check": ("seed", "scenes", "fpv_res", "bev_res"),
}
SEEDED = ("gen-data", "theorem-check")
HELP = {
    "gen-data": "render a dataset of FPV/BEV samples",
    "train": "train a model on a dataset's train split",
    "eval": "zero-shot evaluation on held-out modalities",
    "baseline": "depth back-projection baseline on the same modalities",
    "audit": "texture/semantics decorrelation audit of a dataset",
    "theorem-check": "check the attention average-pool construction and the max-pool counterexample",
}


def _arg_type(name: str):
    t = str(FIELD_TYPES[name])
    if "bool" in t:
        return None
    if "int" in t:
        return int
    if "float" in t:
        return float
    return str


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bevlift", description="Zero-shot first-person to bird's-eye-view projection.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, names in COMMAND_FIELDS.items():
        sp = sub.add_parser(cmd, help=HELP[cmd])
        sp.add_argument("--config", help="TOML or JSON file with run settings; flags override it")
        for name in COMMON + names:
            flag = "--" + name.replace("_", "-")
            kind = _arg_type(name)
            if kind is None:
                sp.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
            else:
                sp.add_argument(flag, dest=name, type=kind, default=None)
    return p


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True).encode())


def _out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ValidationError("--out is required")
    return Path(cfg.out)


def _load(path: str):
    if not path:
        raise ValidationError("--dataset is required")
    try:
        return load_dataset(path)
    except DatasetError as e:
        raise ValidationError(str(e)) from e


# -- commands -------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> dict:
    out = _out(cfg)
    try:
        variant = DataVariant(cfg.variant, cfg.white_target)
        dcfg = DatasetConfig(cfg.seed, cfg.count, variant, RenderConfig(fpv_res=cfg.fpv_res, bev_res=cfg.bev_res),
                             SceneParams(), cfg.views_per_scene)
        dcfg.validate()
    except ValueError as e:
        raise ValidationError(str(e)) from e
    cfg.write(out)
    m = generate_dataset(out, dcfg, workers=cfg.workers, audit=cfg.audit)
    return {"count": m["count"], "failures": len(m["failures"]), "splits": {k: len(v) for k, v in m["splits"].items()},
            "audit_max_deviation": m.get("audit", {}).get("max_deviation")}


def train_config(cfg: RunConfig, ds) -> TrainConfig:
    r = ds.manifest["config"]["render"]
    try:
        mcfg = ModelConfig(variant=cfg.model_variant, d=cfg.d, heads=cfg.heads, enc_layers=cfg.enc_layers,
                           dec_layers=cfg.dec_layers, ff_hidden=cfg.ff_hidden, fpv_res=r["fpv_res"],
                           bev_res=r["bev_res"], fov_deg=r["fov_deg"], bev_extent=r["bev_extent"], alpha=cfg.alpha,
                           seed=cfg.seed or 0)
        tcfg = TrainConfig(model=mcfg, epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr, decay=cfg.decay,
                           patience=cfg.patience, seed=cfg.seed or 0, depth_mode=cfg.depth_mode,
                           noise_sigma=cfg.sigma, max_train=cfg.max_train, max_val=cfg.max_val)
        tcfg.validate()
    except ValueError as e:
        raise ValidationError(str(e)) from e
    return tcfg


def channel_report(model, batch, source: str) -> MetricsReport:
    """Zero and aux channels of a split, thresholded at 0.5, as one MetricsReport."""
    ev = evaluate(model, batch)
    rb = ReportBuilder(source, "trained")
    preds = []
    with no_grad():
        for s in range(0, len(batch), 16):
            b = batch.take(slice(s, s + 16))
            o = model(b.rgb, b.zero, b.geo)
            preds.append((o["zero"].data, None if o["aux"] is None else o["aux"].data))
    k = 0
    for pz, pa in preds:
        for j in range(len(pz)):
            fov, obs = batch.fov[k], batch.observed[k]
            rb.add("zero", pz[j], batch.m_zero[k] > 0.5, fov, obs)
            if pa is not None:
                for c, name in enumerate(model.cfg.aux):
                    rb.add(name, pa[j, ..., c], batch.m_aux[k, ..., c] > 0.5, fov, obs)
            k += 1
    return rb.report(soft_dice=ev["dice"], loss=ev["loss"])


def cmd_train(cfg: RunConfig) -> dict:
    out = _out(cfg)
    if cfg.seed is None:
        raise ValidationError("--seed is required for training")
    ds = _load(cfg.dataset)
    tcfg = train_config(cfg, ds)
    cfg.write(out)
    res = train(ds, tcfg, out, resume=cfg.resume)
    summary = {"best_val_loss": res["best_val_loss"], "epochs": res["epochs"]}
    va = load_split(ds, "val", tcfg, tcfg.max_val)
    if va is not None:
        model = model_from_checkpoint(out / "best.zbt")
        rep = channel_report(model, va, "train:val")
        atomic_write(out / "report.json", rep.to_json().encode())
        summary["val_pixel_iou"] = rep.get("all", "pixel_iou")
    return summary


def _triplets(ds, split: str, limit: int | None):
    try:
        idx = ds.split(split)
    except DatasetError as e:
        raise ValidationError(str(e)) from e
    idx = idx[:limit] if limit else idx
    if not idx:
        raise ValidationError(f"split {split!r} is empty")
    return [ds.load_index(i) for i in idx]


def _modalities(name: str) -> tuple[str, ...]:
    if name == "all":
        return MODALITIES
    if name not in MODALITIES:
        raise ValidationError(f"modality must be one of {MODALITIES + ('all',)}")
    return (name,)


def cmd_eval(cfg: RunConfig) -> dict:
    out = _out(cfg)
    if not cfg.checkpoint or not Path(cfg.checkpoint).exists():
        raise ValidationError(f"checkpoint {cfg.checkpoint!r} not found")
    ds = _load(cfg.dataset)
    mods = _modalities(cfg.modality)
    model = model_from_checkpoint(cfg.checkpoint)
    r = ds.manifest["config"]["render"]
    if (r["fpv_res"], r["bev_res"]) != (model.cfg.fpv_res, model.cfg.bev_res):
        raise ValidationError(f"dataset resolution {(r['fpv_res'], r['bev_res'])} does not match the model's "
                              f"{(model.cfg.fpv_res, model.cfg.bev_res)}")
    triplets = _triplets(ds, cfg.split, cfg.limit)
    cfg.write(out)
    summary = {}
    for mod in mods:
        pairs = modality_maps(triplets, mod, cfg.seed or 0)
        preds = predict_maps(model, pairs, cfg.batch_size, cfg.depth_mode)
        reports = {"model": score(pairs, preds, "model", mod, checkpoint=str(cfg.checkpoint))}
        for c in ("empty", "shuffled"):
            reports[c] = score(pairs, preds, "model", mod, control=c)
        for name, rep in reports.items():
            atomic_write(out / f"eval_{mod}_{name}.json", rep.to_json().encode())
        for j in range(min(cfg.panels, len(pairs))):
            t, m = pairs[j]
            write_panel(out / "panels" / f"{mod}_{j:03d}_{m.name}.png", t, m, preds[j])
        summary[mod] = {k: {"dice": v.get("all", "dice"), "pixel_iou": v.get("all", "pixel_iou"),
                            "occluded_pixel_iou": v.get("occluded", "pixel_iou")} for k, v in reports.items()}
    return summary


def cmd_baseline(cfg: RunConfig) -> dict:
    out = _out(cfg)
    if cfg.depth_mode not in ("exact", "noisy"):
        raise ValidationError("depth mode must be 'exact' or 'noisy'")
    ds = _load(cfg.dataset)
    mods = _modalities(cfg.modality)
    triplets = _triplets(ds, cfg.split, cfg.limit)
    cfg.write(out)
    summary = {}
    for mod in mods:
        pairs = modality_maps(triplets, mod, cfg.seed or 0)
        preds = geometric_maps(pairs, cfg.depth_mode, cfg.sigma)
        rep = score(pairs, preds, f"baseline:{cfg.depth_mode}", mod, sigma=cfg.sigma)
        atomic_write(out / f"baseline_{mod}_{cfg.depth_mode}.json", rep.to_json().encode())
        summary[mod] = {"dice": rep.get("all", "dice"), "pixel_iou": rep.get("all", "pixel_iou"),
                        "occluded_pixel_iou": rep.get("occluded", "pixel_iou")}
    return summary


def cmd_audit(cfg: RunConfig) -> dict:
    ds = _load(cfg.dataset)
    try:
        rep = decorrelation_audit(ds[i] for i in range(len(ds)))
    except AuditError as e:
        raise ValidationError(str(e)) from e
    out = Path(cfg.out) if cfg.out else Path(cfg.dataset)
    cfg.write(out)
    _write_json(out / "audit.json", rep.to_dict())
    return {"max_deviation": rep.max_deviation, "n_samples": rep.n_samples, "degenerate": rep.degenerate}


def theorem_check(seed: int, scenes: int = 20, res: int = 64, bev_res: int | None = None) -> list[dict]:
    spec = BevSpec(rows=bev_res or res, cols=bev_res or res)
    reports = []
    k = 0
    while len(reports) < scenes:
        s = int(np.random.SeedSequence([seed, k, 0x7C]).generate_state(1)[0])
        k += 1
        scene = generate_scene(s)
        try:
            pose = sample_viewpoint(scene, s)
        except ViewpointError:
            continue
        d = theorem_oracle(scene, pose, res=res, spec=spec, seed=s).to_dict()
        d["scene_seed"] = s
        reports.append(d)
    return reports


def cmd_theorem_check(cfg: RunConfig) -> dict:
    if cfg.scenes < 1:
        raise ValidationError("need at least one scene")
    reports = theorem_check(cfg.seed, cfg.scenes, cfg.fpv_res, cfg.bev_res)
    summary = {"scenes": len(reports), "average_max_error": max(r["average_max_error"] for r in reports),
               "certificates": sum(r["certificate"] is not None and r["certificate"]["inconsistent"]
                                   for r in reports),
               "skipped_counterexamples": sum(r["certificate"] is None for r in reports),
               "passed": all(r["passed"] for r in reports)}
    if cfg.out:
        cfg.write(cfg.out)
        _write_json(Path(cfg.out) / "theorem.json", {"summary": summary, "scenes": reports})
    if not summary["passed"]:
        raise RuntimeError(f"theorem check failed: {summary}")
    return summary


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "baseline": cmd_baseline,
            "audit": cmd_audit, "theorem-check": cmd_theorem_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_values, flags)
        if args.command in SEEDED and cfg.seed is None:
            raise ValidationError(f"{args.command} needs --seed")
        t0 = time.time()
        result = COMMANDS[args.command](cfg)
    except ValidationError as e:
        print(f"bevlift {args.command}: invalid input: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        log.debug("traceback", exc_info=True)
        print(f"bevlift {args.command}: failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "seconds": round(time.time() - t0, 2), **result}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
