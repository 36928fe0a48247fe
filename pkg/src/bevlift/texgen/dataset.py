"""On-disk datasets: a JSON manifest plus one binary ``ZBD1`` record per sample.

Record layout: magic ``ZBD1``, little-endian u64 header length, UTF-8 JSON
header (array table and provenance), then the raw array bytes back to back.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from ..numeric.checkpoint import atomic_write
from ..scene import SceneParams, ViewpointError
from .audit import MIN_SAMPLES, decorrelation_audit
from .synth import TextureError
from .triplet import DataVariant, DatasetTriplet, RenderConfig, generate_sample

log = logging.getLogger(__name__)

RECORD_MAGIC = b"ZBD1"
FORMAT = "bevlift-dataset"
VERSION = 1

# storage dtype per array: binary layers and labels as bytes, colour as float32, depth at full
# precision so back-projection from a loaded record lands in the same cells as at generation
STORAGE = {"rgb": "<f4", "zero": "|u1", "depth": "<f8", "semantics": "|u1", "m_zero": "|u1", "m_aux": "|u1",
           "bev_semantics": "|u1", "fov": "|u1", "observed": "|u1"}
LOADED = {"rgb": np.float64, "zero": np.float64, "depth": np.float64, "semantics": np.int64,
          "m_zero": np.float64, "m_aux": np.float64, "bev_semantics": np.int64, "fov": bool, "observed": bool}
SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    pass


def encode_record(t: DatasetTriplet) -> bytes:
    table, chunks, off = [], [], 0
    for name in DatasetTriplet.ARRAYS:
        a = np.ascontiguousarray(getattr(t, name), dtype=STORAGE[name])
        table.append({"name": name, "dtype": STORAGE[name], "shape": list(a.shape), "offset": off,
                      "nbytes": a.nbytes})
        chunks.append(a.tobytes())
        off += a.nbytes
    header = json.dumps({"arrays": table, "provenance": t.provenance}, sort_keys=True).encode()
    return RECORD_MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def decode_record(buf: bytes) -> DatasetTriplet:
    if buf[:4] != RECORD_MAGIC:
        raise DatasetError("not a ZBD1 record")
    (hlen,) = struct.unpack("<Q", buf[4:12])
    header = json.loads(buf[12:12 + hlen])
    base = 12 + hlen
    arrays = {}
    for e in header["arrays"]:
        raw = np.frombuffer(buf, dtype=e["dtype"], count=int(np.prod(e["shape"])), offset=base + e["offset"])
        arrays[e["name"]] = raw.reshape(e["shape"]).astype(LOADED[e["name"]])
    missing = set(DatasetTriplet.ARRAYS) - set(arrays)
    if missing:
        raise DatasetError(f"record lacks arrays {sorted(missing)}")
    return DatasetTriplet(**arrays, provenance=header["provenance"])


def split_of(index: int, views_per_scene: int) -> str:
    """80/10/10 by scene: every view of a scene lands in the same split."""
    g = (index // views_per_scene) % 10
    return "train" if g < 8 else ("val" if g == 8 else "test")


@dataclass
class DatasetConfig:
    seed: int
    count: int
    variant: DataVariant = field(default_factory=DataVariant)
    render: RenderConfig = field(default_factory=RenderConfig)
    scene: SceneParams = field(default_factory=SceneParams)
    views_per_scene: int = 40

    def validate(self) -> None:
        if self.count < 0:
            raise ValueError("sample count must be non-negative")
        if self.views_per_scene < 1:
            raise ValueError("views per scene must be at least 1")
        self.scene.validate()

    def to_dict(self) -> dict:
        return {"seed": self.seed, "count": self.count, "variant": asdict(self.variant),
                "render": asdict(self.render), "scene": asdict(self.scene), "views_per_scene": self.views_per_scene}

    @staticmethod
    def from_dict(d: dict) -> "DatasetConfig":
        v = dict(d.get("variant", {}))
        if "rect_range" in v:
            v["rect_range"] = tuple(v["rect_range"])
        return DatasetConfig(int(d["seed"]), int(d["count"]), DataVariant(**v), RenderConfig(**d.get("render", {})),
                             SceneParams(**d.get("scene", {})), int(d.get("views_per_scene", 40)))


def _work(args):
    cfg, index = args
    try:
        t = generate_sample(cfg.seed, index, cfg.variant, cfg.render, cfg.scene, cfg.views_per_scene)
        return index, encode_record(t), None
    except (ViewpointError, TextureError) as e:
        return index, None, f"{type(e).__name__}: {e}"


def record_path(root: Path, index: int) -> Path:
    return root / "samples" / f"{index:06d}.zbd"


def generate_dataset(path, cfg: DatasetConfig, workers: int = 1, audit: bool = True) -> dict:
    """Render ``cfg.count`` samples into ``path``; returns the manifest written there.

    Per-sample failures are logged and tallied, the run continues.
    """
    cfg.validate()
    root = Path(path)
    (root / "samples").mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, i) for i in range(cfg.count)]
    ok: list[int] = []
    failures: dict[str, str] = {}
    if workers > 1 and cfg.count > 1:
        with Pool(workers) as pool:
            results = pool.imap(_work, jobs, chunksize=4)
            for index, rec, err in results:
                _store(root, index, rec, err, ok, failures)
    else:
        for job in jobs:
            _store(root, *_work(job), ok, failures)
    splits = {s: [i for i in ok if split_of(i, cfg.views_per_scene) == s] for s in SPLITS}
    manifest = {"format": FORMAT, "version": VERSION, "config": cfg.to_dict(), "variant": cfg.variant.tag,
                "white_target": cfg.variant.white_target if cfg.variant.tag != "DepthProj" else None,
                "resolutions": {"fpv": cfg.render.fpv_res, "bev": cfg.render.bev_res},
                "seeds": {"dataset": cfg.seed}, "count": len(ok), "requested": cfg.count, "samples": ok,
                "failures": failures, "splits": splits}
    if audit and cfg.variant.tag != "DepthProj":
        if len(ok) >= MIN_SAMPLES:
            ds = Dataset(root, manifest)
            manifest["audit"] = decorrelation_audit(ds[i] for i in range(len(ds))).to_dict()
        else:
            manifest["audit"] = {"skipped": f"fewer than {MIN_SAMPLES} samples"}
    atomic_write(root / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode())
    atomic_write(root / "config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True).encode())
    return manifest


def _store(root, index, rec, err, ok, failures):
    if rec is None:
        log.warning("sample %d failed: %s", index, err)
        failures[str(index)] = err
        return
    atomic_write(record_path(root, index), rec)
    ok.append(index)


class Dataset:
    """Lazy reader; ``ds[k]`` decodes the k-th stored sample."""

    def __init__(self, root, manifest: dict):
        self.root = Path(root)
        self.manifest = manifest
        self.indices = list(manifest["samples"])

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, k: int) -> DatasetTriplet:
        return self.load_index(self.indices[k])

    def load_index(self, index: int) -> DatasetTriplet:
        return decode_record(record_path(self.root, index).read_bytes())

    def split(self, name: str) -> list[int]:
        """Sample indices (as stored, not positions) of one split."""
        if name not in SPLITS:
            raise DatasetError(f"unknown split {name!r}")
        return list(self.manifest["splits"][name])

    @property
    def config(self) -> DatasetConfig:
        return DatasetConfig.from_dict(self.manifest["config"])


def load_dataset(path) -> Dataset:
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise DatasetError(f"{root} has no manifest.json")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise DatasetError(f"unsupported dataset format {manifest.get('format')!r} v{manifest.get('version')}")
    for i in manifest["samples"]:
        if not record_path(root, i).exists():
            raise DatasetError(f"manifest lists sample {i} but its record is missing")
    return Dataset(root, manifest)
