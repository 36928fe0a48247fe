"""Depth back-projection only paints cells the camera sees; everything behind furniture stays empty.

    python3 demos/baseline_holes.py --out /tmp/holes
"""
import argparse
from pathlib import Path

import numpy as np

from bevlift.geometry import PinholeCamera, Pose, geometric_projection
from bevlift.model.train import noisy_depth
from bevlift.scene import write_png
from bevlift.texgen import DataVariant, RenderConfig, generate_sample

p = argparse.ArgumentParser()
p.add_argument("--out", default="holes")
p.add_argument("--count", type=int, default=8)
p.add_argument("--sigma", type=float, default=0.08)
args = p.parse_args()

cfg = RenderConfig(fpv_res=128, bev_res=64)
out = Path(args.out)
tot = {"exact": [0, 0], "noisy": [0, 0]}
for i in range(args.count):
    t = generate_sample(1, i, DataVariant("Synth"), cfg)
    cam = PinholeCamera.from_fov(cfg.fpv_res, fov_deg=cfg.fov_deg, pose=Pose.from_dict(t.provenance["pose"]))
    gt = t.m_zero > 0.5
    maps = {}
    for mode, depth in (("exact", t.depth), ("noisy", noisy_depth(t.depth, args.sigma, i))):
        pred = geometric_projection(depth, cam, t.zero, cfg.bev_spec(), "max", t.fov).values[..., 0] > 0.5
        tot[mode][0] += int((pred & gt & t.fov).sum())
        tot[mode][1] += int(((pred | gt) & t.fov).sum())
        maps[mode] = pred
    occ = t.fov & ~t.observed
    # red: occluded cells, white: prediction
    img = np.stack([np.maximum(maps["exact"], 0.6 * occ), maps["exact"], maps["exact"]], -1) * 1.0
    tiles = [np.flipud(a) for a in (np.repeat(gt[..., None], 3, -1) * 1.0, img)]
    write_png(out / f"{i:02d}.png", np.kron(np.concatenate(tiles, 1), np.ones((2, 2, 1))))
    print(f"sample {i}: occluded cells {int(occ.sum())}, predicted white on them {int((maps['exact'] & occ).sum())}")
for mode, (a, b) in tot.items():
    print(f"{mode:5s} depth pixel IoU {a / b:.3f}")
