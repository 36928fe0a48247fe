"""Render one sample per data variant and save the views side by side.

    python3 demos/render_triplet.py --out /tmp/triplets --seed 3
"""
import argparse
from pathlib import Path

import numpy as np

from bevlift.scene import write_png
from bevlift.texgen import DataVariant, RenderConfig, generate_sample

p = argparse.ArgumentParser()
p.add_argument("--out", default="triplets")
p.add_argument("--seed", type=int, default=0)
p.add_argument("--index", type=int, default=0)
args = p.parse_args()

out = Path(args.out)
cfg = RenderConfig(fpv_res=96, bev_res=64)


def gray(a, size=96):
    a = np.asarray(a, dtype=np.float64)
    idx = np.arange(size) * a.shape[0] // size
    return np.repeat(a[idx][:, idx, None], 3, -1)


for tag in ("Synth", "ModSem", "DepthProj"):
    t = generate_sample(args.seed, args.index, DataVariant(tag), cfg)
    # BEV forward is the last row of the grid; flip so it points up in the image
    tiles = [t.rgb, gray(t.zero), gray(np.flipud(t.m_zero)), gray(np.flipud(t.fov & ~t.observed))]
    write_png(out / f"{tag}.png", np.concatenate(tiles, axis=1))
    print(f"{tag:9s} fpv white {t.zero[t.depth > 0].mean():.3f}  bev white {t.m_zero[t.fov].mean():.3f}  "
          f"occluded cells {int((t.fov & ~t.observed).sum())}")
print("panels: rgb | fpv modality | bev modality | occluded cells ->", out)
