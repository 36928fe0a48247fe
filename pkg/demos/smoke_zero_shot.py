"""Train the smoke model on Synth textures, then project semantic masks it never saw.

Takes 15-20 minutes on one core the first time; reruns reuse the cached data and checkpoint.

    python3 demos/smoke_zero_shot.py --work /tmp/smoke
"""
import argparse
import logging
from pathlib import Path

from bevlift.cli import baseline, dataset, evaluation_set, trained_model, write_panel
from bevlift.cli.evaluate import modality_maps, predict_maps, score

p = argparse.ArgumentParser()
p.add_argument("--work", default="smoke")
p.add_argument("--panels", type=int, default=6)
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(message)s")

work = Path(args.work)
model = trained_model(dataset(work / "Synth-0.20", "Synth"), work / "run-Synth-0.20")
held = evaluation_set(work / "eval-Synth")

for mod in ("semantic", "rectangles"):
    pairs = modality_maps(held, mod)
    preds = predict_maps(model, pairs)
    rows = {"model": score(pairs, preds, "model", mod), "shuffled": score(pairs, preds, "model", mod, "shuffled"),
            "empty": score(pairs, preds, "model", mod, "empty"), "exact depth": baseline(held, mod)}
    print(f"\n{mod} ({len(pairs)} maps)        Dice   pixel IoU   occluded IoU")
    for name, r in rows.items():
        occ = r.get("occluded", "pixel_iou")
        print(f"  {name:12s} {r.get('all', 'dice'):8.3f} {r.get('all', 'pixel_iou') or 0:9.3f} {occ or 0:12.3f}")
    for j in range(min(args.panels, len(pairs))):
        t, m = pairs[j]
        write_panel(work / "panels" / f"{mod}_{j:02d}_{m.name}.png", t, m, preds[j])
print("\npanels (fpv rgb | fpv mask | prediction | target) in", work / "panels")
