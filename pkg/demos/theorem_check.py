"""Indicator attention reproduces average pooling; no attention reproduces max pooling.

    python3 demos/theorem_check.py --scenes 5
"""
import argparse

import numpy as np

from bevlift.model import max_pool_certificate
from bevlift.cli import theorem_check

p = argparse.ArgumentParser()
p.add_argument("--scenes", type=int, default=5)
p.add_argument("--seed", type=int, default=0)
p.add_argument("--res", type=int, default=64)
args = p.parse_args()

for r in theorem_check(args.seed, args.scenes, args.res):
    c = r["certificate"]
    print(f"scene {r['scene_seed']:>10d}: avg-pool error {r['average_max_error']:.1e} over {r['cells_checked']} cells, "
          f"{r['multi_row_cells']} cells with stacked rows, "
          + (f"certificate at column {c['column']} cell {c['rho']} rows {c['rows']}" if c else "no stacked rows"))

cert = max_pool_certificate(0, 0, (0, 1))
a, b = np.array(cert.system), np.array(cert.rhs)
print("\nmax pooling over two rows, payloads (0,1) and (1,0):")
for row, rhs in zip(a, b):
    print(f"  {row[0]:.0f}*a1 + {row[1]:.0f}*a2 = {rhs:.0f}")
print(f"rank {cert.rank}, augmented rank {cert.rank_augmented}, least-squares residual {cert.residual:.4f}")
