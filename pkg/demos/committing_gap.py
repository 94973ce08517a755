"""
How much does adaptivity buy?
=============================

Committing policies fix a single box as a closed fallback up front.  Here we
measure their ratio to the optimum on random instances.
"""

from fractions import Fraction as F

import numpy as np

from pandora import best_committing, random_instance, solve

ratios = []
for seed in range(150):
    inst = random_instance(2 + seed % 4, 3, seed)
    opt = solve(inst).opt
    if opt == 0:
        continue
    _, u = best_committing(inst)
    ratios.append(float(u / opt))

ratios = np.array(ratios)
print(f"{len(ratios)} instances")
print(f"worst ratio {ratios.min():.4f}, mean {ratios.mean():.4f}")
print(f"share strictly below optimum: {(ratios < 1).mean():.2%}")
print("guaranteed floor:", F(4, 5))
