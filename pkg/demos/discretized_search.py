"""
Searching over rounded policies
===============================

The discretized pipeline rounds thresholds and capped prizes onto a coarse
grid, solves the rounded program exactly and lifts the result back.
"""

from fractions import Fraction as F

from pandora import random_instance, run_ptas, solve, weitz_value
from pandora.sim import simulate

# an instance where opening in index order captures only a quarter of the optimum
inst = random_instance(4, 3, 11)
opt = solve(inst).opt
print("optimum:", opt, f"({float(opt):.4f})")
print("index policy:", weitz_value(inst, inst.full_mask, F(0)))

for eps in (F(1, 4), F(1, 5), F(1, 8)):
    r = run_ptas(inst, eps)
    print(f"eps {eps}: utility {float(r.utility):.4f}, ratio {float(r.utility / opt):.4f}, "
          f"{r.candidates_tried} candidates")

# the lifted policy behaves as advertised under simulation
r = run_ptas(inst, F(1, 4))
s = simulate(inst, r.policy, 200_000, seed=0, jobs=4)
print(f"simulated {s.mean:.4f} +/- {s.std_error:.4f}")
